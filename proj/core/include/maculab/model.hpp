#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "maculab/imageops.hpp"
#include "maculab/net.hpp"

namespace maculab {

struct TrainExample {
  ImageTensor image;  // already at the network input size
  HeadLabels labels;
};

struct TrainResult {
  NetParams<float> params;  // final raw parameters
  NetParams<float> ema;     // evaluation parameters (running average)
  std::vector<double> train_loss;                  // per step, decay included
  std::vector<std::pair<long, double>> tune_loss;  // (step, data loss)
};

/// The full training recipe: seeded per-epoch shuffling, per-step pipeline of
/// sample batch -> augment -> forward(train) -> loss -> gradients -> adam ->
/// ema. The EMA copy starts at the initial parameters and is what evaluation
/// uses. Deterministic in (data, configs, seed) for any thread count.
TrainResult train_model(const std::vector<TrainExample>& train_set,
                        const std::vector<TrainExample>& tune_set, const NetworkConfig& net_cfg,
                        const TrainConfig& train_cfg, const AugmentConfig& augment_cfg,
                        int n_threads = 0);

PredictionTriple predict(const NetworkConfig& net_cfg, const NetParams<float>& params,
                         const ImageTensor& image);

std::vector<PredictionTriple> predict_batch(const NetworkConfig& net_cfg,
                                            const NetParams<float>& params,
                                            const std::vector<const ImageTensor*>& images,
                                            int n_threads = 0);

/// Versioned binary container: JSON header (configs, step, array manifest)
/// followed by raw little-endian float32 data for parameters, EMA, and
/// optimizer moments. Loading validates every shape against the config.
struct Checkpoint {
  NetworkConfig net;
  TrainConfig train;
  long step = 0;
  NetParams<float> params;
  NetParams<float> ema;
  AdamState<float> adam;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

NetworkConfig load_network_config(const std::filesystem::path& path);
void save_network_config(const NetworkConfig& cfg, const std::filesystem::path& path);
NetworkConfig network_config_from_json_string(const std::string& json_text);
std::string network_config_to_json_string(const NetworkConfig& cfg);

TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const TrainConfig& cfg, const std::filesystem::path& path);
TrainConfig train_config_from_json_string(const std::string& json_text);
std::string train_config_to_json_string(const TrainConfig& cfg);

}  // namespace maculab
