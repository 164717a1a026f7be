#include "maculab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace maculab {

namespace {

using json = nlohmann::json;

double eval_data_loss(const NetworkConfig& cfg, const NetGeometry& geom,
                      const NetParams<float>& params, const std::vector<TrainExample>& set,
                      int n_threads) {
  std::vector<double> losses(set.size(), 0.0);
  parallel_for(static_cast<int>(set.size()), n_threads, [&](int i) {
    const ImageCache<float> cache = forward_image(cfg, geom, params, set[i].image,
                                                  /*train_mode=*/false, nullptr,
                                                  /*keep_cache=*/false);
    double loss = 0.0;
    for (int h = 0; h < cfg.heads; ++h) {
      const auto y = set[i].labels.head(h);
      if (!y) continue;
      const double z = static_cast<double>(cache.logits[h]);
      loss += std::max(z, 0.0) - z * *y + std::log1p(std::exp(-std::fabs(z)));
    }
    losses[i] = loss;
  });
  double sum = 0.0;
  for (const double l : losses) sum += l;
  return set.empty() ? 0.0 : sum / static_cast<double>(set.size());
}

}  // namespace

TrainResult train_model(const std::vector<TrainExample>& train_set,
                        const std::vector<TrainExample>& tune_set, const NetworkConfig& net_cfg,
                        const TrainConfig& train_cfg, const AugmentConfig& augment_cfg,
                        int n_threads) {
  net_cfg.validate();
  train_cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train_model: empty training set");
  for (const auto& ex : train_set)
    if (ex.image.height != net_cfg.input_size || ex.image.width != net_cfg.input_size)
      throw std::invalid_argument("train_model: image does not match input_size");

  const NetGeometry geom = NetGeometry::resolve(net_cfg);
  const int batch = std::min<int>(train_cfg.batch_size, static_cast<int>(train_set.size()));

  TrainResult result;
  result.params = init_params<float>(net_cfg, derive_seed(train_cfg.seed, "init"));
  result.ema = result.params;  // EMA starts at the initial parameters
  AdamState<float> adam = make_adam_state(result.params);

  const long eval_every = train_cfg.tune_eval_every > 0
                              ? train_cfg.tune_eval_every
                              : std::max<long>(1, train_cfg.total_steps / 10);

  std::vector<int> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  size_t cursor = order.size();  // forces a shuffle before the first step
  uint64_t epoch = 0;

  std::vector<const ImageTensor*> batch_images(static_cast<size_t>(batch));
  std::vector<ImageTensor> augmented(static_cast<size_t>(batch));
  std::vector<HeadLabels> batch_labels(static_cast<size_t>(batch));

  for (long step = 0; step < train_cfg.total_steps; ++step) {
    if (cursor + static_cast<size_t>(batch) > order.size()) {
      Rng shuffle_rng = Rng(train_cfg.seed).derive("shuffle", epoch++);
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    for (int i = 0; i < batch; ++i) {
      const int idx = order[cursor + static_cast<size_t>(i)];
      batch_labels[static_cast<size_t>(i)] = train_set[static_cast<size_t>(idx)].labels;
    }

    // Augmentation streams depend only on (seed, step, slot), so batches can
    // be prepared in parallel without perturbing each other.
    parallel_for(batch, n_threads, [&](int i) {
      const int idx = order[cursor + static_cast<size_t>(i)];
      Rng aug_rng(derive_seed(train_cfg.seed, "augment",
                              static_cast<uint64_t>(step) * static_cast<uint64_t>(batch) +
                                  static_cast<uint64_t>(i)));
      augmented[static_cast<size_t>(i)] =
          augment(train_set[static_cast<size_t>(idx)].image, augment_cfg, aug_rng);
    });
    for (int i = 0; i < batch; ++i)
      batch_images[static_cast<size_t>(i)] = &augmented[static_cast<size_t>(i)];
    cursor += static_cast<size_t>(batch);

    const uint64_t dropout_seed = derive_seed(train_cfg.seed, "dropout", static_cast<uint64_t>(step));
    LossAndGrads<float> lg = loss_and_gradients(net_cfg, result.params, batch_images,
                                                batch_labels, train_cfg.weight_decay,
                                                dropout_seed, n_threads);
    if (!std::isfinite(lg.loss)) {
      std::ostringstream os;
      os << "train_model: loss diverged (non-finite) at step " << step;
      throw std::runtime_error(os.str());
    }
    result.train_loss.push_back(lg.loss);

    adam_step(result.params, lg.grads, adam, train_cfg, step + 1);
    ema_update(result.ema, result.params, train_cfg.ema_decay);

    if (!tune_set.empty() && ((step + 1) % eval_every == 0 || step + 1 == train_cfg.total_steps))
      result.tune_loss.emplace_back(step + 1,
                                    eval_data_loss(net_cfg, geom, result.ema, tune_set, n_threads));
  }
  return result;
}

PredictionTriple predict(const NetworkConfig& net_cfg, const NetParams<float>& params,
                         const ImageTensor& image) {
  const NetGeometry geom = NetGeometry::resolve(net_cfg);
  const ImageCache<float> cache =
      forward_image(net_cfg, geom, params, image, /*train_mode=*/false, nullptr,
                    /*keep_cache=*/false);
  return prediction_from_logits(cache.logits);
}

std::vector<PredictionTriple> predict_batch(const NetworkConfig& net_cfg,
                                            const NetParams<float>& params,
                                            const std::vector<const ImageTensor*>& images,
                                            int n_threads) {
  const NetGeometry geom = NetGeometry::resolve(net_cfg);
  std::vector<PredictionTriple> out(images.size());
  parallel_for(static_cast<int>(images.size()), n_threads, [&](int i) {
    const ImageCache<float> cache =
        forward_image(net_cfg, geom, params, *images[static_cast<size_t>(i)],
                      /*train_mode=*/false, nullptr, /*keep_cache=*/false);
    out[static_cast<size_t>(i)] = prediction_from_logits(cache.logits);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

namespace {

NetworkConfig net_from_json(const json& j) {
  static const std::set<std::string> known = {"input_size", "blocks", "global_average_pool",
                                              "dropout_keep_prob", "heads"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument("NetworkConfig: unknown field '" + key + "'");
  NetworkConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.global_average_pool = j.value("global_average_pool", c.global_average_pool);
  c.dropout_keep_prob = j.value("dropout_keep_prob", c.dropout_keep_prob);
  c.heads = j.value("heads", c.heads);
  if (j.contains("blocks")) {
    c.blocks.clear();
    for (const auto& b : j.at("blocks")) {
      if (!b.is_array() || b.size() != 3)
        throw std::invalid_argument("NetworkConfig: each block is [out_channels, kernel, stride]");
      c.blocks.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>()});
    }
  }
  c.validate();
  return c;
}

json net_to_json(const NetworkConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) blocks.push_back({b.out_channels, b.kernel, b.stride});
  return json{{"input_size", c.input_size},
              {"blocks", blocks},
              {"global_average_pool", c.global_average_pool},
              {"dropout_keep_prob", c.dropout_keep_prob},
              {"heads", c.heads}};
}

TrainConfig train_from_json(const json& j) {
  static const std::set<std::string> known = {
      "learning_rate", "batch_size", "weight_decay", "adam_beta1",      "adam_beta2",
      "adam_epsilon",  "ema_decay",  "total_steps",  "seed",            "tune_eval_every"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument("TrainConfig: unknown field '" + key + "'");
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.seed = j.value("seed", c.seed);
  c.tune_eval_every = j.value("tune_eval_every", c.tune_eval_every);
  c.validate();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"weight_decay", c.weight_decay},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"ema_decay", c.ema_decay},
              {"total_steps", c.total_steps},
              {"seed", c.seed},
              {"tune_eval_every", c.tune_eval_every}};
}

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

NetworkConfig load_network_config(const std::filesystem::path& path) {
  return net_from_json(parse_file(path));
}
void save_network_config(const NetworkConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path.string());
  out << net_to_json(cfg).dump(2) << "\n";
}
NetworkConfig network_config_from_json_string(const std::string& s) {
  return net_from_json(json::parse(s));
}
std::string network_config_to_json_string(const NetworkConfig& cfg) {
  return net_to_json(cfg).dump(2);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_from_json(parse_file(path));
}
void save_train_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path.string());
  out << train_to_json(cfg).dump(2) << "\n";
}
TrainConfig train_config_from_json_string(const std::string& s) {
  return train_from_json(json::parse(s));
}
std::string train_config_to_json_string(const TrainConfig& cfg) {
  return train_to_json(cfg).dump(2);
}

// ---------------------------------------------------------------------------
// Checkpoint container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'L', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_floats(std::ostream& out, const std::vector<float>& v) {
  for (const float f : v) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(out, bits);
  }
}

void read_floats(std::istream& in, std::vector<float>& v) {
  for (auto& f : v) {
    const uint32_t bits = read_u32(in);
    std::memcpy(&f, &bits, 4);
  }
}

std::vector<size_t> expected_sizes(const NetworkConfig& cfg) {
  const NetGeometry geom = NetGeometry::resolve(cfg);
  std::vector<size_t> sizes;
  for (const auto& b : geom.blocks) {
    sizes.push_back(static_cast<size_t>(b.out_c) * b.kernel * b.kernel * b.in_c);
    sizes.push_back(static_cast<size_t>(b.out_c));
  }
  sizes.push_back(static_cast<size_t>(cfg.heads) * geom.feature_count);
  sizes.push_back(static_cast<size_t>(cfg.heads));
  return sizes;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());

  json arrays = json::array();
  for (const auto& ref : array_refs(ckpt.params))
    arrays.push_back({{"name", ref.name}, {"size", ref.v->size()}});

  json header;
  header["net"] = net_to_json(ckpt.net);
  header["train"] = train_to_json(ckpt.train);
  header["step"] = ckpt.step;
  header["arrays"] = arrays;
  const std::string header_text = header.dump();

  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  for (const auto* group : {&ckpt.params, &ckpt.ema, &ckpt.adam.m, &ckpt.adam.v})
    for (const auto& ref : array_refs(*group)) write_floats(out, *ref.v);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open checkpoint: " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::invalid_argument("not a checkpoint file: " + path.string());
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::invalid_argument("unsupported checkpoint version " + std::to_string(version));

  const uint64_t header_len = read_u64(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::invalid_argument("truncated checkpoint header: " + path.string());

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.net = net_from_json(header.at("net"));
  ckpt.train = train_from_json(header.at("train"));
  ckpt.step = header.at("step").get<long>();
  ckpt.params = init_params<float>(ckpt.net, 0);  // shapes only; data overwritten below
  ckpt.ema = zeros_like(ckpt.params);
  ckpt.adam = make_adam_state(ckpt.params);

  const std::vector<size_t> sizes = expected_sizes(ckpt.net);
  const json& arrays = header.at("arrays");
  if (arrays.size() != sizes.size())
    throw std::invalid_argument("checkpoint arrays do not match the network config");
  for (size_t i = 0; i < sizes.size(); ++i)
    if (arrays[i].at("size").get<size_t>() != sizes[i])
      throw std::invalid_argument("checkpoint shape mismatch in " +
                                  arrays[i].at("name").get<std::string>());

  for (auto* group : {&ckpt.params, &ckpt.ema, &ckpt.adam.m, &ckpt.adam.v})
    for (const auto& ref : array_refs(*group)) read_floats(in, *ref.v);
  if (!in) throw std::invalid_argument("truncated checkpoint payload: " + path.string());
  return ckpt;
}

}  // namespace maculab
