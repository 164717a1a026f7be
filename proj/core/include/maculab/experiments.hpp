#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maculab/dataset.hpp"
#include "maculab/evaluation.hpp"
#include "maculab/imageops.hpp"
#include "maculab/model.hpp"
#include "maculab/synthgen.hpp"

namespace maculab {

/// Evaluation-side knobs shared by every reporting command.
struct EvalOptions {
  ThicknessRule rule = ThicknessRule::cpt;
  double threshold_um = 250.0;
  std::vector<std::string> grader_ids;   // empty = every grader in the manifest
  std::string grader_rule = "judgment";  // judgment | hardex_500um | hardex_1dd | hardex_2dd
  int bootstrap_replicates = 2000;
  int permutations = 2000;
  uint64_t seed = 0;
  int n_threads = 0;
  double fp_cut_um = 225.0;
  double fn_cut_um = 275.0;
};

/// Inputs of a training run; sweeps reuse this per point.
struct TrainInputs {
  std::filesystem::path manifest;
  std::filesystem::path splits;  // empty = split on the fly with fractions/seed below
  SplitFractions fractions{0.8, 0.0, 0.2};
  uint64_t split_seed = 0;
  NetworkConfig net;
  TrainConfig train;
  AugmentConfig augment;
  ThicknessRule rule = ThicknessRule::cpt;
  double threshold_um = 250.0;
  std::optional<CropSpec> crop;  // landmark-centered mask applied before resize
  int n_threads = 0;
};

struct EvaluateInputs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path splits;  // empty = evaluate every record
  EvalOptions opts;
  bool secondary_style = false;  // annotate the prevalence-shift comparison
};

/// Every command below writes its artifacts plus run_config.json (the full
/// resolved inputs) and hashes.json (FNV-1a of each artifact) into out_dir,
/// and returns the artifact list relative to out_dir. Reruns from the same
/// config and inputs are byte-identical; `run_verify` exploits that.
std::vector<std::string> run_generate(const SynthConfig& config, int n_patients,
                                      const std::filesystem::path& out_dir);

void run_split(const std::filesystem::path& manifest, const SplitFractions& fractions,
               uint64_t seed, const std::filesystem::path& out_csv);

std::vector<std::string> run_train(const TrainInputs& in, const std::filesystem::path& out_dir);

std::vector<std::string> run_evaluate(const EvaluateInputs& in,
                                      const std::filesystem::path& out_dir);

std::vector<std::string> run_sweep_fraction(const TrainInputs& in,
                                            const std::vector<double>& fractions,
                                            const EvalOptions& opts,
                                            const std::filesystem::path& out_dir);

std::vector<std::string> run_sweep_crop(const TrainInputs& in, const std::vector<CropSpec>& specs,
                                        bool mask_training, bool include_full_image_baseline,
                                        const EvalOptions& opts,
                                        const std::filesystem::path& out_dir);

std::vector<std::string> run_sweep_threshold(const std::filesystem::path& checkpoint,
                                             const std::filesystem::path& manifest,
                                             const std::filesystem::path& splits,
                                             const std::vector<double>& thresholds_um,
                                             const EvalOptions& opts,
                                             const std::filesystem::path& out_dir);

struct VerifyResult {
  int files_checked = 0;
  std::vector<std::string> mismatches;  // relative paths that re-derived differently
  bool ok() const { return mismatches.empty(); }
};

/// Re-derives every artifact of a report directory from its run_config.json
/// into a scratch directory and compares hashes file by file.
VerifyResult run_verify(const std::filesystem::path& report_dir);

// --- shared plumbing, exposed for tests and the acceptance suite ---

struct LoadedSet {
  std::vector<EyeImageRecord> records;
  std::vector<ImageTensor> images;  // raw, as stored on disk
};

/// Reads every record's image (paths resolved against the manifest's
/// directory). Missing files raise std::runtime_error listing the ids.
LoadedSet load_images(const std::filesystem::path& manifest_path,
                      const std::vector<EyeImageRecord>& records, int n_threads = 0);

/// Mask (optional) then resize to the network input size.
ImageTensor prepare_image(const ImageTensor& raw, const Landmarks& landmarks,
                          const std::optional<CropSpec>& crop, int input_size);

std::vector<TrainExample> to_train_examples(const LoadedSet& set, ThicknessRule rule,
                                            double threshold_um,
                                            const std::optional<CropSpec>& crop, int input_size,
                                            int n_threads = 0);

/// Scores every record on the three heads with the checkpoint's EMA
/// parameters. head: 0 = cidme, 1 = srf, 2 = irf. Cases whose truth is
/// unavailable for the head are omitted.
std::vector<ScoredCase> scored_cases_for_head(const LoadedSet& set,
                                              const std::vector<PredictionTriple>& preds,
                                              int head, ThicknessRule rule, double threshold_um);

std::vector<PredictionTriple> score_set(const Checkpoint& ckpt, const LoadedSet& set,
                                        const std::optional<CropSpec>& crop, int n_threads = 0);

/// Grader's binary call under the configured rule; nullopt when ungradable
/// or the grader never saw the record.
std::optional<int> grader_binary(const EyeImageRecord& rec, const std::string& grader_id,
                                 const std::string& grader_rule);

uint64_t file_hash(const std::filesystem::path& path);

}  // namespace maculab
