#include "maculab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "maculab/hash.hpp"
#include "maculab/strings.hpp"

namespace maculab {

namespace {

using json = nlohmann::json;

constexpr const char* kHeadNames[3] = {"cidme", "srf", "irf"};

// -- small shared plumbing ---------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir.string());
}

/// Writes run_config.json and hashes.json; returns the artifact list.
std::vector<std::string> finalize_run_dir(const std::filesystem::path& out_dir,
                                          const json& run_config,
                                          std::vector<std::string> artifacts) {
  write_text(out_dir / "run_config.json", run_config.dump(2) + "\n");
  std::sort(artifacts.begin(), artifacts.end());
  json hashes;
  for (const auto& rel : artifacts)
    hashes[rel] = hash_to_hex(fnv1a64_file(out_dir / rel));
  write_text(out_dir / "hashes.json", hashes.dump(2) + "\n");
  return artifacts;
}

json metric_json(const BootstrapResult& r, long n) {
  return json{{"value", r.point_estimate}, {"ci_low", r.ci_low},   {"ci_high", r.ci_high},
              {"n", n},                    {"replicates", r.replicates}, {"seed", r.seed}};
}

std::string fmt(double v) { return format_double_roundtrip(v); }

// metric closures over a fixed decision threshold
CaseMetric threshold_metric(double threshold, const char* which) {
  const std::string name = which;
  return [threshold, name](const std::vector<ScoredCase>& cases) -> std::optional<double> {
    if (cases.empty()) return std::nullopt;
    const ConfusionCounts c = confusion_at(cases, threshold);
    if (name == "kappa") return cohens_kappa(c);
    const SummaryMetrics m = summary_metrics(c);
    if (name == "sensitivity") return m.sensitivity;
    if (name == "specificity") return m.specificity;
    if (name == "ppv") return m.ppv;
    if (name == "npv") return m.npv;
    return m.accuracy;
  };
}

CaseMetric auc_metric() {
  return [](const std::vector<ScoredCase>& cases) -> std::optional<double> {
    long pos = 0, neg = 0;
    for (const auto& c : cases) (c.truth ? pos : neg)++;
    if (pos == 0 || neg == 0) return std::nullopt;
    return roc_and_auc(cases).auc;
  };
}

BinaryMetric binary_metric(const char* which) {
  const std::string name = which;
  return [name](const std::vector<int>& pred,
                const std::vector<int>& truth) -> std::optional<double> {
    ConfusionCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] && truth[i])
        c.tp++;
      else if (pred[i] && !truth[i])
        c.fp++;
      else if (!pred[i] && truth[i])
        c.fn++;
      else
        c.tn++;
    }
    const SummaryMetrics m = summary_metrics(c);
    return name == "sensitivity" ? m.sensitivity
                                 : (name == "specificity" ? m.specificity : m.accuracy);
  };
}

// -- config (de)serialization ------------------------------------------------

json augment_to_json(const AugmentConfig& c) {
  return json{{"flip_horizontal", c.flip_horizontal},
              {"flip_vertical", c.flip_vertical},
              {"brightness_max_delta", c.brightness_max_delta},
              {"saturation_lo", c.saturation_lo},
              {"saturation_hi", c.saturation_hi},
              {"hue_max_delta", c.hue_max_delta},
              {"contrast_lo", c.contrast_lo},
              {"contrast_hi", c.contrast_hi}};
}

AugmentConfig augment_from_json(const json& j) {
  AugmentConfig c;
  c.flip_horizontal = j.value("flip_horizontal", c.flip_horizontal);
  c.flip_vertical = j.value("flip_vertical", c.flip_vertical);
  c.brightness_max_delta = j.value("brightness_max_delta", c.brightness_max_delta);
  c.saturation_lo = j.value("saturation_lo", c.saturation_lo);
  c.saturation_hi = j.value("saturation_hi", c.saturation_hi);
  c.hue_max_delta = j.value("hue_max_delta", c.hue_max_delta);
  c.contrast_lo = j.value("contrast_lo", c.contrast_lo);
  c.contrast_hi = j.value("contrast_hi", c.contrast_hi);
  return c;
}

json crop_to_json(const CropSpec& c) {
  return json{{"center", to_string(c.center)}, {"radius_dd", c.radius_dd}};
}

CropSpec crop_from_json(const json& j) {
  return {crop_center_from_string(j.at("center").get<std::string>()),
          j.at("radius_dd").get<double>()};
}

std::string rule_name(ThicknessRule r) { return r == ThicknessRule::cpt ? "cpt" : "cst"; }
ThicknessRule rule_from_name(const std::string& s) {
  if (s == "cpt") return ThicknessRule::cpt;
  if (s == "cst") return ThicknessRule::cst;
  throw std::invalid_argument("unknown thickness rule '" + s + "'");
}

json opts_to_json(const EvalOptions& o) {
  return json{{"rule", rule_name(o.rule)},
              {"threshold_um", o.threshold_um},
              {"grader_ids", o.grader_ids},
              {"grader_rule", o.grader_rule},
              {"bootstrap_replicates", o.bootstrap_replicates},
              {"permutations", o.permutations},
              {"seed", o.seed},
              {"fp_cut_um", o.fp_cut_um},
              {"fn_cut_um", o.fn_cut_um}};
}

EvalOptions opts_from_json(const json& j) {
  EvalOptions o;
  o.rule = rule_from_name(j.at("rule").get<std::string>());
  o.threshold_um = j.at("threshold_um").get<double>();
  o.grader_ids = j.at("grader_ids").get<std::vector<std::string>>();
  o.grader_rule = j.at("grader_rule").get<std::string>();
  o.bootstrap_replicates = j.at("bootstrap_replicates").get<int>();
  o.permutations = j.at("permutations").get<int>();
  o.seed = j.at("seed").get<uint64_t>();
  o.fp_cut_um = j.at("fp_cut_um").get<double>();
  o.fn_cut_um = j.at("fn_cut_um").get<double>();
  return o;
}

json train_inputs_to_json(const TrainInputs& in) {
  json j{{"manifest", in.manifest.string()},
         {"manifest_hash", hash_to_hex(fnv1a64_file(in.manifest))},
         {"net", json::parse(network_config_to_json_string(in.net))},
         {"train", json::parse(train_config_to_json_string(in.train))},
         {"augment", augment_to_json(in.augment)},
         {"rule", rule_name(in.rule)},
         {"threshold_um", in.threshold_um}};
  if (!in.splits.empty()) {
    j["splits"] = in.splits.string();
    j["splits_hash"] = hash_to_hex(fnv1a64_file(in.splits));
  } else {
    j["fractions"] = {{"train", in.fractions.train},
                      {"tune", in.fractions.tune},
                      {"validation", in.fractions.validation}};
    j["split_seed"] = in.split_seed;
  }
  if (in.crop) j["crop"] = crop_to_json(*in.crop);
  return j;
}

TrainInputs train_inputs_from_json(const json& j) {
  TrainInputs in;
  in.manifest = j.at("manifest").get<std::string>();
  in.net = network_config_from_json_string(j.at("net").dump());
  in.train = train_config_from_json_string(j.at("train").dump());
  in.augment = augment_from_json(j.at("augment"));
  in.rule = rule_from_name(j.at("rule").get<std::string>());
  in.threshold_um = j.at("threshold_um").get<double>();
  if (j.contains("splits")) {
    in.splits = j.at("splits").get<std::string>();
  } else {
    in.fractions = {j.at("fractions").at("train").get<double>(),
                    j.at("fractions").at("tune").get<double>(),
                    j.at("fractions").at("validation").get<double>()};
    in.split_seed = j.at("split_seed").get<uint64_t>();
  }
  if (j.contains("crop")) in.crop = crop_from_json(j.at("crop"));
  return in;
}

void check_input_hash(const json& run_config, const char* path_key, const char* hash_key) {
  if (!run_config.contains(path_key)) return;
  const std::filesystem::path p = run_config.at(path_key).get<std::string>();
  const std::string want = run_config.at(hash_key).get<std::string>();
  if (hash_to_hex(fnv1a64_file(p)) != want)
    throw std::runtime_error("verify: input " + p.string() +
                             " changed since the report was written");
}

// -- dataset assembly --------------------------------------------------------

SplitAssignment resolve_splits(const Manifest& manifest, const TrainInputs& in) {
  if (!in.splits.empty()) return load_split_assignment(in.splits);
  return split_by_patient(manifest, in.fractions, in.split_seed);
}

struct SplitSets {
  LoadedSet train, tune, validation;
};

SplitSets load_split_sets(const Manifest& manifest, const SplitAssignment& splits,
                          const std::filesystem::path& manifest_path, int n_threads) {
  SplitSets out;
  out.train = load_images(manifest_path, subset_by_split(manifest, splits, Split::train).records,
                          n_threads);
  out.tune =
      load_images(manifest_path, subset_by_split(manifest, splits, Split::tune).records, n_threads);
  out.validation = load_images(
      manifest_path, subset_by_split(manifest, splits, Split::validation).records, n_threads);
  return out;
}

std::optional<double> rule_thickness(const OCTLabels& labels, ThicknessRule rule) {
  return rule == ThicknessRule::cpt ? labels.center_point_thickness_um
                                    : labels.central_subfield_thickness_um;
}

// AUC with patient-level CI for one head of a scored validation set; returns
// a json block or marks the head unavailable/degenerate.
json head_report(const std::vector<ScoredCase>& cases, const EvalOptions& opts, int head,
                 const std::filesystem::path& out_dir, std::vector<std::string>& artifacts) {
  if (cases.empty()) return json{{"available", false}, {"note", "not available"}};
  long pos = 0;
  for (const auto& c : cases) pos += c.truth;
  if (pos == 0 || pos == static_cast<long>(cases.size()))
    return json{{"available", true},
                {"degenerate", true},
                {"n", cases.size()},
                {"note", "single-class labeling"}};

  const RocCurve roc = roc_and_auc(cases);
  BootstrapResult ci;
  try {
    ci = bootstrap_ci(cases, auc_metric(), opts.bootstrap_replicates,
                      derive_seed(opts.seed, "auc_ci", static_cast<uint64_t>(head)),
                      opts.n_threads);
  } catch (const std::runtime_error&) {
    return json{{"available", true},
                {"degenerate", true},
                {"n", cases.size()},
                {"note", "degenerate resampling"}};
  }

  const std::string roc_file = std::string("roc_") + kHeadNames[head] + ".csv";
  std::ostringstream csv;
  csv << "fpr,tpr,threshold\n";
  for (const auto& p : roc.points)
    csv << fmt(p.fpr) << "," << fmt(p.tpr) << "," << fmt(p.threshold) << "\n";
  write_text(out_dir / roc_file, csv.str());
  artifacts.push_back(roc_file);

  return json{{"available", true},
              {"degenerate", false},
              {"n", cases.size()},
              {"prevalence", static_cast<double>(pos) / static_cast<double>(cases.size())},
              {"auc", metric_json(ci, static_cast<long>(cases.size()))},
              {"roc_file", roc_file}};
}

struct MetricsRow {
  std::string subject, metric;
  double value, ci_low, ci_high;
  long n;
  int replicates;
  uint64_t seed;
};

json metrics_block(const std::vector<ScoredCase>& cases, double threshold,
                   const std::string& subject, const EvalOptions& opts, uint64_t seed_tag,
                   std::vector<MetricsRow>& rows) {
  json block;
  const char* names[6] = {"sensitivity", "specificity", "ppv", "npv", "accuracy", "kappa"};
  for (uint64_t m = 0; m < 6; ++m) {
    const CaseMetric metric = threshold_metric(threshold, names[m]);
    if (!metric(cases)) {
      block[names[m]] = json{{"undefined", true}};
      continue;
    }
    try {
      const BootstrapResult r = bootstrap_ci(cases, metric, opts.bootstrap_replicates,
                                             derive_seed(seed_tag, names[m]), opts.n_threads);
      block[names[m]] = metric_json(r, static_cast<long>(cases.size()));
      rows.push_back({subject, names[m], r.point_estimate, r.ci_low, r.ci_high,
                      static_cast<long>(cases.size()), r.replicates, r.seed});
    } catch (const std::runtime_error&) {
      // flagged, never fabricated
      block[names[m]] = json{{"undefined", true}, {"reason", "degenerate resampling"}};
    }
  }
  return block;
}

}  // namespace

// -- shared plumbing (public) -------------------------------------------------

uint64_t file_hash(const std::filesystem::path& path) { return fnv1a64_file(path); }

LoadedSet load_images(const std::filesystem::path& manifest_path,
                      const std::vector<EyeImageRecord>& records, int n_threads) {
  const std::filesystem::path base = manifest_path.parent_path();
  LoadedSet set;
  set.records = records;
  set.images.resize(records.size());
  std::vector<std::string> missing(records.size());
  parallel_for(static_cast<int>(records.size()), n_threads, [&](int i) {
    const auto& rec = set.records[static_cast<size_t>(i)];
    const std::filesystem::path p = base / rec.image_path;
    if (!std::filesystem::exists(p)) {
      missing[static_cast<size_t>(i)] = rec.image_path;
      return;
    }
    set.images[static_cast<size_t>(i)] = read_ppm(p);
  });
  std::string missing_list;
  for (const auto& m : missing)
    if (!m.empty()) missing_list += (missing_list.empty() ? "" : ", ") + m;
  if (!missing_list.empty())
    throw std::runtime_error("missing image files: " + missing_list);
  return set;
}

ImageTensor prepare_image(const ImageTensor& raw, const Landmarks& landmarks,
                          const std::optional<CropSpec>& crop, int input_size) {
  const ImageTensor* src = &raw;
  ImageTensor masked;
  if (crop) {
    masked = circular_mask(raw, landmarks, *crop);
    src = &masked;
  }
  if (src->height == input_size && src->width == input_size) return *src;
  return resize_bilinear(*src, input_size, input_size);
}

std::vector<TrainExample> to_train_examples(const LoadedSet& set, ThicknessRule rule,
                                            double threshold_um,
                                            const std::optional<CropSpec>& crop, int input_size,
                                            int n_threads) {
  std::vector<TrainExample> out(set.records.size());
  parallel_for(static_cast<int>(set.records.size()), n_threads, [&](int i) {
    const auto& rec = set.records[static_cast<size_t>(i)];
    TrainExample ex;
    ex.image = prepare_image(set.images[static_cast<size_t>(i)], rec.landmarks, crop, input_size);
    ex.labels.cidme = derive_cidme(rec.labels, rule, threshold_um) ? 1.0f : 0.0f;
    if (rec.labels.srf_present) ex.labels.srf = *rec.labels.srf_present ? 1.0f : 0.0f;
    if (rec.labels.irf_present) ex.labels.irf = *rec.labels.irf_present ? 1.0f : 0.0f;
    out[static_cast<size_t>(i)] = std::move(ex);
  });
  return out;
}

std::vector<PredictionTriple> score_set(const Checkpoint& ckpt, const LoadedSet& set,
                                        const std::optional<CropSpec>& crop, int n_threads) {
  std::vector<ImageTensor> prepared(set.records.size());
  parallel_for(static_cast<int>(set.records.size()), n_threads, [&](int i) {
    prepared[static_cast<size_t>(i)] =
        prepare_image(set.images[static_cast<size_t>(i)],
                      set.records[static_cast<size_t>(i)].landmarks, crop, ckpt.net.input_size);
  });
  std::vector<const ImageTensor*> ptrs;
  ptrs.reserve(prepared.size());
  for (const auto& img : prepared) ptrs.push_back(&img);
  // evaluations use the running-average parameters
  return predict_batch(ckpt.net, ckpt.ema, ptrs, n_threads);
}

std::vector<ScoredCase> scored_cases_for_head(const LoadedSet& set,
                                              const std::vector<PredictionTriple>& preds,
                                              int head, ThicknessRule rule, double threshold_um) {
  if (preds.size() != set.records.size())
    throw std::invalid_argument("scored_cases_for_head: prediction/record size mismatch");
  std::vector<ScoredCase> out;
  for (size_t i = 0; i < set.records.size(); ++i) {
    const auto& rec = set.records[i];
    std::optional<int> truth;
    if (head == 0) {
      try {
        truth = derive_cidme(rec.labels, rule, threshold_um) ? 1 : 0;
      } catch (const std::invalid_argument&) {
        throw std::invalid_argument("record " + rec.image_path +
                                    " lacks the thickness field for the ci-DME rule");
      }
    } else if (head == 1) {
      if (rec.labels.srf_present) truth = *rec.labels.srf_present ? 1 : 0;
    } else {
      if (rec.labels.irf_present) truth = *rec.labels.irf_present ? 1 : 0;
    }
    if (!truth) continue;
    ScoredCase sc;
    sc.patient_id = rec.patient_id;
    sc.image_id = rec.image_path;
    sc.score = preds[i].head(head);
    sc.truth = *truth;
    sc.thickness_um = rule_thickness(rec.labels, rule);
    out.push_back(std::move(sc));
  }
  return out;
}

std::optional<int> grader_binary(const EyeImageRecord& rec, const std::string& grader_id,
                                 const std::string& grader_rule) {
  const GraderAssessment* g = rec.find_grader(grader_id);
  if (!g || !g->gradable) return std::nullopt;
  if (grader_rule == "judgment") return g->dme_judgment ? 1 : 0;
  const auto loc = g->hardex_loc;
  if (grader_rule == "hardex_500um") return loc == HardExudateLocation::within_500um ? 1 : 0;
  if (grader_rule == "hardex_1dd")
    return loc == HardExudateLocation::within_500um || loc == HardExudateLocation::within_1dd ? 1
                                                                                              : 0;
  if (grader_rule == "hardex_2dd")
    return loc == HardExudateLocation::within_500um || loc == HardExudateLocation::within_1dd ||
                   loc == HardExudateLocation::within_2dd
               ? 1
               : 0;
  throw std::invalid_argument("unknown grader rule '" + grader_rule + "'");
}

// -- generate / split / train --------------------------------------------------

std::vector<std::string> run_generate(const SynthConfig& config, int n_patients,
                                      const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const Manifest manifest = generate_dataset(config, n_patients, out_dir);

  std::vector<std::string> artifacts = {"manifest.csv"};
  for (const auto& rec : manifest.records) artifacts.push_back(rec.image_path);

  json run_config;
  run_config["command"] = "generate";
  run_config["synth"] = json::parse(synth_config_to_json_string(config));
  run_config["n_patients"] = n_patients;
  return finalize_run_dir(out_dir, run_config, std::move(artifacts));
}

void run_split(const std::filesystem::path& manifest_path, const SplitFractions& fractions,
               uint64_t seed, const std::filesystem::path& out_csv) {
  const Manifest manifest = load_manifest(manifest_path);
  const SplitAssignment splits = split_by_patient(manifest, fractions, seed);
  if (!out_csv.parent_path().empty()) ensure_dir(out_csv.parent_path());
  save_split_assignment(splits, out_csv);
}

std::vector<std::string> run_train(const TrainInputs& in, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const Manifest manifest = load_manifest(in.manifest);
  const SplitAssignment splits = resolve_splits(manifest, in);

  const Manifest train_manifest = subset_by_split(manifest, splits, Split::train);
  const Manifest tune_manifest = subset_by_split(manifest, splits, Split::tune);
  if (train_manifest.records.empty()) throw std::invalid_argument("run_train: empty train split");

  const LoadedSet train_raw = load_images(in.manifest, train_manifest.records, in.n_threads);
  const LoadedSet tune_raw = load_images(in.manifest, tune_manifest.records, in.n_threads);

  const std::vector<TrainExample> train_set = to_train_examples(
      train_raw, in.rule, in.threshold_um, in.crop, in.net.input_size, in.n_threads);
  const std::vector<TrainExample> tune_set = to_train_examples(
      tune_raw, in.rule, in.threshold_um, in.crop, in.net.input_size, in.n_threads);

  const TrainResult result =
      train_model(train_set, tune_set, in.net, in.train, in.augment, in.n_threads);

  Checkpoint ckpt;
  ckpt.net = in.net;
  ckpt.train = in.train;
  ckpt.step = in.train.total_steps;
  ckpt.params = result.params;
  ckpt.ema = result.ema;
  ckpt.adam = make_adam_state(result.params);  // moments are not carried across runs
  save_checkpoint(ckpt, out_dir / "model.ckpt");

  std::ostringstream log;
  log << "step,train_loss\n";
  for (size_t i = 0; i < result.train_loss.size(); ++i)
    log << (i + 1) << "," << fmt(result.train_loss[i]) << "\n";
  write_text(out_dir / "train_log.csv", log.str());

  std::ostringstream tune_log;
  tune_log << "step,tune_loss\n";
  for (const auto& [step, loss] : result.tune_loss) tune_log << step << "," << fmt(loss) << "\n";
  write_text(out_dir / "tune_log.csv", tune_log.str());

  json run_config = train_inputs_to_json(in);
  run_config["command"] = "train";
  return finalize_run_dir(out_dir, run_config,
                          {"model.ckpt", "train_log.csv", "tune_log.csv"});
}

// -- evaluate -------------------------------------------------------------------

namespace {

json evaluate_core(const EvaluateInputs& in, const std::filesystem::path& out_dir,
                   std::vector<std::string>& artifacts) {
  const EvalOptions& opts = in.opts;
  const Checkpoint ckpt = load_checkpoint(in.checkpoint);
  const Manifest manifest = load_manifest(in.manifest);

  std::vector<EyeImageRecord> records;
  if (in.splits.empty()) {
    records = manifest.records;
  } else {
    const SplitAssignment splits = load_split_assignment(in.splits);
    records = subset_by_split(manifest, splits, Split::validation).records;
  }
  if (records.empty()) throw std::invalid_argument("evaluate: no validation records");

  const LoadedSet set = load_images(in.manifest, records, opts.n_threads);
  const std::vector<PredictionTriple> preds = score_set(ckpt, set, std::nullopt, opts.n_threads);

  json report;
  report["schema_version"] = 1;
  report["command"] = in.secondary_style ? "eval-secondary" : "evaluate";
  report["seed"] = opts.seed;
  report["checkpoint_hash"] = hash_to_hex(fnv1a64_file(in.checkpoint));
  report["rule"] = rule_name(opts.rule);
  report["threshold_um"] = opts.threshold_um;
  report["n_cases"] = records.size();

  // per-head ROC/AUC
  json heads;
  std::vector<ScoredCase> cidme_cases;
  for (int h = 0; h < 3; ++h) {
    const std::vector<ScoredCase> cases =
        scored_cases_for_head(set, preds, h, opts.rule, opts.threshold_um);
    if (h == 0) cidme_cases = cases;
    heads[kHeadNames[h]] = head_report(cases, opts, h, out_dir, artifacts);
  }
  report["heads"] = heads;
  if (in.secondary_style) {
    report["note"] =
        "secondary-style validation: prevalence differs from the development population; "
        "predictive values depend on it";
  }

  // grader comparisons on the ci-DME head
  std::vector<std::string> grader_ids = opts.grader_ids;
  if (grader_ids.empty()) {
    std::set<std::string> seen;
    for (const auto& rec : set.records)
      for (const auto& g : rec.graders) seen.insert(g.grader_id);
    grader_ids.assign(seen.begin(), seen.end());
  }

  std::vector<MetricsRow> rows;

  // map image_path -> index into cidme_cases for the common-subset pairing
  std::map<std::string, size_t> case_index;
  for (size_t i = 0; i < cidme_cases.size(); ++i) case_index[cidme_cases[i].image_id] = i;

  auto compare_against = [&](const std::string& subject,
                             const std::vector<std::optional<int>>& binary) -> json {
    // grader-visible subset
    std::vector<ScoredCase> gcases;
    std::vector<size_t> common;  // indices into cidme_cases
    for (size_t i = 0; i < set.records.size(); ++i) {
      if (!binary[i]) continue;
      const auto it = case_index.find(set.records[i].image_path);
      if (it == case_index.end()) continue;
      const ScoredCase& model_case = cidme_cases[it->second];
      ScoredCase gc = model_case;
      gc.score = static_cast<double>(*binary[i]);
      gcases.push_back(gc);
      common.push_back(it->second);
    }
    if (gcases.empty()) return json{{"skipped", "no gradable cases"}};
    long pos = 0;
    for (const auto& c : gcases) pos += c.truth;
    if (pos == 0 || pos == static_cast<long>(gcases.size()))
      return json{{"skipped", "single-class truth on the gradable subset"}};

    json block;
    block["n_gradable"] = gcases.size();
    block["grader_metrics"] =
        metrics_block(gcases, 0.5, subject, opts, derive_seed(opts.seed, "grader:" + subject),
                      rows);

    const double grader_sens = *threshold_metric(0.5, "sensitivity")(gcases);
    const double grader_spec = *threshold_metric(0.5, "specificity")(gcases);

    // model and grader binaries on the common subset, in subset order
    std::vector<int> truth_common, grader_common;
    truth_common.reserve(common.size());
    for (size_t k = 0; k < common.size(); ++k) {
      truth_common.push_back(cidme_cases[common[k]].truth);
      grader_common.push_back(static_cast<int>(gcases[k].score));
    }
    auto model_common_at = [&](double threshold) {
      std::vector<int> out;
      out.reserve(common.size());
      for (const size_t idx : common)
        out.push_back(cidme_cases[idx].score >= threshold ? 1 : 0);
      return out;
    };

    // matched sensitivity: report the specificity gap
    {
      const OperatingPoint op =
          match_operating_point(cidme_cases, MatchKind::sensitivity, grader_sens);
      json matched;
      matched["target_sensitivity"] = grader_sens;
      matched["threshold"] = op.threshold;
      matched["achieved_sensitivity"] = op.achieved_sensitivity;
      matched["achieved_specificity"] = op.achieved_specificity;
      matched["target_attained"] = op.target_attained;
      matched["model_metrics"] =
          metrics_block(cidme_cases, op.threshold, "model@matched_sens:" + subject, opts,
                        derive_seed(opts.seed, "matched_sens:" + subject), rows);
      const PermutationResult perm = permutation_test(
          model_common_at(op.threshold), grader_common, truth_common,
          binary_metric("specificity"), opts.permutations,
          derive_seed(opts.seed, "perm_spec:" + subject), opts.n_threads);
      matched["specificity_permutation"] = json{{"observed_difference", perm.observed_difference},
                                                {"p_value", perm.p_value},
                                                {"permutations", perm.permutations},
                                                {"seed", perm.seed}};
      block["matched_sensitivity"] = matched;
    }

    // matched specificity: report the sensitivity gap
    {
      const OperatingPoint op =
          match_operating_point(cidme_cases, MatchKind::specificity, grader_spec);
      json matched;
      matched["target_specificity"] = grader_spec;
      matched["threshold"] = op.threshold;
      matched["achieved_sensitivity"] = op.achieved_sensitivity;
      matched["achieved_specificity"] = op.achieved_specificity;
      matched["target_attained"] = op.target_attained;
      const PermutationResult perm = permutation_test(
          model_common_at(op.threshold), grader_common, truth_common,
          binary_metric("sensitivity"), opts.permutations,
          derive_seed(opts.seed, "perm_sens:" + subject), opts.n_threads);
      matched["sensitivity_permutation"] = json{{"observed_difference", perm.observed_difference},
                                                {"p_value", perm.p_value},
                                                {"permutations", perm.permutations},
                                                {"seed", perm.seed}};
      block["matched_specificity"] = matched;
    }
    return block;
  };

  json graders_json;
  for (const auto& gid : grader_ids) {
    std::vector<std::optional<int>> binary(set.records.size());
    for (size_t i = 0; i < set.records.size(); ++i)
      binary[i] = grader_binary(set.records[i], gid, opts.grader_rule);
    graders_json[gid] = compare_against(gid, binary);
  }

  // majority fusion over the selected graders
  std::vector<std::optional<int>> majority(set.records.size());
  for (size_t i = 0; i < set.records.size(); ++i) {
    std::vector<std::optional<bool>> votes;
    for (const auto& gid : grader_ids) {
      const auto b = grader_binary(set.records[i], gid, opts.grader_rule);
      votes.push_back(b ? std::optional<bool>(*b != 0) : std::nullopt);
    }
    bool any = false;
    for (const auto& v : votes) any = any || v.has_value();
    if (any) majority[i] = majority_vote(votes) ? 1 : 0;
  }
  if (!grader_ids.empty()) graders_json["majority"] = compare_against("majority", majority);
  report["graders"] = graders_json;

  // error-thickness profile at the majority-matched operating point
  bool thickness_available = !cidme_cases.empty();
  for (const auto& c : cidme_cases) thickness_available = thickness_available && c.thickness_um;
  if (thickness_available && graders_json.contains("majority") &&
      !graders_json["majority"].contains("skipped")) {
    const double model_threshold =
        graders_json["majority"]["matched_sensitivity"]["threshold"].get<double>();
    const ErrorThicknessProfile model_prof =
        error_thickness_profile(cidme_cases, model_threshold, opts.fp_cut_um, opts.fn_cut_um);

    std::vector<ScoredCase> majority_cases;
    for (size_t i = 0; i < set.records.size(); ++i) {
      if (!majority[i]) continue;
      const auto it = case_index.find(set.records[i].image_path);
      if (it == case_index.end()) continue;
      ScoredCase gc = cidme_cases[it->second];
      gc.score = static_cast<double>(*majority[i]);
      majority_cases.push_back(gc);
    }
    const ErrorThicknessProfile grader_prof =
        error_thickness_profile(majority_cases, 0.5, opts.fp_cut_um, opts.fn_cut_um);

    auto prof_json = [](const ErrorThicknessProfile& p) {
      json j{{"fp_count", p.fp_count}, {"fn_count", p.fn_count}};
      j["fp_fraction_above"] = p.fp_fraction_above ? json(*p.fp_fraction_above) : json();
      j["fn_fraction_below"] = p.fn_fraction_below ? json(*p.fn_fraction_below) : json();
      return j;
    };
    report["thickness_profile"] =
        json{{"fp_cut_um", opts.fp_cut_um},
             {"fn_cut_um", opts.fn_cut_um},
             {"model_threshold", model_threshold},
             {"model", prof_json(model_prof)},
             {"majority_grader", prof_json(grader_prof)}};

    std::ostringstream csv;
    csv << "subject,fp_fraction_above,fn_fraction_below,fp_count,fn_count\n";
    auto prof_row = [&](const std::string& subject, const ErrorThicknessProfile& p) {
      csv << subject << ","
          << (p.fp_fraction_above ? fmt(*p.fp_fraction_above) : std::string()) << ","
          << (p.fn_fraction_below ? fmt(*p.fn_fraction_below) : std::string()) << ","
          << p.fp_count << "," << p.fn_count << "\n";
    };
    prof_row("model", model_prof);
    prof_row("majority_grader", grader_prof);
    write_text(out_dir / "thickness_profile.csv", csv.str());
    artifacts.push_back("thickness_profile.csv");
  }

  // CSV flattening of every bootstrapped metric
  std::ostringstream metrics_csv;
  metrics_csv << "subject,metric,value,ci_low,ci_high,n,replicates,seed\n";
  for (const auto& r : rows)
    metrics_csv << r.subject << "," << r.metric << "," << fmt(r.value) << "," << fmt(r.ci_low)
                << "," << fmt(r.ci_high) << "," << r.n << "," << r.replicates << "," << r.seed
                << "\n";
  write_text(out_dir / "metrics.csv", metrics_csv.str());
  artifacts.push_back("metrics.csv");

  return report;
}

}  // namespace

std::vector<std::string> run_evaluate(const EvaluateInputs& in,
                                      const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  std::vector<std::string> artifacts;
  const json report = evaluate_core(in, out_dir, artifacts);

  json run_config;
  run_config["command"] = in.secondary_style ? "eval-secondary" : "evaluate";
  run_config["checkpoint"] = in.checkpoint.string();
  run_config["checkpoint_hash"] = hash_to_hex(fnv1a64_file(in.checkpoint));
  run_config["manifest"] = in.manifest.string();
  run_config["manifest_hash"] = hash_to_hex(fnv1a64_file(in.manifest));
  if (!in.splits.empty()) {
    run_config["splits"] = in.splits.string();
    run_config["splits_hash"] = hash_to_hex(fnv1a64_file(in.splits));
  }
  run_config["opts"] = opts_to_json(in.opts);
  run_config["secondary_style"] = in.secondary_style;

  json full = report;
  full["config_hash"] = hash_to_hex(fnv1a64(run_config.dump()));
  write_text(out_dir / "report.json", full.dump(2) + "\n");
  artifacts.push_back("report.json");
  return finalize_run_dir(out_dir, run_config, std::move(artifacts));
}

// -- sweeps ---------------------------------------------------------------------

std::vector<std::string> run_sweep_fraction(const TrainInputs& in,
                                            const std::vector<double>& fractions,
                                            const EvalOptions& opts,
                                            const std::filesystem::path& out_dir) {
  if (fractions.empty()) throw std::invalid_argument("sweep-fraction: empty fraction list");
  for (size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0.0 || fractions[i] > 1.0)
      throw std::invalid_argument("sweep-fraction: fractions must be in (0,1]");
    if (i > 0 && fractions[i] <= fractions[i - 1])
      throw std::invalid_argument("sweep-fraction: fractions must be strictly ascending");
  }
  ensure_dir(out_dir);

  const Manifest manifest = load_manifest(in.manifest);
  const SplitAssignment splits = resolve_splits(manifest, in);
  const SplitSets sets = load_split_sets(manifest, splits, in.manifest, in.n_threads);
  if (sets.train.records.empty()) throw std::invalid_argument("sweep-fraction: empty train split");
  if (sets.validation.records.empty())
    throw std::invalid_argument("sweep-fraction: empty validation split");

  // nested subsampling: one shuffle, fraction f takes the first ceil(f*P)
  Manifest train_manifest;
  train_manifest.records = sets.train.records;
  std::vector<std::string> patients = distinct_patients(train_manifest);
  std::sort(patients.begin(), patients.end());
  Rng(derive_seed(in.train.seed, "subsample")).shuffle(patients);

  json points = json::array();
  std::ostringstream csv;
  csv << "fraction,head,auc,ci_low,ci_high,n_train_patients,n_train_images,n_validation\n";

  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    const double f = fractions[fi];
    const size_t n_pat = std::max<size_t>(
        1, static_cast<size_t>(std::ceil(f * static_cast<double>(patients.size()))));
    std::set<std::string> chosen(patients.begin(), patients.begin() + static_cast<long>(n_pat));

    LoadedSet sub;
    for (size_t i = 0; i < sets.train.records.size(); ++i) {
      if (!chosen.count(sets.train.records[i].patient_id)) continue;
      sub.records.push_back(sets.train.records[i]);
      sub.images.push_back(sets.train.images[i]);
    }

    const std::vector<TrainExample> train_set = to_train_examples(
        sub, in.rule, in.threshold_um, in.crop, in.net.input_size, in.n_threads);
    const std::vector<TrainExample> tune_set = to_train_examples(
        sets.tune, in.rule, in.threshold_um, in.crop, in.net.input_size, in.n_threads);
    const TrainResult trained =
        train_model(train_set, tune_set, in.net, in.train, in.augment, in.n_threads);

    Checkpoint ckpt;
    ckpt.net = in.net;
    ckpt.train = in.train;
    ckpt.step = in.train.total_steps;
    ckpt.params = trained.params;
    ckpt.ema = trained.ema;
    ckpt.adam = make_adam_state(trained.params);

    const std::vector<PredictionTriple> preds =
        score_set(ckpt, sets.validation, in.crop, opts.n_threads);

    json heads;
    for (int h = 0; h < 3; ++h) {
      const auto cases =
          scored_cases_for_head(sets.validation, preds, h, in.rule, in.threshold_um);
      if (cases.empty()) {
        heads[kHeadNames[h]] = json{{"available", false}};
        continue;
      }
      long pos = 0;
      for (const auto& c : cases) pos += c.truth;
      if (pos == 0 || pos == static_cast<long>(cases.size())) {
        heads[kHeadNames[h]] = json{{"available", true}, {"degenerate", true}};
        continue;
      }
      BootstrapResult ci;
      try {
        ci = bootstrap_ci(cases, auc_metric(), opts.bootstrap_replicates,
                          derive_seed(opts.seed, "fraction_auc", fi * 8 + static_cast<uint64_t>(h)),
                          opts.n_threads);
      } catch (const std::runtime_error&) {
        heads[kHeadNames[h]] = json{{"available", true}, {"degenerate", true}};
        continue;
      }
      heads[kHeadNames[h]] = metric_json(ci, static_cast<long>(cases.size()));
      csv << fmt(f) << "," << kHeadNames[h] << "," << fmt(ci.point_estimate) << ","
          << fmt(ci.ci_low) << "," << fmt(ci.ci_high) << "," << n_pat << ","
          << train_set.size() << "," << cases.size() << "\n";
    }

    json point;
    point["fraction"] = f;
    point["n_train_patients"] = n_pat;
    point["n_train_images"] = train_set.size();
    point["train_patients"] = std::vector<std::string>(chosen.begin(), chosen.end());
    point["heads"] = heads;
    points.push_back(point);
  }

  write_text(out_dir / "auc_vs_fraction.csv", csv.str());

  json run_config = train_inputs_to_json(in);
  run_config["command"] = "sweep-fraction";
  run_config["fractions"] = fractions;
  run_config["opts"] = opts_to_json(opts);

  json report;
  report["schema_version"] = 1;
  report["command"] = "sweep-fraction";
  report["seed"] = in.train.seed;
  report["config_hash"] = hash_to_hex(fnv1a64(run_config.dump()));
  report["points"] = points;
  write_text(out_dir / "fraction_sweep.json", report.dump(2) + "\n");

  return finalize_run_dir(out_dir, run_config,
                          {"auc_vs_fraction.csv", "fraction_sweep.json"});
}

std::vector<std::string> run_sweep_crop(const TrainInputs& in, const std::vector<CropSpec>& specs,
                                        bool mask_training, bool include_full_image_baseline,
                                        const EvalOptions& opts,
                                        const std::filesystem::path& out_dir) {
  if (specs.empty() && !include_full_image_baseline)
    throw std::invalid_argument("sweep-crop: empty crop list");
  for (const auto& s : specs)
    if (s.radius_dd <= 0) throw std::invalid_argument("sweep-crop: radius_dd must be > 0");
  ensure_dir(out_dir);

  const Manifest manifest = load_manifest(in.manifest);
  const SplitAssignment splits = resolve_splits(manifest, in);
  const SplitSets sets = load_split_sets(manifest, splits, in.manifest, in.n_threads);
  if (sets.train.records.empty()) throw std::invalid_argument("sweep-crop: empty train split");
  if (sets.validation.records.empty())
    throw std::invalid_argument("sweep-crop: empty validation split");

  std::vector<std::optional<CropSpec>> points;
  if (include_full_image_baseline) points.push_back(std::nullopt);
  for (const auto& s : specs) points.push_back(s);

  json points_json = json::array();
  std::ostringstream csv;
  csv << "center,radius_dd,head,auc,ci_low,ci_high,n_validation\n";

  for (size_t pi = 0; pi < points.size(); ++pi) {
    const std::optional<CropSpec>& crop = points[pi];

    const std::vector<TrainExample> train_set =
        to_train_examples(sets.train, in.rule, in.threshold_um,
                          mask_training ? crop : std::nullopt, in.net.input_size, in.n_threads);
    const std::vector<TrainExample> tune_set =
        to_train_examples(sets.tune, in.rule, in.threshold_um,
                          mask_training ? crop : std::nullopt, in.net.input_size, in.n_threads);
    const TrainResult trained =
        train_model(train_set, tune_set, in.net, in.train, in.augment, in.n_threads);

    Checkpoint ckpt;
    ckpt.net = in.net;
    ckpt.train = in.train;
    ckpt.step = in.train.total_steps;
    ckpt.params = trained.params;
    ckpt.ema = trained.ema;
    ckpt.adam = make_adam_state(trained.params);

    const std::vector<PredictionTriple> preds =
        score_set(ckpt, sets.validation, crop, opts.n_threads);

    const std::string center = crop ? to_string(crop->center) : "full";
    const double radius = crop ? crop->radius_dd : 0.0;

    json heads;
    for (int h = 0; h < 3; ++h) {
      const auto cases =
          scored_cases_for_head(sets.validation, preds, h, in.rule, in.threshold_um);
      if (cases.empty()) {
        heads[kHeadNames[h]] = json{{"available", false}};
        continue;
      }
      long pos = 0;
      for (const auto& c : cases) pos += c.truth;
      if (pos == 0 || pos == static_cast<long>(cases.size())) {
        heads[kHeadNames[h]] = json{{"available", true}, {"degenerate", true}};
        continue;
      }
      BootstrapResult ci;
      try {
        ci = bootstrap_ci(cases, auc_metric(), opts.bootstrap_replicates,
                          derive_seed(opts.seed, "crop_auc", pi * 8 + static_cast<uint64_t>(h)),
                          opts.n_threads);
      } catch (const std::runtime_error&) {
        heads[kHeadNames[h]] = json{{"available", true}, {"degenerate", true}};
        continue;
      }
      heads[kHeadNames[h]] = metric_json(ci, static_cast<long>(cases.size()));
      csv << center << "," << fmt(radius) << "," << kHeadNames[h] << ","
          << fmt(ci.point_estimate) << "," << fmt(ci.ci_low) << "," << fmt(ci.ci_high) << ","
          << cases.size() << "\n";
    }

    json point;
    point["center"] = center;
    point["radius_dd"] = radius;
    point["mask_training"] = mask_training;
    point["heads"] = heads;
    points_json.push_back(point);
  }

  write_text(out_dir / "auc_vs_radius.csv", csv.str());

  json run_config = train_inputs_to_json(in);
  run_config["command"] = "sweep-crop";
  json spec_json = json::array();
  for (const auto& s : specs) spec_json.push_back(crop_to_json(s));
  run_config["crops"] = spec_json;
  run_config["mask_training"] = mask_training;
  run_config["include_full_image_baseline"] = include_full_image_baseline;
  run_config["opts"] = opts_to_json(opts);

  json report;
  report["schema_version"] = 1;
  report["command"] = "sweep-crop";
  report["seed"] = in.train.seed;
  report["config_hash"] = hash_to_hex(fnv1a64(run_config.dump()));
  report["points"] = points_json;
  write_text(out_dir / "crop_sweep.json", report.dump(2) + "\n");

  return finalize_run_dir(out_dir, run_config, {"auc_vs_radius.csv", "crop_sweep.json"});
}

std::vector<std::string> run_sweep_threshold(const std::filesystem::path& checkpoint,
                                             const std::filesystem::path& manifest_path,
                                             const std::filesystem::path& splits_path,
                                             const std::vector<double>& thresholds_um,
                                             const EvalOptions& opts,
                                             const std::filesystem::path& out_dir) {
  if (thresholds_um.empty()) throw std::invalid_argument("sweep-threshold: empty threshold list");
  ensure_dir(out_dir);

  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Manifest manifest = load_manifest(manifest_path);
  std::vector<EyeImageRecord> records;
  if (splits_path.empty()) {
    records = manifest.records;
  } else {
    const SplitAssignment splits = load_split_assignment(splits_path);
    records = subset_by_split(manifest, splits, Split::validation).records;
  }
  if (records.empty()) throw std::invalid_argument("sweep-threshold: no validation records");

  const LoadedSet set = load_images(manifest_path, records, opts.n_threads);
  // one scoring pass; the sweep relabels the same scores
  const std::vector<PredictionTriple> preds = score_set(ckpt, set, std::nullopt, opts.n_threads);

  uint64_t scores_hash = kFnvOffsetBasis;
  for (const auto& p : preds) {
    const double s = p.cidme_confidence;
    uint64_t bits;
    std::memcpy(&bits, &s, 8);
    scores_hash = fnv1a64_u64(bits, scores_hash);
  }

  json points = json::array();
  std::ostringstream csv;
  csv << "threshold_um,auc,n_pos,n_neg,flagged\n";
  std::vector<std::string> artifacts;

  for (const double t : thresholds_um) {
    std::vector<ScoredCase> cases;
    long pos = 0;
    for (size_t i = 0; i < set.records.size(); ++i) {
      const auto& rec = set.records[i];
      ScoredCase sc;
      sc.patient_id = rec.patient_id;
      sc.image_id = rec.image_path;
      sc.score = preds[i].cidme_confidence;
      sc.truth = derive_cidme(rec.labels, opts.rule, t) ? 1 : 0;
      sc.thickness_um = rule_thickness(rec.labels, opts.rule);
      pos += sc.truth;
      cases.push_back(std::move(sc));
    }
    json point;
    point["threshold_um"] = t;
    point["n_pos"] = pos;
    point["n_neg"] = static_cast<long>(cases.size()) - pos;
    point["scores_hash"] = hash_to_hex(scores_hash);
    if (pos == 0 || pos == static_cast<long>(cases.size())) {
      point["flagged"] = "single-class labeling";
      csv << fmt(t) << ",,," << point["n_pos"] << "," << point["n_neg"] << ",1\n";
      points.push_back(point);
      continue;
    }
    const RocCurve roc = roc_and_auc(cases);
    point["auc"] = roc.auc;

    std::ostringstream roc_csv;
    roc_csv << "fpr,tpr,threshold\n";
    for (const auto& p : roc.points)
      roc_csv << fmt(p.fpr) << "," << fmt(p.tpr) << "," << fmt(p.threshold) << "\n";
    char name[64];
    std::snprintf(name, sizeof name, "roc_cidme_at_%g.csv", t);
    write_text(out_dir / name, roc_csv.str());
    artifacts.push_back(name);
    point["roc_file"] = name;

    csv << fmt(t) << "," << fmt(roc.auc) << "," << pos << ","
        << (static_cast<long>(cases.size()) - pos) << ",0\n";
    points.push_back(point);
  }

  write_text(out_dir / "auc_vs_threshold.csv", csv.str());
  artifacts.push_back("auc_vs_threshold.csv");

  json run_config;
  run_config["command"] = "sweep-threshold";
  run_config["checkpoint"] = checkpoint.string();
  run_config["checkpoint_hash"] = hash_to_hex(fnv1a64_file(checkpoint));
  run_config["manifest"] = manifest_path.string();
  run_config["manifest_hash"] = hash_to_hex(fnv1a64_file(manifest_path));
  if (!splits_path.empty()) {
    run_config["splits"] = splits_path.string();
    run_config["splits_hash"] = hash_to_hex(fnv1a64_file(splits_path));
  }
  run_config["thresholds_um"] = thresholds_um;
  run_config["opts"] = opts_to_json(opts);

  json report;
  report["schema_version"] = 1;
  report["command"] = "sweep-threshold";
  report["seed"] = opts.seed;
  report["config_hash"] = hash_to_hex(fnv1a64(run_config.dump()));
  report["checkpoint_hash"] = hash_to_hex(fnv1a64_file(checkpoint));
  report["scores_hash"] = hash_to_hex(scores_hash);
  report["points"] = points;
  write_text(out_dir / "threshold_sweep.json", report.dump(2) + "\n");
  artifacts.push_back("threshold_sweep.json");

  return finalize_run_dir(out_dir, run_config, std::move(artifacts));
}

// -- verify -----------------------------------------------------------------------

VerifyResult run_verify(const std::filesystem::path& report_dir) {
  std::ifstream cfg_in(report_dir / "run_config.json");
  if (!cfg_in)
    throw std::invalid_argument("verify: no run_config.json in " + report_dir.string());
  json run_config;
  cfg_in >> run_config;

  std::ifstream hash_in(report_dir / "hashes.json");
  if (!hash_in) throw std::invalid_argument("verify: no hashes.json in " + report_dir.string());
  json original_hashes;
  hash_in >> original_hashes;

  check_input_hash(run_config, "manifest", "manifest_hash");
  check_input_hash(run_config, "splits", "splits_hash");
  check_input_hash(run_config, "checkpoint", "checkpoint_hash");

  const std::filesystem::path scratch =
      std::filesystem::temp_directory_path() /
      ("maculab_verify_" + hash_to_hex(fnv1a64(report_dir.string())));
  std::filesystem::remove_all(scratch);

  const std::string command = run_config.at("command").get<std::string>();
  if (command == "generate") {
    const SynthConfig cfg = synth_config_from_json_string(run_config.at("synth").dump());
    run_generate(cfg, run_config.at("n_patients").get<int>(), scratch);
  } else if (command == "train") {
    run_train(train_inputs_from_json(run_config), scratch);
  } else if (command == "evaluate" || command == "eval-secondary") {
    EvaluateInputs in;
    in.checkpoint = run_config.at("checkpoint").get<std::string>();
    in.manifest = run_config.at("manifest").get<std::string>();
    if (run_config.contains("splits")) in.splits = run_config.at("splits").get<std::string>();
    in.opts = opts_from_json(run_config.at("opts"));
    in.secondary_style = run_config.at("secondary_style").get<bool>();
    run_evaluate(in, scratch);
  } else if (command == "sweep-fraction") {
    run_sweep_fraction(train_inputs_from_json(run_config),
                       run_config.at("fractions").get<std::vector<double>>(),
                       opts_from_json(run_config.at("opts")), scratch);
  } else if (command == "sweep-crop") {
    std::vector<CropSpec> specs;
    for (const auto& s : run_config.at("crops")) specs.push_back(crop_from_json(s));
    run_sweep_crop(train_inputs_from_json(run_config), specs,
                   run_config.at("mask_training").get<bool>(),
                   run_config.at("include_full_image_baseline").get<bool>(),
                   opts_from_json(run_config.at("opts")), scratch);
  } else if (command == "sweep-threshold") {
    run_sweep_threshold(run_config.at("checkpoint").get<std::string>(),
                        run_config.at("manifest").get<std::string>(),
                        run_config.contains("splits")
                            ? std::filesystem::path(run_config.at("splits").get<std::string>())
                            : std::filesystem::path(),
                        run_config.at("thresholds_um").get<std::vector<double>>(),
                        opts_from_json(run_config.at("opts")), scratch);
  } else {
    throw std::invalid_argument("verify: unknown command '" + command + "'");
  }

  VerifyResult result;
  for (const auto& [rel, hash] : original_hashes.items()) {
    ++result.files_checked;
    const std::string want = hash.get<std::string>();

    // the artifact as it sits on disk
    const std::filesystem::path current_file = report_dir / rel;
    if (!std::filesystem::exists(current_file)) {
      result.mismatches.push_back(rel + " (missing on disk)");
      continue;
    }
    if (hash_to_hex(fnv1a64_file(current_file)) != want) {
      result.mismatches.push_back(rel + " (changed on disk)");
      continue;
    }

    // the artifact re-derived from (config, seed)
    const std::filesystem::path rerun_file = scratch / rel;
    if (!std::filesystem::exists(rerun_file)) {
      result.mismatches.push_back(rel + " (missing in re-run)");
      continue;
    }
    if (hash_to_hex(fnv1a64_file(rerun_file)) != want)
      result.mismatches.push_back(rel + " (re-derived differently)");
  }
  std::filesystem::remove_all(scratch);
  return result;
}

}  // namespace maculab
