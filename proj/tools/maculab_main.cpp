// maculab: train and evaluate a fundus-to-OCT macular edema screening model
// on deterministic synthetic data, with the full statistical report suite.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maculab/experiments.hpp"
#include "maculab/strings.hpp"

using namespace maculab;

namespace {

std::vector<double> parse_double_list(const std::string& joined, const char* flag) {
  std::vector<double> out;
  for (const auto& tok : split(joined, ',')) {
    const auto v = parse_double(tok);
    if (!v) throw CLI::ValidationError(std::string(flag) + ": not a number: '" + tok + "'");
    out.push_back(*v);
  }
  return out;
}

SplitFractions parse_fractions(const std::string& joined) {
  const auto v = parse_double_list(joined, "--fractions");
  if (v.size() != 3)
    throw CLI::ValidationError("fractions: expected train,tune,validation");
  return {v[0], v[1], v[2]};
}

std::vector<std::string> parse_grader_list(const std::string& joined) {
  if (joined == "all" || joined.empty()) return {};
  std::vector<std::string> out;
  for (const auto& tok : split(joined, ','))
    if (!trim(tok).empty()) out.push_back(trim(tok));
  return out;
}

/// Config-file support: keys of the JSON mirror the long flag names; values
/// given on the command line win. Implemented by injecting the config pairs
/// as tokens ahead of the user's tokens and letting take-last resolve.
std::vector<std::string> inject_config_tokens(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  const std::string sub = args[0];
  if (sub == "generate") return args;  // generate's --config is the synth config itself

  std::filesystem::path config_path;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw CLI::ValidationError("cannot open --config file: " + config_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("bad JSON in --config file: " + std::string(e.what()));
  }

  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string())
      text = value.get<std::string>();
    else if (value.is_boolean())
      text = value.get<bool>() ? "true" : "false";
    else
      text = value.dump();
    injected.push_back("--" + key + "=" + text);
  }

  std::vector<std::string> out;
  out.push_back(sub);
  for (auto& t : injected) out.push_back(std::move(t));
  for (size_t i = 1; i < args.size(); ++i) out.push_back(args[i]);
  return out;
}

CLI::Option* last_wins(CLI::Option* opt) {
  opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  return opt;
}

struct EvalFlagSet {
  std::string rule = "cpt";
  double cut = 250.0;
  std::string graders = "all";
  std::string grader_rule = "judgment";
  int replicates = 2000;
  int permutations = 2000;
  uint64_t seed = 0;
  int threads = 0;

  void attach(CLI::App* cmd, bool with_graders = true, bool with_rule_cut = true,
              bool with_threads = true) {
    if (with_rule_cut) {
      last_wins(cmd->add_option("--rule", rule, "Label rule: cpt or cst")
                    ->check(CLI::IsMember({"cpt", "cst"})));
      last_wins(cmd->add_option("--cut", cut, "ci-DME thickness cut-off in micrometers"));
    }
    if (with_graders) {
      last_wins(cmd->add_option("--graders", graders, "Comma list of grader ids, or 'all'"));
      last_wins(cmd->add_option("--grader-rule", grader_rule,
                                "judgment | hardex_500um | hardex_1dd | hardex_2dd"));
    }
    last_wins(cmd->add_option("--replicates", replicates, "Bootstrap replicates"));
    last_wins(cmd->add_option("--permutations", permutations, "Permutation count"));
    last_wins(cmd->add_option("--seed", seed, "Statistics seed"));
    if (with_threads)
      last_wins(cmd->add_option("--threads", threads, "Worker threads (0 = auto)"));
  }

  EvalOptions to_options(ThicknessRule fallback_rule) const {
    EvalOptions o;
    o.rule = rule == "cst" ? ThicknessRule::cst : fallback_rule;
    o.threshold_um = cut;
    o.grader_ids = parse_grader_list(graders);
    o.grader_rule = grader_rule;
    o.bootstrap_replicates = replicates;
    o.permutations = permutations;
    o.seed = seed;
    o.n_threads = threads;
    return o;
  }
};

struct TrainFlagSet {
  std::string manifest, splits;
  std::string net_json, train_json;
  std::string fractions = "0.8,0.1,0.1";
  uint64_t split_seed = 0;
  std::string rule = "cpt";
  double cut = 250.0;
  bool no_augment = false;
  std::string crop_center;
  double crop_radius = 0.0;
  int threads = 0;

  void attach(CLI::App* cmd) {
    last_wins(cmd->add_option("--manifest", manifest, "Manifest CSV")->required());
    last_wins(cmd->add_option("--splits", splits, "Split assignment CSV (omit to split inline)"));
    last_wins(cmd->add_option("--net", net_json, "Network config JSON (omit for defaults)"));
    last_wins(cmd->add_option("--train", train_json, "Train config JSON (omit for defaults)"));
    last_wins(cmd->add_option("--split-fractions", fractions,
                              "train,tune,validation fractions for inline splitting"));
    last_wins(cmd->add_option("--split-seed", split_seed, "Seed for inline splitting"));
    last_wins(cmd->add_option("--rule", rule, "Label rule: cpt or cst")
                  ->check(CLI::IsMember({"cpt", "cst"})));
    last_wins(cmd->add_option("--cut", cut, "ci-DME thickness cut-off in micrometers"));
    cmd->add_flag("--no-augment", no_augment, "Disable the augmentation chain");
    last_wins(cmd->add_option("--crop-center", crop_center, "fovea or disc (optional mask)"));
    last_wins(cmd->add_option("--crop-radius", crop_radius, "Mask radius in disc diameters"));
    last_wins(cmd->add_option("--threads", threads, "Worker threads (0 = auto)"));
  }

  TrainInputs to_inputs() const {
    TrainInputs in;
    in.manifest = manifest;
    in.splits = splits;
    in.fractions = parse_fractions(fractions);
    in.split_seed = split_seed;
    if (!net_json.empty()) in.net = load_network_config(net_json);
    if (!train_json.empty()) in.train = load_train_config(train_json);
    in.augment = no_augment ? AugmentConfig::identity() : AugmentConfig{};
    in.rule = rule == "cst" ? ThicknessRule::cst : ThicknessRule::cpt;
    in.threshold_um = cut;
    if (!crop_center.empty()) {
      if (crop_radius <= 0)
        throw CLI::ValidationError("--crop-radius must be > 0 when --crop-center is set");
      in.crop = CropSpec{crop_center_from_string(crop_center), crop_radius};
    }
    in.n_threads = threads;
    return in;
  }
};

void report_written(const std::filesystem::path& out_dir, size_t n) {
  std::cout << "wrote " << n << " artifacts to " << out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fundus-to-OCT macular edema screening laboratory"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  std::string gen_config;
  int gen_patients = 100;
  std::string gen_out;
  bool gen_has_seed = false;
  uint64_t gen_seed = 0;
  last_wins(generate->add_option("--config", gen_config, "SynthConfig JSON file"));
  last_wins(generate->add_option("--patients", gen_patients, "Number of patients (2 eyes each)")
                ->required());
  last_wins(generate->add_option("--out", gen_out, "Output directory")->required());
  auto* gen_seed_opt = last_wins(generate->add_option("--seed", gen_seed, "Override config seed"));

  // split
  auto* split_cmd = app.add_subcommand("split", "Assign patients to train/tune/validation");
  std::string split_manifest, split_fractions = "0.8,0.1,0.1", split_out, split_config;
  uint64_t split_seed = 0;
  last_wins(split_cmd->add_option("--manifest", split_manifest, "Manifest CSV")->required());
  last_wins(split_cmd->add_option("--fractions", split_fractions, "train,tune,validation"));
  last_wins(split_cmd->add_option("--seed", split_seed, "Shuffle seed"));
  last_wins(split_cmd->add_option("--out", split_out, "Output splits CSV")->required());
  last_wins(split_cmd->add_option("--config", split_config, "JSON config file (flags win)"));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  TrainFlagSet train_flags;
  std::string train_out, train_config_file;
  train_flags.attach(train_cmd);
  last_wins(train_cmd->add_option("--out", train_out, "Output directory")->required());
  last_wins(train_cmd->add_option("--config", train_config_file, "JSON config file (flags win)"));

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a validation split and report");
  std::string eval_ckpt, eval_manifest, eval_splits, eval_out, eval_config;
  EvalFlagSet eval_flags;
  last_wins(eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required());
  last_wins(eval_cmd->add_option("--manifest", eval_manifest, "Manifest CSV")->required());
  last_wins(eval_cmd->add_option("--splits", eval_splits, "Split CSV (omit to use all records)"));
  eval_flags.attach(eval_cmd);
  last_wins(eval_cmd->add_option("--out", eval_out, "Output report directory")->required());
  last_wins(eval_cmd->add_option("--config", eval_config, "JSON config file (flags win)"));

  // sweep-fraction
  auto* swf_cmd = app.add_subcommand("sweep-fraction", "Data-titration sweep");
  TrainFlagSet swf_train;
  std::string swf_fractions = "0.125,0.25,0.5,1.0", swf_out, swf_config;
  EvalFlagSet swf_eval;
  swf_train.attach(swf_cmd);
  last_wins(swf_cmd->add_option("--fractions", swf_fractions,
                                "Ascending training-set fractions to sweep"));
  swf_eval.attach(swf_cmd, /*with_graders=*/false, /*with_rule_cut=*/false,
                  /*with_threads=*/false);
  last_wins(swf_cmd->add_option("--out", swf_out, "Output directory")->required());
  last_wins(swf_cmd->add_option("--config", swf_config, "JSON config file (flags win)"));

  // sweep-crop
  auto* swc_cmd = app.add_subcommand("sweep-crop", "Landmark-centered crop sweep");
  TrainFlagSet swc_train;
  std::string swc_centers = "fovea,disc", swc_radii = "0.05,0.125,0.25,0.5,1.0,2.5";
  std::string swc_out, swc_config;
  bool swc_eval_only_mask = false, swc_no_baseline = false;
  EvalFlagSet swc_eval;
  swc_train.attach(swc_cmd);
  last_wins(swc_cmd->add_option("--centers", swc_centers, "Comma list: fovea,disc"));
  last_wins(swc_cmd->add_option("--radii", swc_radii, "Comma list of disc-diameter radii"));
  swc_cmd->add_flag("--eval-only-masking", swc_eval_only_mask,
                    "Mask only evaluation images (default masks training too)");
  swc_cmd->add_flag("--no-baseline", swc_no_baseline, "Skip the unmasked baseline point");
  swc_eval.attach(swc_cmd, /*with_graders=*/false, /*with_rule_cut=*/false,
                  /*with_threads=*/false);
  last_wins(swc_cmd->add_option("--out", swc_out, "Output directory")->required());
  last_wins(swc_cmd->add_option("--config", swc_config, "JSON config file (flags win)"));

  // sweep-threshold
  auto* swt_cmd = app.add_subcommand("sweep-threshold",
                                     "Re-label ground truth at several cut-offs, no retraining");
  std::string swt_ckpt, swt_manifest, swt_splits, swt_thresholds = "250,280,300,320";
  std::string swt_out, swt_config;
  EvalFlagSet swt_eval;
  last_wins(swt_cmd->add_option("--ckpt", swt_ckpt, "Checkpoint file")->required());
  last_wins(swt_cmd->add_option("--manifest", swt_manifest, "Manifest CSV")->required());
  last_wins(swt_cmd->add_option("--splits", swt_splits, "Split CSV (omit to use all records)"));
  last_wins(swt_cmd->add_option("--thresholds", swt_thresholds, "Comma list of cut-offs (um)"));
  swt_eval.attach(swt_cmd, /*with_graders=*/false);
  last_wins(swt_cmd->add_option("--out", swt_out, "Output directory")->required());
  last_wins(swt_cmd->add_option("--config", swt_config, "JSON config file (flags win)"));

  // eval-secondary
  auto* sec_cmd = app.add_subcommand("eval-secondary",
                                     "Apply a trained model to a secondary-style dataset");
  std::string sec_ckpt, sec_manifest, sec_out, sec_config;
  EvalFlagSet sec_flags;
  sec_flags.rule = "cst";
  sec_flags.cut = 300.0;
  last_wins(sec_cmd->add_option("--ckpt", sec_ckpt, "Checkpoint file")->required());
  last_wins(sec_cmd->add_option("--manifest", sec_manifest, "Secondary manifest CSV")->required());
  sec_flags.attach(sec_cmd);
  last_wins(sec_cmd->add_option("--out", sec_out, "Output report directory")->required());
  last_wins(sec_cmd->add_option("--config", sec_config, "JSON config file (flags win)"));

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Re-derive a report and compare hashes");
  std::string verify_report;
  last_wins(verify_cmd->add_option("--report", verify_report, "Report directory")->required());

  try {
    std::vector<std::string> args = inject_config_tokens(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(generate)) {
      SynthConfig cfg;
      if (!gen_config.empty()) cfg = load_synth_config(gen_config);
      if (gen_seed_opt->count() > 0 || gen_has_seed) cfg.seed = gen_seed;
      const auto artifacts = run_generate(cfg, gen_patients, gen_out);
      report_written(gen_out, artifacts.size());
    } else if (app.got_subcommand(split_cmd)) {
      run_split(split_manifest, parse_fractions(split_fractions), split_seed, split_out);
      std::cout << "wrote " << split_out << "\n";
    } else if (app.got_subcommand(train_cmd)) {
      const auto artifacts = run_train(train_flags.to_inputs(), train_out);
      report_written(train_out, artifacts.size());
    } else if (app.got_subcommand(eval_cmd)) {
      EvaluateInputs in;
      in.checkpoint = eval_ckpt;
      in.manifest = eval_manifest;
      in.splits = eval_splits;
      in.opts = eval_flags.to_options(ThicknessRule::cpt);
      const auto artifacts = run_evaluate(in, eval_out);
      report_written(eval_out, artifacts.size());
    } else if (app.got_subcommand(swf_cmd)) {
      EvalOptions swf_opts = swf_eval.to_options(ThicknessRule::cpt);
      swf_opts.rule = swf_train.rule == "cst" ? ThicknessRule::cst : ThicknessRule::cpt;
      swf_opts.threshold_um = swf_train.cut;
      swf_opts.n_threads = swf_train.threads;
      const auto artifacts =
          run_sweep_fraction(swf_train.to_inputs(),
                             parse_double_list(swf_fractions, "--fractions"), swf_opts,
                             swf_out);
      report_written(swf_out, artifacts.size());
    } else if (app.got_subcommand(swc_cmd)) {
      std::vector<CropSpec> specs;
      for (const auto& center : split(swc_centers, ','))
        for (const double r : parse_double_list(swc_radii, "--radii"))
          specs.push_back({crop_center_from_string(trim(center)), r});
      EvalOptions swc_opts = swc_eval.to_options(ThicknessRule::cpt);
      swc_opts.rule = swc_train.rule == "cst" ? ThicknessRule::cst : ThicknessRule::cpt;
      swc_opts.threshold_um = swc_train.cut;
      swc_opts.n_threads = swc_train.threads;
      const auto artifacts =
          run_sweep_crop(swc_train.to_inputs(), specs, /*mask_training=*/!swc_eval_only_mask,
                         /*include_full_image_baseline=*/!swc_no_baseline, swc_opts, swc_out);
      report_written(swc_out, artifacts.size());
    } else if (app.got_subcommand(swt_cmd)) {
      const auto artifacts = run_sweep_threshold(
          swt_ckpt, swt_manifest, swt_splits, parse_double_list(swt_thresholds, "--thresholds"),
          swt_eval.to_options(ThicknessRule::cpt), swt_out);
      report_written(swt_out, artifacts.size());
    } else if (app.got_subcommand(sec_cmd)) {
      EvaluateInputs in;
      in.checkpoint = sec_ckpt;
      in.manifest = sec_manifest;
      in.opts = sec_flags.to_options(ThicknessRule::cst);
      in.secondary_style = true;
      const auto artifacts = run_evaluate(in, sec_out);
      report_written(sec_out, artifacts.size());
    } else if (app.got_subcommand(verify_cmd)) {
      const VerifyResult r = run_verify(verify_report);
      for (const auto& m : r.mismatches) std::cout << "MISMATCH " << m << "\n";
      std::cout << (r.ok() ? "verify: ok, " : "verify: FAILED, ") << r.files_checked
                << " files checked, " << r.mismatches.size() << " mismatches\n";
      if (!r.ok()) return 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
