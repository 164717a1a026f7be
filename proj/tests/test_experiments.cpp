#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include <json.hpp>

#include "maculab/experiments.hpp"
#include "maculab/hash.hpp"
#include "test_support.hpp"

using namespace maculab;
using json = nlohmann::json;

namespace {

SynthConfig toy_synth(uint64_t seed) {
  SynthConfig cfg;
  cfg.image_size = 32;
  cfg.seed = seed;
  return cfg;
}

NetworkConfig toy_net() {
  NetworkConfig net;
  net.input_size = 32;
  net.blocks = {{6, 3, 2}, {12, 3, 1}};
  return net;
}

TrainConfig toy_train(long steps = 60) {
  TrainConfig tc;
  tc.total_steps = steps;
  tc.seed = 17;
  tc.ema_decay = 0.97;  // horizon matched to the toy step count
  return tc;
}

struct ToyWorld {
  std::filesystem::path dir, manifest, splits;
};

ToyWorld make_world(const std::string& tag, int patients = 60) {
  ToyWorld w;
  w.dir = testsupport::temp_dir(tag);
  run_generate(toy_synth(5), patients, w.dir / "data");
  w.manifest = w.dir / "data" / "manifest.csv";
  w.splits = w.dir / "splits.csv";
  run_split(w.manifest, {0.7, 0.0, 0.3}, 3, w.splits);
  return w;
}

TrainInputs toy_inputs(const ToyWorld& w, long steps = 60) {
  TrainInputs in;
  in.manifest = w.manifest;
  in.splits = w.splits;
  in.net = toy_net();
  in.train = toy_train(steps);
  in.augment = AugmentConfig::identity();
  return in;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("run_generate writes a verifiable, re-derivable dataset") {
  const auto dir = testsupport::temp_dir("exp_gen");
  const auto artifacts = run_generate(toy_synth(9), 10, dir / "data");
  CHECK(artifacts.size() == 21);  // manifest + 20 images
  CHECK(std::filesystem::exists(dir / "data" / "run_config.json"));
  CHECK(std::filesystem::exists(dir / "data" / "hashes.json"));

  const VerifyResult v = run_verify(dir / "data");
  CHECK(v.ok());
  CHECK(v.files_checked == 21);
}

TEST_CASE("verify detects a tampered artifact") {
  const auto dir = testsupport::temp_dir("exp_tamper");
  run_generate(toy_synth(9), 6, dir / "data");
  {
    std::ofstream out(dir / "data" / "manifest.csv", std::ios::app);
    out << "\n";
  }
  const VerifyResult v = run_verify(dir / "data");
  CHECK(!v.ok());
  REQUIRE(v.mismatches.size() == 1);
  CHECK(v.mismatches[0] == "manifest.csv (changed on disk)");
}

TEST_CASE("run_train is deterministic and verifiable") {
  const ToyWorld w = make_world("exp_train");
  const TrainInputs in = toy_inputs(w);

  run_train(in, w.dir / "ckpt_a");
  run_train(in, w.dir / "ckpt_b");
  CHECK(file_hash(w.dir / "ckpt_a" / "model.ckpt") == file_hash(w.dir / "ckpt_b" / "model.ckpt"));
  CHECK(file_hash(w.dir / "ckpt_a" / "train_log.csv") ==
        file_hash(w.dir / "ckpt_b" / "train_log.csv"));

  const VerifyResult v = run_verify(w.dir / "ckpt_a");
  CHECK(v.ok());
}

TEST_CASE("evaluate reports exactly three heads and re-derives identically") {
  const ToyWorld w = make_world("exp_eval");
  run_train(toy_inputs(w), w.dir / "ckpt");

  EvaluateInputs ev;
  ev.checkpoint = w.dir / "ckpt" / "model.ckpt";
  ev.manifest = w.manifest;
  ev.splits = w.splits;
  ev.opts.bootstrap_replicates = 100;
  ev.opts.permutations = 200;
  ev.opts.seed = 4;

  run_evaluate(ev, w.dir / "report_a");
  const json report = read_json(w.dir / "report_a" / "report.json");
  REQUIRE(report.contains("heads"));
  CHECK(report["heads"].size() == 3);
  CHECK(report["heads"].contains("cidme"));
  CHECK(report["heads"].contains("srf"));
  CHECK(report["heads"].contains("irf"));
  CHECK(report.contains("config_hash"));
  CHECK(report["seed"] == 4);
  for (const auto& g : {"g1", "g2", "g3", "majority"}) {
    REQUIRE(report["graders"].contains(g));
    if (!report["graders"][g].contains("skipped")) {
      CHECK(report["graders"][g].contains("matched_sensitivity"));
      CHECK(report["graders"][g]["matched_sensitivity"].contains("specificity_permutation"));
    }
  }

  // identical configs re-derive byte-identical reports
  run_evaluate(ev, w.dir / "report_b");
  CHECK(file_hash(w.dir / "report_a" / "report.json") ==
        file_hash(w.dir / "report_b" / "report.json"));
  CHECK(file_hash(w.dir / "report_a" / "metrics.csv") ==
        file_hash(w.dir / "report_b" / "metrics.csv"));

  const VerifyResult v = run_verify(w.dir / "report_a");
  CHECK(v.ok());
}

TEST_CASE("fraction sweep subsamples are nested and cover the full set at 1.0") {
  const ToyWorld w = make_world("exp_frac");
  const TrainInputs in = toy_inputs(w, 30);
  EvalOptions opts;
  opts.bootstrap_replicates = 50;
  opts.seed = 2;

  run_sweep_fraction(in, {0.25, 0.5, 1.0}, opts, w.dir / "sweep");
  const json sweep = read_json(w.dir / "sweep" / "fraction_sweep.json");
  REQUIRE(sweep["points"].size() == 3);

  std::vector<std::set<std::string>> members;
  for (const auto& point : sweep["points"]) {
    std::set<std::string> s;
    for (const auto& pid : point["train_patients"]) s.insert(pid.get<std::string>());
    members.push_back(s);
  }
  // nested under inclusion
  for (size_t i = 1; i < members.size(); ++i)
    for (const auto& pid : members[i - 1]) CHECK(members[i].count(pid) == 1);

  // the 1.0 point is the whole training split
  const Manifest manifest = load_manifest(w.manifest);
  const SplitAssignment splits = load_split_assignment(w.splits);
  const auto train_records = subset_by_split(manifest, splits, Split::train).records;
  std::set<std::string> all_train;
  for (const auto& rec : train_records) all_train.insert(rec.patient_id);
  CHECK(members.back() == all_train);
  CHECK(sweep["points"][2]["n_train_images"].get<size_t>() == train_records.size());

  SUBCASE("bad fraction lists are rejected") {
    CHECK_THROWS_AS(run_sweep_fraction(in, {}, opts, w.dir / "x"), std::invalid_argument);
    CHECK_THROWS_AS(run_sweep_fraction(in, {0.5, 0.25}, opts, w.dir / "x"),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_sweep_fraction(in, {0.0, 0.5}, opts, w.dir / "x"),
                    std::invalid_argument);
  }
}

TEST_CASE("a full-coverage mask reproduces the unmasked baseline exactly") {
  const ToyWorld w = make_world("exp_crop", 40);
  const TrainInputs in = toy_inputs(w, 30);
  EvalOptions opts;
  opts.bootstrap_replicates = 50;
  opts.seed = 2;

  // radius far beyond the frame: the mask keeps every pixel
  run_sweep_crop(in, {{CropCenter::fovea, 50.0}}, /*mask_training=*/true,
                 /*include_full_image_baseline=*/true, opts, w.dir / "sweep");
  const json sweep = read_json(w.dir / "sweep" / "crop_sweep.json");
  REQUIRE(sweep["points"].size() == 2);
  const double auc_full = sweep["points"][0]["heads"]["cidme"]["value"].get<double>();
  const double auc_masked = sweep["points"][1]["heads"]["cidme"]["value"].get<double>();
  CHECK(auc_full == auc_masked);
}

TEST_CASE("threshold sweep keeps the scores fixed and flags degenerate labelings") {
  const ToyWorld w = make_world("exp_thresh");
  run_train(toy_inputs(w), w.dir / "ckpt");

  EvalOptions opts;
  opts.seed = 6;
  // 1 um: everything is positive -> degenerate
  run_sweep_threshold(w.dir / "ckpt" / "model.ckpt", w.manifest, w.splits,
                      {1.0, 250.0, 280.0, 300.0, 320.0}, opts, w.dir / "sweep");
  const json sweep = read_json(w.dir / "sweep" / "threshold_sweep.json");
  REQUIRE(sweep["points"].size() == 5);

  CHECK(sweep["points"][0].contains("flagged"));
  CHECK(!sweep["points"][0].contains("auc"));

  const std::string scores_hash = sweep["scores_hash"].get<std::string>();
  for (const auto& point : sweep["points"])
    CHECK(point["scores_hash"].get<std::string>() == scores_hash);
  CHECK(sweep.contains("checkpoint_hash"));

  for (const double t : {250.0, 280.0, 300.0, 320.0}) {
    char name[64];
    std::snprintf(name, sizeof name, "roc_cidme_at_%g.csv", t);
    CHECK(std::filesystem::exists(w.dir / "sweep" / name));
  }

  const VerifyResult v = run_verify(w.dir / "sweep");
  CHECK(v.ok());
}

TEST_CASE("secondary-style evaluation uses cst and skips absent fluid heads") {
  const auto dir = testsupport::temp_dir("exp_secondary");

  // primary-style training data
  run_generate(toy_synth(5), 60, dir / "primary");
  run_split(dir / "primary" / "manifest.csv", {0.7, 0.0, 0.3}, 3, dir / "splits.csv");
  TrainInputs in;
  in.manifest = dir / "primary" / "manifest.csv";
  in.splits = dir / "splits.csv";
  in.net = toy_net();
  in.train = toy_train();
  in.augment = AugmentConfig::identity();
  run_train(in, dir / "ckpt");

  // secondary-style dataset: cst labels at 300, no fluid columns
  SynthConfig sec = toy_synth(77);
  sec.label_rule = ThicknessRule::cst;
  sec.label_threshold_um = 300.0;
  sec.prevalence_cidme = 0.3;  // keep both classes at toy scale
  sec.emit_fluid_labels = false;
  run_generate(sec, 40, dir / "secondary");

  EvaluateInputs ev;
  ev.checkpoint = dir / "ckpt" / "model.ckpt";
  ev.manifest = dir / "secondary" / "manifest.csv";
  ev.opts.rule = ThicknessRule::cst;
  ev.opts.threshold_um = 300.0;
  ev.opts.bootstrap_replicates = 100;
  ev.opts.permutations = 100;
  ev.secondary_style = true;
  run_evaluate(ev, dir / "report");

  const json report = read_json(dir / "report" / "report.json");
  CHECK(report["command"] == "eval-secondary");
  CHECK(report["heads"]["srf"]["available"] == false);
  CHECK(report["heads"]["irf"]["available"] == false);
  CHECK(report["heads"]["cidme"]["available"] == true);
  CHECK(report.contains("note"));
  CHECK(report["heads"]["cidme"].contains("prevalence"));

  SUBCASE("cpt rule on a cst-only manifest is an error") {
    EvaluateInputs bad = ev;
    bad.opts.rule = ThicknessRule::cpt;
    CHECK_THROWS_AS(run_evaluate(bad, dir / "bad_report"), std::invalid_argument);
  }
}

TEST_CASE("grader_binary honors the hard-exudate criterion rules") {
  EyeImageRecord rec;
  rec.graders.push_back({"g1", true, HardExudateLocation::within_1dd, true});
  rec.graders.push_back({"g2", false, HardExudateLocation::within_500um, true});

  CHECK(grader_binary(rec, "g1", "judgment") == 1);
  CHECK(grader_binary(rec, "g1", "hardex_500um") == 0);
  CHECK(grader_binary(rec, "g1", "hardex_1dd") == 1);
  CHECK(grader_binary(rec, "g1", "hardex_2dd") == 1);
  CHECK(!grader_binary(rec, "g2", "judgment").has_value());  // ungradable
  CHECK(!grader_binary(rec, "g9", "judgment").has_value());  // unknown grader
  CHECK_THROWS_AS(grader_binary(rec, "g1", "bogus"), std::invalid_argument);
}

TEST_CASE("a tune split produces periodic tune-loss records") {
  const auto dir = testsupport::temp_dir("exp_tune");
  run_generate(toy_synth(5), 40, dir / "data");
  run_split(dir / "data" / "manifest.csv", {0.6, 0.2, 0.2}, 3, dir / "splits.csv");

  TrainInputs in;
  in.manifest = dir / "data" / "manifest.csv";
  in.splits = dir / "splits.csv";
  in.net = toy_net();
  in.train = toy_train(50);
  in.augment = AugmentConfig::identity();
  run_train(in, dir / "ckpt");

  std::ifstream log(dir / "ckpt" / "tune_log.csv");
  REQUIRE(log.good());
  std::string line;
  int rows = 0;
  std::getline(log, line);
  CHECK(line == "step,tune_loss");
  while (std::getline(log, line))
    if (!line.empty()) ++rows;
  CHECK(rows >= 2);  // total_steps / 10 cadence plus the final step
}

TEST_CASE("missing image files are reported by id") {
  const ToyWorld w = make_world("exp_missing", 4);
  Manifest manifest = load_manifest(w.manifest);
  std::filesystem::remove(w.dir / "data" / manifest.records[1].image_path);
  CHECK_THROWS_WITH_AS(load_images(w.manifest, manifest.records),
                       doctest::Contains(manifest.records[1].image_path.c_str()),
                       std::runtime_error);
}
