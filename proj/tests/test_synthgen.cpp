#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "maculab/evaluation.hpp"
#include "maculab/hash.hpp"
#include "maculab/synthgen.hpp"
#include "test_support.hpp"

using namespace maculab;

namespace {

/// Mean (R - G) inside the foveal window: the pixel-space stand-in a model
/// must at least match for the task to be learnable.
double foveal_window_oracle(const ImageTensor& img, const Landmarks& lm) {
  const double radius = 0.8 * lm.disc_diameter_px;
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (std::hypot(x - lm.fovea_x, y - lm.fovea_y) > radius) continue;
      sum += static_cast<double>(img.at(y, x, 0)) - img.at(y, x, 1);
      ++n;
    }
  return n ? sum / n : 0.0;
}

}  // namespace

TEST_CASE("latents hit the configured ci-DME prevalence") {
  SynthConfig cfg;
  cfg.seed = 11;
  long positive = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const SynthLatents lat = sample_latents(cfg, i);
    CHECK(lat.thickness_um > 0);
    if (lat.thickness_um >= 250.0) ++positive;
  }
  const double fraction = static_cast<double>(positive) / n;
  CHECK(std::fabs(fraction - 0.283) < 0.02);
}

TEST_CASE("fluid marginals match the calibration targets") {
  SynthConfig cfg;
  cfg.seed = 12;
  long srf = 0, irf = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const SynthLatents lat = sample_latents(cfg, i);
    if (lat.srf) ++srf;
    if (lat.irf) ++irf;
  }
  CHECK(std::fabs(static_cast<double>(srf) / n - 0.157) < 0.02);
  CHECK(std::fabs(static_cast<double>(irf) / n - 0.455) < 0.02);
}

TEST_CASE("latents are a pure function of seed and case index") {
  SynthConfig cfg;
  cfg.seed = 77;
  const SynthLatents a = sample_latents(cfg, 123);
  const SynthLatents b = sample_latents(cfg, 123);
  CHECK(a.thickness_um == b.thickness_um);
  CHECK(a.srf == b.srf);
  CHECK(a.irf == b.irf);
  CHECK(a.decoy_exudates == b.decoy_exudates);
  CHECK(a.landmarks.fovea_x == b.landmarks.fovea_x);
  CHECK(a.landmarks.disc_x == b.landmarks.disc_x);
  CHECK(a.nuisance_seed == b.nuisance_seed);

  const SynthLatents c = sample_latents(cfg, 124);
  CHECK(a.thickness_um != c.thickness_um);
}

TEST_CASE("zero prevalence keeps every draw below the boundary") {
  SynthConfig cfg;
  cfg.prevalence_cidme = 0.0;
  cfg.prevalence_srf = 0.05;
  cfg.prevalence_irf = 0.1;
  for (uint64_t trial = 0; trial < 20; ++trial) {
    cfg.seed = 1000 + trial;
    double max_cpt = 0;
    for (int i = 0; i < 1000; ++i)
      max_cpt = std::max(max_cpt, sample_latents(cfg, i).thickness_um);
    CHECK(max_cpt < 250.0);
  }
}

TEST_CASE("landmarks stay inside the fundus circle") {
  SynthConfig cfg;
  cfg.seed = 5;
  for (int i = 0; i < 500; ++i) {
    const SynthLatents lat = sample_latents(cfg, i);
    const double c = cfg.image_size / 2.0;
    const double retina = 0.48 * cfg.image_size;
    CHECK(std::hypot(lat.landmarks.fovea_x - c, lat.landmarks.fovea_y - c) < retina);
    CHECK(std::hypot(lat.landmarks.disc_x - c, lat.landmarks.disc_y - c) < retina);
    CHECK(lat.landmarks.disc_diameter_px > 0);
  }
}

TEST_CASE("renders are deterministic and gate the lesion at the boundary") {
  SynthConfig cfg;
  cfg.seed = 21;
  SynthLatents lat = sample_latents(cfg, 3);
  lat.thickness_um = 230.0;

  const ImageTensor a = render_fundus(lat, cfg);
  const ImageTensor b = render_fundus(lat, cfg);
  CHECK(tensor_bits_hash(a) == tensor_bits_hash(b));

  // below the boundary the raster cannot depend on the exact thickness
  SynthLatents healthier = lat;
  healthier.thickness_um = 180.0;
  const ImageTensor c = render_fundus(healthier, cfg);
  CHECK(tensor_bits_hash(a) == tensor_bits_hash(c));
}

TEST_CASE("disease signal is local to the fovea") {
  SynthConfig cfg;
  cfg.seed = 31;
  SynthLatents lat = sample_latents(cfg, 8);
  lat.srf = false;
  lat.irf = false;

  SynthLatents thick = lat;
  thick.thickness_um = 400.0;
  SynthLatents thin = lat;
  thin.thickness_um = 230.0;

  const ImageTensor a = render_fundus(thick, cfg);
  const ImageTensor b = render_fundus(thin, cfg);

  const double dd = lat.landmarks.disc_diameter_px;
  double inside = 0, outside = 0;
  long n_inside = 0, n_outside = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const double d = std::hypot(x - lat.landmarks.fovea_x, y - lat.landmarks.fovea_y);
      double diff = 0;
      for (int c = 0; c < 3; ++c)
        diff += std::fabs(static_cast<double>(a.at(y, x, c)) - b.at(y, x, c));
      if (d <= dd) {
        inside += diff;
        ++n_inside;
      } else if (d > 2.5 * dd) {
        outside += diff;
        ++n_outside;
      }
    }
  CHECK(n_inside > 0);
  CHECK(n_outside > 0);
  CHECK(inside / n_inside > 0.0);
  CHECK(outside == 0.0);
}

TEST_CASE("generate_dataset writes a deterministic two-eye manifest") {
  SynthConfig cfg;
  cfg.seed = 41;
  cfg.image_size = 32;  // keep the test quick

  const auto dir1 = testsupport::temp_dir("synth");
  const Manifest m = generate_dataset(cfg, 20, dir1);
  CHECK(m.records.size() == 40);
  CHECK(distinct_patients(m).size() == 20);
  for (const auto& rec : m.records) {
    CHECK(std::filesystem::exists(dir1 / rec.image_path));
    CHECK(rec.labels.center_point_thickness_um.has_value());
    CHECK(rec.labels.srf_present.has_value());
    CHECK(rec.graders.size() == cfg.grader_noise.size());
  }

  const auto dir2 = testsupport::temp_dir("synth");
  generate_dataset(cfg, 20, dir2);
  CHECK(fnv1a64_file(dir1 / "manifest.csv") == fnv1a64_file(dir2 / "manifest.csv"));
  CHECK(fnv1a64_file(dir1 / m.records[7].image_path) ==
        fnv1a64_file(dir2 / m.records[7].image_path));
}

TEST_CASE("noise-free graders reproduce the exudate proxy exactly") {
  SynthConfig cfg;
  cfg.seed = 51;
  cfg.image_size = 32;
  cfg.grader_noise = {{0.0, 0.0}};
  cfg.grader_ungradable_rate = 0.0;

  const auto dir = testsupport::temp_dir("synth");
  const Manifest m = generate_dataset(cfg, 30, dir);
  for (size_t i = 0; i < m.records.size(); ++i) {
    const SynthLatents lat = sample_latents(cfg, i);
    REQUIRE(m.records[i].graders.size() == 1);
    CHECK(m.records[i].graders[0].dme_judgment == hard_exudate_proxy(lat, cfg));
  }
}

TEST_CASE("secondary-style generation uses cst and drops fluid labels") {
  SynthConfig cfg;
  cfg.seed = 61;
  cfg.image_size = 32;
  cfg.label_rule = ThicknessRule::cst;
  cfg.label_threshold_um = 300.0;
  cfg.prevalence_cidme = 0.078;
  cfg.emit_fluid_labels = false;

  const auto dir = testsupport::temp_dir("synth");
  const Manifest m = generate_dataset(cfg, 50, dir);
  long positive = 0;
  for (const auto& rec : m.records) {
    CHECK(!rec.labels.center_point_thickness_um.has_value());
    REQUIRE(rec.labels.central_subfield_thickness_um.has_value());
    CHECK(!rec.labels.srf_present.has_value());
    CHECK(!rec.labels.irf_present.has_value());
    if (derive_cidme(rec.labels, ThicknessRule::cst, 300.0)) ++positive;
  }
  // 100 cases at prevalence 0.078: loose binomial check
  CHECK(positive >= 2);
  CHECK(positive <= 18);
}

TEST_CASE("the foveal pixel oracle separates ci-DME") {
  SynthConfig cfg;
  cfg.seed = 71;

  std::vector<ScoredCase> cases;
  for (int i = 0; i < 1000; ++i) {
    const SynthLatents lat = sample_latents(cfg, i);
    const ImageTensor img = render_fundus(lat, cfg);
    ScoredCase sc;
    sc.patient_id = "P" + std::to_string(i);
    sc.image_id = sc.patient_id;
    sc.score = foveal_window_oracle(img, lat.landmarks);
    sc.truth = is_cidme(lat, cfg) ? 1 : 0;
    cases.push_back(sc);
  }
  const RocCurve roc = roc_and_auc(cases);
  CHECK(roc.auc > 0.9);
}

TEST_CASE("synth config round-trips through JSON") {
  SynthConfig cfg;
  cfg.seed = 99;
  cfg.prevalence_cidme = 0.3;
  cfg.grader_noise = {{0.1, 0.2}};
  cfg.label_rule = ThicknessRule::cst;
  cfg.label_threshold_um = 300;
  cfg.emit_fluid_labels = false;

  const SynthConfig back = synth_config_from_json_string(synth_config_to_json_string(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.prevalence_cidme == cfg.prevalence_cidme);
  CHECK(back.grader_noise.size() == 1);
  CHECK(back.grader_noise[0].false_alarm_rate == 0.2);
  CHECK(back.label_rule == ThicknessRule::cst);
  CHECK(back.emit_fluid_labels == false);

  CHECK_THROWS_AS(synth_config_from_json_string("{\"not_a_field\": 1}"), std::invalid_argument);
  CHECK_THROWS_AS(synth_config_from_json_string("{\"prevalence_cidme\": 1.5}"),
                  std::invalid_argument);
}

TEST_CASE("conditional fluid rates solve the marginal constraint") {
  SynthConfig cfg;
  const FluidRates r = conditional_fluid_rates(cfg);
  CHECK(cfg.prevalence_cidme * r.srf_diseased + (1 - cfg.prevalence_cidme) * r.srf_healthy ==
        doctest::Approx(cfg.prevalence_srf).epsilon(1e-12));
  CHECK(cfg.prevalence_cidme * r.irf_diseased + (1 - cfg.prevalence_cidme) * r.irf_healthy ==
        doctest::Approx(cfg.prevalence_irf).epsilon(1e-12));
}
