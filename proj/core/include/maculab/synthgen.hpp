#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maculab/dataset.hpp"
#include "maculab/image.hpp"

namespace maculab {

struct GraderNoise {
  double miss_rate = 0;         // P(judge negative | exudate proxy positive)
  double false_alarm_rate = 0;  // P(judge positive | exudate proxy negative)
};

/// Generator parameters. Prevalence defaults are the calibration targets for
/// a specialty-clinic population; the thickness mixture and texture gains are
/// calibration choices that make the task learnable at desk scale.
struct SynthConfig {
  int image_size = 64;
  double prevalence_cidme = 0.283;
  double prevalence_srf = 0.157;
  double prevalence_irf = 0.455;
  double cpt_healthy_mean = 230, cpt_healthy_sd = 20;
  double cpt_diseased_mean = 350, cpt_diseased_sd = 80;
  double lesion_gain = 0.0022;  // pixel amplitude per micrometer of excess thickness
  double decoy_exudate_rate = 0.4;
  std::vector<GraderNoise> grader_noise = {{0.15, 0.25}, {0.14, 0.26}, {0.18, 0.22}};
  double grader_ungradable_rate = 0.03;
  uint64_t seed = 0;

  // Label semantics: cpt/250 for the primary-style dataset, cst/300 for the
  // secondary-style one. The fluid columns are absent in the secondary style.
  ThicknessRule label_rule = ThicknessRule::cpt;
  double label_threshold_um = 250.0;
  bool emit_fluid_labels = true;

  // Fluid rates conditioned on ci-DME status. The healthy-side rates are
  // solved from the marginal targets, see conditional_fluid_rates().
  double srf_rate_given_cidme = 0.40;
  double irf_rate_given_cidme = 0.85;

  // Healthy-component mean shift per fluid type present, so fluid-bearing
  // negatives sit closer to the label boundary.
  double fluid_thickness_shift_um = 15.0;

  double pixel_noise_sd = 0.045;

  void validate() const;  // throws std::invalid_argument
};

/// Ground truth behind one synthetic case. Everything downstream (raster,
/// labels, grader columns) is a pure function of this plus the config.
struct SynthLatents {
  double thickness_um = 0;
  bool srf = false;
  bool irf = false;
  bool decoy_exudates = false;
  Landmarks landmarks;
  uint64_t nuisance_seed = 0;
};

/// Healthy/diseased fluid rates (q_healthy, q_diseased) per fluid type,
/// solved so the marginal prevalence targets hold under prevalence_cidme.
struct FluidRates {
  double srf_healthy = 0, srf_diseased = 0;
  double irf_healthy = 0, irf_diseased = 0;
};
FluidRates conditional_fluid_rates(const SynthConfig& config);

bool is_cidme(const SynthLatents& latents, const SynthConfig& config);

/// Presence of hard-exudate-looking dots in the render: every ci-DME case
/// plus decoy cases. Deliberately imperfect as a screening proxy.
bool hard_exudate_proxy(const SynthLatents& latents, const SynthConfig& config);

/// Fully determined by (config.seed, case_index). Thickness comes from a
/// two-component truncated-normal mixture whose components respect the label
/// boundary, so the configured prevalence is exactly the positive rate.
SynthLatents sample_latents(const SynthConfig& config, uint64_t case_index);

/// Procedural fundus-style raster: retina disc, optic disc, vessel arcs,
/// foveal pigmentation, plus disease textures (thickness lesion, SRF dome,
/// IRF blotches, exudate dots) that all live within 1 disc diameter of the
/// fovea. Deterministic in (latents, config).
ImageTensor render_fundus(const SynthLatents& latents, const SynthConfig& config);

/// Two eyes per patient, one PPM per eye under out_dir/images/, plus
/// out_dir/manifest.csv. Returns the manifest (image paths relative to
/// out_dir).
Manifest generate_dataset(const SynthConfig& config, int n_patients,
                          const std::filesystem::path& out_dir);

SynthConfig load_synth_config(const std::filesystem::path& path);
void save_synth_config(const SynthConfig& config, const std::filesystem::path& path);
SynthConfig synth_config_from_json_string(const std::string& json_text);
std::string synth_config_to_json_string(const SynthConfig& config);

}  // namespace maculab
