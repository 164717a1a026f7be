#include "maculab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "maculab/rng.hpp"
#include "maculab/strings.hpp"

namespace maculab {

namespace {

using json = nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Normal truncated to [lo, hi) by rejection; falls back to clamping after
/// an iteration cap so a misconfigured range cannot hang generation.
double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.normal(mean, sd);
    if (v >= lo && v < hi) return v;
  }
  return std::clamp(mean, lo, std::nexttoward(hi, lo));
}

void add_pixel(ImageTensor& img, int x, int y, double dr, double dg, double db) {
  if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
  img.at(y, x, 0) += static_cast<float>(dr);
  img.at(y, x, 1) += static_cast<float>(dg);
  img.at(y, x, 2) += static_cast<float>(db);
}

/// Adds delta * falloff over a disk; falloff is 1 in the core and fades
/// linearly over the outer 30% of the radius.
void stamp_disk(ImageTensor& img, double cx, double cy, double radius, double dr, double dg,
                double db) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  const double core = 0.7 * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d > radius) continue;
      const double w = d <= core ? 1.0 : (radius - d) / (radius - core);
      add_pixel(img, x, y, dr * w, dg * w, db * w);
    }
  }
}

/// Adds delta * exp(-r^2 / 2 sigma^2), truncated at cutoff.
void stamp_gaussian(ImageTensor& img, double cx, double cy, double sigma, double cutoff,
                    double dr, double dg, double db) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - cutoff)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + cutoff)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - cutoff)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + cutoff)));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double r2 = dx * dx + dy * dy;
      if (r2 > cutoff * cutoff) continue;
      const double w = std::exp(-r2 * inv);
      add_pixel(img, x, y, dr * w, dg * w, db * w);
    }
  }
}

void stamp_ellipse(ImageTensor& img, double cx, double cy, double ax, double ay, double dr,
                   double dg, double db) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - ax - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + ax + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ay - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ay + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double nx = (x - cx) / ax, ny = (y - cy) / ay;
      const double q = nx * nx + ny * ny;
      if (q > 1.0) continue;
      const double w = q <= 0.6 ? 1.0 : (1.0 - q) / 0.4;
      add_pixel(img, x, y, dr * w, dg * w, db * w);
    }
  }
}

struct Vec2 {
  double x, y;
};

}  // namespace

void SynthConfig::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (image_size < 32) throw std::invalid_argument("SynthConfig: image_size must be >= 32");
  if (!in01(prevalence_cidme) || !in01(prevalence_srf) || !in01(prevalence_irf))
    throw std::invalid_argument("SynthConfig: prevalences must be in [0,1]");
  if (cpt_healthy_sd <= 0 || cpt_diseased_sd <= 0)
    throw std::invalid_argument("SynthConfig: thickness sds must be > 0");
  if (lesion_gain < 0) throw std::invalid_argument("SynthConfig: lesion_gain must be >= 0");
  if (!in01(decoy_exudate_rate))
    throw std::invalid_argument("SynthConfig: decoy_exudate_rate must be in [0,1]");
  if (!in01(grader_ungradable_rate))
    throw std::invalid_argument("SynthConfig: grader_ungradable_rate must be in [0,1]");
  for (const auto& g : grader_noise)
    if (!in01(g.miss_rate) || !in01(g.false_alarm_rate))
      throw std::invalid_argument("SynthConfig: grader noise rates must be in [0,1]");
  if (!in01(srf_rate_given_cidme) || !in01(irf_rate_given_cidme))
    throw std::invalid_argument("SynthConfig: conditional fluid rates must be in [0,1]");
  if (label_threshold_um <= 0)
    throw std::invalid_argument("SynthConfig: label_threshold_um must be > 0");
  if (pixel_noise_sd < 0) throw std::invalid_argument("SynthConfig: pixel_noise_sd must be >= 0");
}

FluidRates conditional_fluid_rates(const SynthConfig& config) {
  const double p = config.prevalence_cidme;
  auto solve_healthy = [&](double marginal, double diseased) {
    if (p >= 1.0) return 0.0;
    return clamp01((marginal - p * diseased) / (1.0 - p));
  };
  FluidRates r;
  r.srf_diseased = config.srf_rate_given_cidme;
  r.irf_diseased = config.irf_rate_given_cidme;
  r.srf_healthy = solve_healthy(config.prevalence_srf, r.srf_diseased);
  r.irf_healthy = solve_healthy(config.prevalence_irf, r.irf_diseased);
  return r;
}

bool is_cidme(const SynthLatents& latents, const SynthConfig& config) {
  return latents.thickness_um >= config.label_threshold_um;
}

bool hard_exudate_proxy(const SynthLatents& latents, const SynthConfig& config) {
  return is_cidme(latents, config) || latents.decoy_exudates;
}

SynthLatents sample_latents(const SynthConfig& config, uint64_t case_index) {
  config.validate();
  Rng rng = Rng(config.seed).derive("latents", case_index);
  const FluidRates rates = conditional_fluid_rates(config);

  SynthLatents lat;
  const bool diseased = rng.bernoulli(config.prevalence_cidme);
  lat.srf = rng.bernoulli(diseased ? rates.srf_diseased : rates.srf_healthy);
  lat.irf = rng.bernoulli(diseased ? rates.irf_diseased : rates.irf_healthy);

  const double boundary = config.label_threshold_um;
  if (diseased) {
    lat.thickness_um =
        truncated_normal(rng, config.cpt_diseased_mean, config.cpt_diseased_sd, boundary, 1e9);
  } else {
    // Fluid-bearing negatives sit closer to the boundary.
    const double shift =
        config.fluid_thickness_shift_um * ((lat.srf ? 1 : 0) + (lat.irf ? 1 : 0));
    lat.thickness_um = truncated_normal(rng, config.cpt_healthy_mean + shift,
                                        config.cpt_healthy_sd, 1.0, boundary);
  }

  lat.decoy_exudates = rng.bernoulli(config.decoy_exudate_rate);

  const double s = config.image_size;
  const double dd = (s / 6.0) * (1.0 + rng.uniform(-0.08, 0.08));
  const double fx = s / 2.0 + rng.uniform(-s / 32.0, s / 32.0);
  const double fy = s / 2.0 + rng.uniform(-s / 32.0, s / 32.0);
  const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
  lat.landmarks.fovea_x = fx;
  lat.landmarks.fovea_y = fy;
  lat.landmarks.disc_x = fx + side * 2.2 * dd;
  lat.landmarks.disc_y = fy + rng.uniform(-0.3, 0.3) * dd;
  lat.landmarks.disc_diameter_px = dd;

  lat.nuisance_seed = derive_seed(config.seed, "nuisance", case_index);
  return lat;
}

ImageTensor render_fundus(const SynthLatents& latents, const SynthConfig& config) {
  config.validate();
  const int s = config.image_size;
  const double cx = s / 2.0, cy = s / 2.0;
  const double retina_r = 0.48 * s;
  const double dd = latents.landmarks.disc_diameter_px;
  const double fx = latents.landmarks.fovea_x, fy = latents.landmarks.fovea_y;

  ImageTensor img(s, s, 0.0f);

  // Retina disc with a radial vignette.
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      if (r > retina_r) continue;
      const double v = 1.0 - 0.30 * (r / retina_r) * (r / retina_r);
      img.at(y, x, 0) = static_cast<float>(0.80 * v);
      img.at(y, x, 1) = static_cast<float>(0.42 * v);
      img.at(y, x, 2) = static_cast<float>(0.16 * v);
    }
  }

  // Optic disc: pale ellipse plus a brighter cup.
  const double dx = latents.landmarks.disc_x, dy = latents.landmarks.disc_y;
  stamp_ellipse(img, dx, dy, 0.45 * dd, 0.55 * dd, 0.15, 0.40, 0.38);
  stamp_ellipse(img, dx, dy, 0.20 * dd, 0.24 * dd, 0.08, 0.12, 0.10);

  // Vessel arcades from the disc, steering clear of the foveal avascular zone.
  {
    Rng vessels = Rng(latents.nuisance_seed).derive("vessels");
    const int n_arcs = 4 + static_cast<int>(vessels.uniform_int(3));
    for (int a = 0; a < n_arcs; ++a) {
      const double up = (a % 2 == 0) ? -1.0 : 1.0;
      const double end_angle = up * vessels.uniform(0.35, 1.15) * kPi / 2.0 +
                               (dx > cx ? kPi : 0.0);  // arc back over the retina
      const double end_len = vessels.uniform(0.55, 0.95) * retina_r;
      const Vec2 p0{dx, dy};
      const Vec2 p2{cx + std::cos(end_angle) * end_len, cy + std::sin(end_angle) * end_len};
      const Vec2 mid{(p0.x + p2.x) / 2.0, (p0.y + p2.y) / 2.0};
      const Vec2 ctrl{mid.x + vessels.uniform(-0.25, 0.25) * s,
                      mid.y + up * vessels.uniform(0.05, 0.3) * s};
      const double width = vessels.uniform(0.035, 0.06) * dd + 0.6;
      const int steps = 4 * s;
      for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const double omt = 1.0 - t;
        const double px = omt * omt * p0.x + 2 * omt * t * ctrl.x + t * t * p2.x;
        const double py = omt * omt * p0.y + 2 * omt * t * ctrl.y + t * t * p2.y;
        if (std::hypot(px - fx, py - fy) < 0.8 * dd) continue;  // avascular zone
        if (std::hypot(px - cx, py - cy) > retina_r) continue;
        const double taper = 1.0 - 0.5 * t;
        stamp_disk(img, px, py, width * taper, -0.35, -0.30, -0.08);
      }
    }
  }

  // Foveal pigmentation (anatomy, not disease).
  stamp_gaussian(img, fx, fy, 0.5 * dd, 1.5 * dd, -0.10, -0.07, -0.03);

  // Thickness lesion: reddish center-peaked perturbation gated at the label
  // boundary, support within 1 disc diameter of the fovea.
  const double excess = std::max(0.0, latents.thickness_um - config.label_threshold_um);
  const double amp = config.lesion_gain * excess;
  if (amp > 0.0) {
    stamp_gaussian(img, fx, fy, 0.35 * dd, 1.0 * dd, amp, -0.8 * amp, -0.3 * amp);
    // sharp central peak so even sub-disc-diameter crops carry the signal
    stamp_gaussian(img, fx, fy, 0.12 * dd, 0.4 * dd, 0.9 * amp, -0.72 * amp, -0.27 * amp);
  }

  // SRF: smooth bluish-bright dome near the fovea.
  if (latents.srf) {
    Rng srf = Rng(latents.nuisance_seed).derive("srf");
    const double ang = srf.uniform(0.0, 2.0 * kPi);
    const double off = srf.uniform(0.0, 0.25) * dd;
    stamp_gaussian(img, fx + std::cos(ang) * off, fy + std::sin(ang) * off, 0.30 * dd, 0.7 * dd,
                   0.08, 0.12, 0.26);
  }

  // IRF: dark cystoid blotches within 0.7 disc diameters.
  if (latents.irf) {
    Rng irf = Rng(latents.nuisance_seed).derive("irf");
    const int n = 3 + static_cast<int>(irf.uniform_int(4));
    for (int i = 0; i < n; ++i) {
      const double ang = irf.uniform(0.0, 2.0 * kPi);
      const double r = irf.uniform(0.1, 0.7) * dd;
      const double radius = irf.uniform(0.10, 0.16) * dd;
      stamp_disk(img, fx + std::cos(ang) * r, fy + std::sin(ang) * r, radius, -0.12, -0.28,
                 -0.34);
    }
  }

  // Hard-exudate-looking dots: rendered for every proxy-positive case, decoys
  // included, in an annulus around the fovea.
  if (hard_exudate_proxy(latents, config)) {
    Rng exu = Rng(latents.nuisance_seed).derive("exudates");
    const int n = 3 + static_cast<int>(exu.uniform_int(5));
    for (int i = 0; i < n; ++i) {
      const double ang = exu.uniform(0.0, 2.0 * kPi);
      const double r = exu.uniform(0.35, 0.85) * dd;
      const double radius = exu.uniform(0.05, 0.10) * dd + 0.5;
      stamp_disk(img, fx + std::cos(ang) * r, fy + std::sin(ang) * r, radius, 0.12, 0.26, 0.14);
    }
  }

  // Sensor noise over the full frame.
  if (config.pixel_noise_sd > 0) {
    Rng noise = Rng(latents.nuisance_seed).derive("noise");
    for (auto& v : img.values)
      v = static_cast<float>(v + noise.normal(0.0, config.pixel_noise_sd));
  }

  for (auto& v : img.values) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

Manifest generate_dataset(const SynthConfig& config, int n_patients,
                          const std::filesystem::path& out_dir) {
  config.validate();
  if (n_patients < 1) throw std::invalid_argument("generate_dataset: n_patients must be >= 1");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + out_dir.string());

  int id_width = 1;
  for (int v = n_patients; v >= 10 && id_width < 9; v /= 10) ++id_width;

  Manifest manifest;
  manifest.dataset_id = out_dir.filename().string();

  for (int p = 0; p < n_patients; ++p) {
    char pid[32];
    std::snprintf(pid, sizeof pid, "P%0*d", id_width, p + 1);
    for (int e = 0; e < 2; ++e) {
      const uint64_t case_index = static_cast<uint64_t>(p) * 2 + e;
      const SynthLatents lat = sample_latents(config, case_index);
      const ImageTensor img = render_fundus(lat, config);

      EyeImageRecord rec;
      rec.patient_id = pid;
      rec.eye = e == 0 ? Eye::left : Eye::right;
      rec.image_path = std::string("images/") + pid + (e == 0 ? "_L.ppm" : "_R.ppm");
      write_ppm(img, out_dir / rec.image_path);

      if (config.label_rule == ThicknessRule::cpt)
        rec.labels.center_point_thickness_um = lat.thickness_um;
      else
        rec.labels.central_subfield_thickness_um = lat.thickness_um;
      if (config.emit_fluid_labels) {
        rec.labels.srf_present = lat.srf;
        rec.labels.irf_present = lat.irf;
      }
      rec.landmarks = lat.landmarks;

      const bool proxy = hard_exudate_proxy(lat, config);
      Rng grader_rng = Rng(derive_seed(config.seed, "grader", case_index));
      for (size_t k = 0; k < config.grader_noise.size(); ++k) {
        const auto& noise = config.grader_noise[k];
        GraderAssessment ga;
        ga.grader_id = "g" + std::to_string(k + 1);
        ga.gradable = !grader_rng.bernoulli(config.grader_ungradable_rate);
        ga.dme_judgment =
            proxy ? !grader_rng.bernoulli(noise.miss_rate) : grader_rng.bernoulli(noise.false_alarm_rate);
        if (ga.dme_judgment) {
          const double u = grader_rng.uniform();
          ga.hardex_loc = u < 0.3   ? HardExudateLocation::within_500um
                          : u < 0.8 ? HardExudateLocation::within_1dd
                                    : HardExudateLocation::within_2dd;
        } else {
          ga.hardex_loc = HardExudateLocation::none;
        }
        rec.graders.push_back(std::move(ga));
      }
      manifest.records.push_back(std::move(rec));
    }
  }

  save_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

namespace {

void config_from_json(const json& j, SynthConfig& c) {
  static const std::set<std::string> known = {
      "image_size",       "prevalence_cidme",     "prevalence_srf",
      "prevalence_irf",   "cpt_healthy_mean",     "cpt_healthy_sd",
      "cpt_diseased_mean", "cpt_diseased_sd",     "lesion_gain",
      "decoy_exudate_rate", "grader_noise",       "grader_ungradable_rate",
      "seed",             "label_rule",           "label_threshold_um",
      "emit_fluid_labels", "srf_rate_given_cidme", "irf_rate_given_cidme",
      "fluid_thickness_shift_um", "pixel_noise_sd"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw std::invalid_argument("SynthConfig: unknown field '" + key + "'");

  c.image_size = j.value("image_size", c.image_size);
  c.prevalence_cidme = j.value("prevalence_cidme", c.prevalence_cidme);
  c.prevalence_srf = j.value("prevalence_srf", c.prevalence_srf);
  c.prevalence_irf = j.value("prevalence_irf", c.prevalence_irf);
  c.cpt_healthy_mean = j.value("cpt_healthy_mean", c.cpt_healthy_mean);
  c.cpt_healthy_sd = j.value("cpt_healthy_sd", c.cpt_healthy_sd);
  c.cpt_diseased_mean = j.value("cpt_diseased_mean", c.cpt_diseased_mean);
  c.cpt_diseased_sd = j.value("cpt_diseased_sd", c.cpt_diseased_sd);
  c.lesion_gain = j.value("lesion_gain", c.lesion_gain);
  c.decoy_exudate_rate = j.value("decoy_exudate_rate", c.decoy_exudate_rate);
  c.grader_ungradable_rate = j.value("grader_ungradable_rate", c.grader_ungradable_rate);
  c.seed = j.value("seed", c.seed);
  if (j.contains("label_rule")) {
    const std::string rule = j.at("label_rule").get<std::string>();
    if (rule == "cpt")
      c.label_rule = ThicknessRule::cpt;
    else if (rule == "cst")
      c.label_rule = ThicknessRule::cst;
    else
      throw std::invalid_argument("SynthConfig: label_rule must be cpt or cst");
  }
  c.label_threshold_um = j.value("label_threshold_um", c.label_threshold_um);
  c.emit_fluid_labels = j.value("emit_fluid_labels", c.emit_fluid_labels);
  c.srf_rate_given_cidme = j.value("srf_rate_given_cidme", c.srf_rate_given_cidme);
  c.irf_rate_given_cidme = j.value("irf_rate_given_cidme", c.irf_rate_given_cidme);
  c.fluid_thickness_shift_um = j.value("fluid_thickness_shift_um", c.fluid_thickness_shift_um);
  c.pixel_noise_sd = j.value("pixel_noise_sd", c.pixel_noise_sd);
  if (j.contains("grader_noise")) {
    c.grader_noise.clear();
    for (const auto& g : j.at("grader_noise"))
      c.grader_noise.push_back(
          {g.at("miss_rate").get<double>(), g.at("false_alarm_rate").get<double>()});
  }
  c.validate();
}

json config_to_json(const SynthConfig& c) {
  json j;
  j["image_size"] = c.image_size;
  j["prevalence_cidme"] = c.prevalence_cidme;
  j["prevalence_srf"] = c.prevalence_srf;
  j["prevalence_irf"] = c.prevalence_irf;
  j["cpt_healthy_mean"] = c.cpt_healthy_mean;
  j["cpt_healthy_sd"] = c.cpt_healthy_sd;
  j["cpt_diseased_mean"] = c.cpt_diseased_mean;
  j["cpt_diseased_sd"] = c.cpt_diseased_sd;
  j["lesion_gain"] = c.lesion_gain;
  j["decoy_exudate_rate"] = c.decoy_exudate_rate;
  json graders = json::array();
  for (const auto& g : c.grader_noise)
    graders.push_back({{"miss_rate", g.miss_rate}, {"false_alarm_rate", g.false_alarm_rate}});
  j["grader_noise"] = graders;
  j["grader_ungradable_rate"] = c.grader_ungradable_rate;
  j["seed"] = c.seed;
  j["label_rule"] = c.label_rule == ThicknessRule::cpt ? "cpt" : "cst";
  j["label_threshold_um"] = c.label_threshold_um;
  j["emit_fluid_labels"] = c.emit_fluid_labels;
  j["srf_rate_given_cidme"] = c.srf_rate_given_cidme;
  j["irf_rate_given_cidme"] = c.irf_rate_given_cidme;
  j["fluid_thickness_shift_um"] = c.fluid_thickness_shift_um;
  j["pixel_noise_sd"] = c.pixel_noise_sd;
  return j;
}

}  // namespace

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open synth config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad JSON in " + path.string() + ": " + e.what());
  }
  SynthConfig c;
  config_from_json(j, c);
  return c;
}

void save_synth_config(const SynthConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write synth config: " + path.string());
  out << config_to_json(config).dump(2) << "\n";
}

SynthConfig synth_config_from_json_string(const std::string& json_text) {
  SynthConfig c;
  config_from_json(json::parse(json_text), c);
  return c;
}

std::string synth_config_to_json_string(const SynthConfig& config) {
  return config_to_json(config).dump(2);
}

}  // namespace maculab
