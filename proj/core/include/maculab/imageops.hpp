#pragma once

#include "maculab/dataset.hpp"
#include "maculab/image.hpp"
#include "maculab/rng.hpp"

namespace maculab {

/// Augmentation chain parameters. Defaults are the training recipe constants;
/// identity() disables everything for golden and no-op tests.
struct AugmentConfig {
  bool flip_horizontal = true;
  bool flip_vertical = true;
  double brightness_max_delta = 0.114752799273;
  double saturation_lo = 0.559727311134;
  double saturation_hi = 1.27488446236;
  double hue_max_delta = 0.0251487996429;
  double contrast_lo = 0.999680697918;
  double contrast_hi = 1.77048242092;

  static AugmentConfig identity() {
    AugmentConfig c;
    c.flip_horizontal = false;
    c.flip_vertical = false;
    c.brightness_max_delta = 0;
    c.saturation_lo = c.saturation_hi = 1;
    c.hue_max_delta = 0;
    c.contrast_lo = c.contrast_hi = 1;
    return c;
  }
};

enum class CropCenter { fovea, disc };

/// Circular crop in multiples of the optic disc diameter.
struct CropSpec {
  CropCenter center = CropCenter::fovea;
  double radius_dd = 1.0;
};

/// Bilinear interpolation with half-pixel-center alignment. Output stays in
/// [0, 1] (convex combinations of clamped samples).
ImageTensor resize_bilinear(const ImageTensor& image, int target_h, int target_w);

ImageTensor flip_horizontal(const ImageTensor& image);
ImageTensor flip_vertical(const ImageTensor& image);

/// Applies, in order: random flips, brightness shift, saturation blend
/// against Rec.601 luma, hue rotation in HSV with wraparound, per-channel
/// mean-anchored contrast, then one final clamp to [0, 1]. Exactly six
/// variates are drawn from rng in a fixed order regardless of which stages
/// are enabled, so output is a pure function of (image, config, seed).
ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng);

/// Keeps pixels within radius_dd * disc_diameter of the chosen landmark
/// (pixel-center coordinates, inclusive boundary); zeroes everything else.
ImageTensor circular_mask(const ImageTensor& image, const Landmarks& landmarks,
                          const CropSpec& spec);

std::string to_string(CropCenter c);
CropCenter crop_center_from_string(const std::string& s);

namespace imgdetail {

// Building blocks of the augment chain. None of these clamp; augment applies
// one clamp after the full chain so intermediate stages lose no information.
ImageTensor brightness_raw(const ImageTensor& image, double delta);
ImageTensor saturate_raw(const ImageTensor& image, double factor);   // luma blend
ImageTensor hue_rotate_raw(const ImageTensor& image, double delta);  // HSV, wraps mod 1
ImageTensor contrast_raw(const ImageTensor& image, double factor);   // per-channel mean anchor

}  // namespace imgdetail

}  // namespace maculab
