#include "maculab/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maculab {

namespace {

struct Hsv {
  double h, s, v;  // h in [0,1)
};

Hsv rgb_to_hsv(double r, double g, double b) {
  const double maxc = std::max(r, std::max(g, b));
  const double minc = std::min(r, std::min(g, b));
  const double delta = maxc - minc;
  Hsv out{0.0, 0.0, maxc};
  if (delta <= 0.0 || maxc <= 0.0) return out;
  out.s = delta / maxc;
  double h;
  if (maxc == r)
    h = (g - b) / delta;
  else if (maxc == g)
    h = (b - r) / delta + 2.0;
  else
    h = (r - g) / delta + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
  out.h = h;
  return out;
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
  if (hsv.s <= 0.0) {
    r = g = b = hsv.v;
    return;
  }
  const double h6 = hsv.h * 6.0;
  const int sector = std::min(5, static_cast<int>(h6));
  const double f = h6 - sector;
  const double p = hsv.v * (1.0 - hsv.s);
  const double q = hsv.v * (1.0 - hsv.s * f);
  const double t = hsv.v * (1.0 - hsv.s * (1.0 - f));
  switch (sector) {
    case 0: r = hsv.v; g = t; b = p; break;
    case 1: r = q; g = hsv.v; b = p; break;
    case 2: r = p; g = hsv.v; b = t; break;
    case 3: r = p; g = q; b = hsv.v; break;
    case 4: r = t; g = p; b = hsv.v; break;
    default: r = hsv.v; g = p; b = q; break;
  }
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& image, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1)
    throw std::invalid_argument("resize_bilinear: target dimensions must be >= 1");
  if (target_h == image.height && target_w == image.width) return image;

  ImageTensor out(target_h, target_w);
  const double scale_y = static_cast<double>(image.height) / target_h;
  const double scale_x = static_cast<double>(image.width) / target_w;
  for (int y = 0; y < target_h; ++y) {
    double sy = (y + 0.5) * scale_y - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target_w; ++x) {
      double sx = (x + 0.5) * scale_x - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - fx) + image.at(y0, x1, c) * fx;
        const double bot = image.at(y1, x0, c) * (1.0 - fx) + image.at(y1, x1, c) * fx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

ImageTensor flip_horizontal(const ImageTensor& image) {
  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < ImageTensor::kChannels; ++c)
        out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

ImageTensor flip_vertical(const ImageTensor& image) {
  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < ImageTensor::kChannels; ++c)
        out.at(y, x, c) = image.at(image.height - 1 - y, x, c);
  return out;
}

ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng) {
  if (config.saturation_lo > config.saturation_hi || config.contrast_lo > config.contrast_hi)
    throw std::invalid_argument("augment: ranges must be well-ordered");
  if (config.brightness_max_delta < 0 || config.hue_max_delta < 0)
    throw std::invalid_argument("augment: deltas must be >= 0");

  // The six variates, in chain order. Drawn unconditionally so the stream
  // position does not depend on the config.
  const double u_flip_h = rng.uniform();
  const double u_flip_v = rng.uniform();
  const double brightness_delta =
      rng.uniform(-config.brightness_max_delta, config.brightness_max_delta);
  const double saturation_f = rng.uniform(config.saturation_lo, config.saturation_hi);
  const double hue_delta = rng.uniform(-config.hue_max_delta, config.hue_max_delta);
  const double contrast_f = rng.uniform(config.contrast_lo, config.contrast_hi);

  ImageTensor out = image;
  if (config.flip_horizontal && u_flip_h < 0.5) out = flip_horizontal(out);
  if (config.flip_vertical && u_flip_v < 0.5) out = flip_vertical(out);
  if (brightness_delta != 0.0) out = imgdetail::brightness_raw(out, brightness_delta);
  if (saturation_f != 1.0) out = imgdetail::saturate_raw(out, saturation_f);
  if (hue_delta != 0.0) out = imgdetail::hue_rotate_raw(out, hue_delta);
  if (contrast_f != 1.0) out = imgdetail::contrast_raw(out, contrast_f);

  // Single clamp after the whole chain.
  for (auto& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

namespace imgdetail {

ImageTensor brightness_raw(const ImageTensor& image, double delta) {
  ImageTensor out = image;
  for (auto& v : out.values) v = static_cast<float>(v + delta);
  return out;
}

ImageTensor saturate_raw(const ImageTensor& image, double factor) {
  ImageTensor out = image;
  const size_t npix = static_cast<size_t>(out.height) * out.width;
  for (size_t i = 0; i < npix; ++i) {
    float* px = &out.values[i * 3];
    const double gray = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    for (int c = 0; c < 3; ++c) px[c] = static_cast<float>(gray + factor * (px[c] - gray));
  }
  return out;
}

ImageTensor hue_rotate_raw(const ImageTensor& image, double delta) {
  ImageTensor out = image;
  const size_t npix = static_cast<size_t>(out.height) * out.width;
  for (size_t i = 0; i < npix; ++i) {
    float* px = &out.values[i * 3];
    Hsv hsv = rgb_to_hsv(px[0], px[1], px[2]);
    hsv.h = std::fmod(hsv.h + delta + 1.0, 1.0);
    double r, g, b;
    hsv_to_rgb(hsv, r, g, b);
    px[0] = static_cast<float>(r);
    px[1] = static_cast<float>(g);
    px[2] = static_cast<float>(b);
  }
  return out;
}

ImageTensor contrast_raw(const ImageTensor& image, double factor) {
  ImageTensor out = image;
  const size_t npix = static_cast<size_t>(out.height) * out.width;
  double mean[3] = {0, 0, 0};
  for (size_t i = 0; i < npix; ++i)
    for (int c = 0; c < 3; ++c) mean[c] += out.values[i * 3 + c];
  for (double& m : mean) m /= static_cast<double>(npix);
  for (size_t i = 0; i < npix; ++i)
    for (int c = 0; c < 3; ++c)
      out.values[i * 3 + c] =
          static_cast<float>((out.values[i * 3 + c] - mean[c]) * factor + mean[c]);
  return out;
}

}  // namespace imgdetail

ImageTensor circular_mask(const ImageTensor& image, const Landmarks& landmarks,
                          const CropSpec& spec) {
  if (spec.radius_dd <= 0) throw std::invalid_argument("circular_mask: radius_dd must be > 0");
  if (landmarks.disc_diameter_px <= 0)
    throw std::invalid_argument("circular_mask: disc diameter must be > 0");

  const double cx = spec.center == CropCenter::fovea ? landmarks.fovea_x : landmarks.disc_x;
  const double cy = spec.center == CropCenter::fovea ? landmarks.fovea_y : landmarks.disc_y;
  const double radius = spec.radius_dd * landmarks.disc_diameter_px;
  const double r2 = radius * radius;

  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      if (dx * dx + dy * dy <= r2)
        for (int c = 0; c < ImageTensor::kChannels; ++c) out.at(y, x, c) = image.at(y, x, c);
    }
  }
  return out;
}

std::string to_string(CropCenter c) { return c == CropCenter::fovea ? "fovea" : "disc"; }

CropCenter crop_center_from_string(const std::string& s) {
  if (s == "fovea") return CropCenter::fovea;
  if (s == "disc") return CropCenter::disc;
  throw std::invalid_argument("unknown crop center '" + s + "'");
}

}  // namespace maculab
