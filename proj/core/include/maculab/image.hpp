#pragma once

#include <cassert>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace maculab {

/// H×W×3 raster of reals in [0, 1], row-major with interleaved channels.
/// The unit of every image operation in the project.
struct ImageTensor {
  int height = 0;
  int width = 0;
  static constexpr int kChannels = 3;
  std::vector<float> values;

  ImageTensor() = default;
  ImageTensor(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<size_t>(h) * w * kChannels, fill) {}

  float& at(int y, int x, int c) {
    assert(y >= 0 && y < height && x >= 0 && x < width && c >= 0 && c < kChannels);
    return values[(static_cast<size_t>(y) * width + x) * kChannels + c];
  }
  float at(int y, int x, int c) const {
    assert(y >= 0 && y < height && x >= 0 && x < width && c >= 0 && c < kChannels);
    return values[(static_cast<size_t>(y) * width + x) * kChannels + c];
  }

  size_t size() const { return values.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width;
  }
};

/// Binary PPM (P6, maxval 255). Values quantized with round-to-nearest on
/// write and mapped back as byte/255 on read.
ImageTensor read_ppm(const std::filesystem::path& path);
void write_ppm(const ImageTensor& image, const std::filesystem::path& path);

/// FNV-1a over the dimensions and the little-endian bit patterns of every
/// value. Bit-exact reproducibility checks hang off this.
uint64_t tensor_bits_hash(const ImageTensor& image);

/// Mean absolute per-value difference; images must share a shape.
double mean_abs_diff(const ImageTensor& a, const ImageTensor& b);

}  // namespace maculab
