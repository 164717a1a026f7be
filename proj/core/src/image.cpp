#include "maculab/image.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "maculab/hash.hpp"

namespace maculab {

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

ImageTensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());

  if (next_token(in) != "P6")
    throw std::runtime_error("not a binary PPM (P6): " + path.string());
  const int width = std::stoi(next_token(in));
  const int height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (width <= 0 || height <= 0)
    throw std::runtime_error("invalid PPM dimensions: " + path.string());
  if (maxval != 255)
    throw std::runtime_error("unsupported PPM maxval (expected 255): " + path.string());

  ImageTensor img(height, width);
  std::vector<unsigned char> raw(img.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw std::runtime_error("truncated PPM payload: " + path.string());
  for (size_t i = 0; i < raw.size(); ++i)
    img.values[i] = static_cast<float>(raw[i]) / 255.0f;
  return img;
}

void write_ppm(const ImageTensor& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const long q = std::lround(static_cast<double>(image.values[i]) * 255.0);
    raw[i] = static_cast<unsigned char>(q < 0 ? 0 : (q > 255 ? 255 : q));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("failed writing image payload: " + path.string());
}

uint64_t tensor_bits_hash(const ImageTensor& image) {
  uint64_t h = fnv1a64_u64(static_cast<uint64_t>(image.height));
  h = fnv1a64_u64(static_cast<uint64_t>(image.width), h);
  for (const float v : image.values) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    h = fnv1a64(b, 4, h);
  }
  return h;
}

double mean_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mean_abs_diff: shape mismatch");
  if (a.values.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i)
    sum += std::fabs(static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]));
  return sum / static_cast<double>(a.values.size());
}

}  // namespace maculab
