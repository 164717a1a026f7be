#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "maculab/hash.hpp"
#include "maculab/image.hpp"
#include "maculab/imageops.hpp"
#include "maculab/strings.hpp"
#include "test_support.hpp"

using namespace maculab;

namespace {

ImageTensor gradient_image(int h, int w) {
  ImageTensor img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = static_cast<float>(0.1 + 0.8 * x / std::max(1, w - 1));
      img.at(y, x, 1) = static_cast<float>(0.1 + 0.7 * y / std::max(1, h - 1));
      img.at(y, x, 2) = static_cast<float>(0.2 + 0.5 * (x + y) / std::max(1, w + h - 2));
    }
  return img;
}

Landmarks toy_landmarks() { return {32, 32, 50, 30, 10}; }

}  // namespace

TEST_CASE("resize_bilinear identity and constants") {
  const ImageTensor img = gradient_image(16, 12);
  const ImageTensor same = resize_bilinear(img, 16, 12);
  CHECK(same.values == img.values);

  ImageTensor constant(9, 7, 0.4f);
  for (const int target : {1, 3, 16, 33}) {
    const ImageTensor r = resize_bilinear(constant, target, target);
    for (const float v : r.values) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
  }
}

TEST_CASE("resize_bilinear half-pixel centers on the 2x2 block") {
  // per channel: {0,0} over {1,1} collapses to 0.5 at the 1x1 target
  ImageTensor img(2, 2);
  for (int c = 0; c < 3; ++c) {
    img.at(0, 0, c) = 0;
    img.at(0, 1, c) = 0;
    img.at(1, 0, c) = 1;
    img.at(1, 1, c) = 1;
  }
  const ImageTensor r = resize_bilinear(img, 1, 1);
  for (int c = 0; c < 3; ++c) CHECK(r.at(0, 0, c) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("augment with the identity config is a no-op") {
  const ImageTensor img = gradient_image(20, 20);
  Rng rng(123);
  const ImageTensor out = augment(img, AugmentConfig::identity(), rng);
  CHECK(out.values == img.values);
}

TEST_CASE("flips are involutions") {
  const ImageTensor img = gradient_image(11, 17);
  CHECK(flip_horizontal(flip_horizontal(img)).values == img.values);
  CHECK(flip_vertical(flip_vertical(img)).values == img.values);
}

TEST_CASE("saturation factor zero collapses to the per-pixel luma") {
  const ImageTensor img = gradient_image(8, 8);
  AugmentConfig cfg = AugmentConfig::identity();
  cfg.saturation_lo = cfg.saturation_hi = 0.0;  // force the factor
  Rng rng(5);
  const ImageTensor out = augment(img, cfg, rng);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double gray =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      for (int c = 0; c < 3; ++c)
        CHECK(out.at(y, x, c) == doctest::Approx(gray).epsilon(1e-6));
    }
}

TEST_CASE("hue rotation wraps around and inverts") {
  const ImageTensor img = gradient_image(10, 10);
  for (const double delta : {0.02, 0.013, 0.4}) {
    const ImageTensor there = imgdetail::hue_rotate_raw(img, delta);
    const ImageTensor back = imgdetail::hue_rotate_raw(there, -delta);
    double worst = 0.0;
    for (size_t i = 0; i < img.values.size(); ++i)
      worst = std::max(worst, std::fabs(static_cast<double>(back.values[i]) - img.values[i]));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("augment is a pure function of image, config, seed") {
  const ImageTensor img = gradient_image(24, 24);
  const AugmentConfig cfg;  // full training chain
  Rng rng1(999), rng2(999);
  const ImageTensor a = augment(img, cfg, rng1);
  const ImageTensor b = augment(img, cfg, rng2);
  CHECK(tensor_bits_hash(a) == tensor_bits_hash(b));
  CHECK(a.values == b.values);

  Rng rng3(1000);
  const ImageTensor c = augment(img, cfg, rng3);
  CHECK(tensor_bits_hash(a) != tensor_bits_hash(c));
}

TEST_CASE("augment output stays in range") {
  ImageTensor img = gradient_image(16, 16);
  img.at(0, 0, 0) = 1.0f;
  img.at(0, 0, 1) = 0.0f;
  const AugmentConfig cfg;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const ImageTensor out = augment(img, cfg, rng);
    for (const float v : out.values) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("augment golden: checked-in input reproduces the checked-in output") {
  const std::filesystem::path data_dir = MACULAB_TEST_DATA_DIR;
  const ImageTensor input = read_ppm(data_dir / "augment_input.ppm");

  Rng rng(20240607);
  const ImageTensor out = augment(input, AugmentConfig{}, rng);

  std::ifstream hash_in(data_dir / "augment_golden_hash.txt");
  REQUIRE(hash_in.good());
  std::string expected_hash;
  hash_in >> expected_hash;
  CHECK(hash_to_hex(tensor_bits_hash(out)) == expected_hash);

  // quantized pair must match byte-for-byte as well
  const auto dir = testsupport::temp_dir("imageops");
  write_ppm(out, dir / "augment_output.ppm");
  std::ifstream got(dir / "augment_output.ppm", std::ios::binary);
  std::ifstream want(data_dir / "augment_output.ppm", std::ios::binary);
  REQUIRE(want.good());
  const std::string got_bytes((std::istreambuf_iterator<char>(got)),
                              std::istreambuf_iterator<char>());
  const std::string want_bytes((std::istreambuf_iterator<char>(want)),
                               std::istreambuf_iterator<char>());
  CHECK(got_bytes == want_bytes);
}

TEST_CASE("circular_mask keeps the disk and zeroes the rest") {
  const ImageTensor img = gradient_image(64, 64);
  const Landmarks lm = toy_landmarks();

  SUBCASE("full coverage leaves the image unchanged") {
    const ImageTensor out = circular_mask(img, lm, {CropCenter::fovea, 20.0});
    CHECK(out.values == img.values);
  }

  SUBCASE("radius is radius_dd times the disc diameter") {
    const CropSpec spec{CropCenter::fovea, 1.0};  // disc diameter 10 -> radius 10
    const ImageTensor out = circular_mask(img, lm, spec);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double d = std::hypot(x - lm.fovea_x, y - lm.fovea_y);
        for (int c = 0; c < 3; ++c) {
          if (d <= 10.0)
            CHECK(out.at(y, x, c) == img.at(y, x, c));
          else
            CHECK(out.at(y, x, c) == 0.0f);
        }
      }
  }

  SUBCASE("disc-centered masking uses the disc landmark") {
    const ImageTensor out = circular_mask(img, lm, {CropCenter::disc, 0.5});
    CHECK(out.at(30, 50, 0) == img.at(30, 50, 0));  // disc center kept
    CHECK(out.at(32, 32, 0) == 0.0f);               // fovea excluded
  }

  SUBCASE("idempotent and monotone in the radius") {
    const CropSpec r1{CropCenter::fovea, 0.8};
    const CropSpec r2{CropCenter::fovea, 1.7};
    const ImageTensor once = circular_mask(img, lm, r1);
    const ImageTensor twice = circular_mask(once, lm, r1);
    CHECK(once.values == twice.values);

    const ImageTensor nested = circular_mask(circular_mask(img, lm, r2), lm, r1);
    CHECK(nested.values == once.values);  // mask(r1) o mask(r2) == mask(min)
  }
}
