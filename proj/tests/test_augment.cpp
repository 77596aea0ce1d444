#include <doctest.h>

#include <cmath>
#include <fstream>

#include "segcal/augment.hpp"
#include "support/oracles.hpp"

using namespace segcal;
using segcal::testing::TempDir;

namespace {

RgbImage random_image(Rng& rng, std::uint32_t h, std::uint32_t w) {
  RgbImage img;
  img.height = h;
  img.width = w;
  img.data.resize(static_cast<std::size_t>(h) * w * 3);
  for (auto& v : img.data) v = static_cast<float>(rng.unit());
  return img;
}

RgbImage one_pixel(float r, float g, float b) {
  RgbImage img;
  img.height = img.width = 1;
  img.data = {r, g, b};
  return img;
}

bool in_unit_range(const RgbImage& img) {
  for (float v : img.data)
    if (!(v >= 0.0f && v <= 1.0f)) return false;
  return true;
}

}  // namespace

TEST_CASE("brightness: shift, clamp, exact identity at 0") {
  const RgbImage px = one_pixel(0.5f, 0.9f, 0.1f);
  CHECK(adjust_brightness(px, 0.0f) == px);

  const RgbImage up = adjust_brightness(px, 0.25f);
  CHECK(up.data[0] == doctest::Approx(0.75).epsilon(1e-7));
  CHECK(up.data[1] == 1.0f);  // 0.9 + 0.25 clamps
}

TEST_CASE("contrast: identity at 1, constant images unchanged, hand example") {
  Rng rng(1);
  const RgbImage img = random_image(rng, 4, 4);
  CHECK(adjust_contrast(img, 1.0f) == img);

  RgbImage flat;
  flat.height = 2;
  flat.width = 2;
  flat.data.assign(12, 0.42f);
  const RgbImage adjusted = adjust_contrast(flat, 3.0f);
  for (float v : adjusted.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-6));

  // 2-pixel channel (0.2, 0.6) at factor 0.5 pivots on mean 0.4 -> (0.3, 0.5).
  RgbImage two;
  two.height = 1;
  two.width = 2;
  two.data = {0.2f, 0.2f, 0.2f, 0.6f, 0.6f, 0.6f};
  const RgbImage half = adjust_contrast(two, 0.5f);
  CHECK(half.data[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(half.data[3] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("saturation: identity at 1, gray fixed points, luma at factor 0") {
  Rng rng(2);
  const RgbImage img = random_image(rng, 3, 5);
  CHECK(adjust_saturation(img, 1.0f) == img);

  const RgbImage gray = one_pixel(0.37f, 0.37f, 0.37f);
  const RgbImage saturated = adjust_saturation(gray, 2.5f);
  for (int ch = 0; ch < 3; ++ch)
    CHECK(saturated.data[static_cast<std::size_t>(ch)] == doctest::Approx(0.37).epsilon(1e-6));

  const RgbImage red = one_pixel(1.0f, 0.0f, 0.0f);
  const RgbImage desat = adjust_saturation(red, 0.0f);
  for (int ch = 0; ch < 3; ++ch)
    CHECK(desat.data[static_cast<std::size_t>(ch)] == doctest::Approx(0.299).epsilon(1e-6));
}

TEST_CASE("hue: identity at 0, 1/3 turn maps red to green, grays unchanged") {
  Rng rng(3);
  const RgbImage img = random_image(rng, 3, 3);
  CHECK(adjust_hue(img, 0.0f) == img);

  const RgbImage red = one_pixel(1.0f, 0.0f, 0.0f);
  const RgbImage green = adjust_hue(red, 1.0f / 3.0f);
  CHECK(green.data[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(green.data[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(green.data[2] == doctest::Approx(0.0).epsilon(1e-6));

  const RgbImage gray = one_pixel(0.6f, 0.6f, 0.6f);
  CHECK(adjust_hue(gray, 0.2f) == gray);
}

TEST_CASE("hue rotation by o then -o returns to the start") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const RgbImage img = random_image(rng, 4, 4);
    const float offset = static_cast<float>(rng.range(-0.5, 0.5));
    const RgbImage back = adjust_hue(adjust_hue(img, offset), -offset);
    for (std::size_t i = 0; i < img.data.size(); ++i)
      CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-5));
  }
}

TEST_CASE("all transforms keep channels inside [0, 1]") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const RgbImage img = random_image(rng, 5, 5);
    CHECK(in_unit_range(adjust_brightness(img, static_cast<float>(rng.range(-1.0, 1.0)))));
    CHECK(in_unit_range(adjust_contrast(img, static_cast<float>(rng.range(0.1, 4.0)))));
    CHECK(in_unit_range(adjust_saturation(img, static_cast<float>(rng.range(0.0, 4.0)))));
    CHECK(in_unit_range(adjust_hue(img, static_cast<float>(rng.range(-0.5, 0.5)))));
  }
}

TEST_CASE("jitter draws in the configured ranges, in fixed order") {
  JitterConfig cfg;
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const JitterParams p = sample_jitter(cfg, rng);
    CHECK(p.brightness >= -0.25f);
    CHECK(p.brightness < 0.25f);
    CHECK(p.contrast >= 0.5f);
    CHECK(p.contrast < 1.5f);
    CHECK(p.saturation >= 1.0f);
    CHECK(p.saturation < 3.0f);
    CHECK(p.hue >= -0.25f);
    CHECK(p.hue < 0.25f);
  }

  cfg.one_sided = true;
  for (int trial = 0; trial < 200; ++trial) {
    const JitterParams p = sample_jitter(cfg, rng);
    CHECK(p.brightness >= 0.0f);
    CHECK(p.hue >= 0.0f);
  }
}

TEST_CASE("jitter is bitwise deterministic per seed") {
  Rng img_rng(7);
  const RgbImage img = random_image(img_rng, 8, 8);
  const JitterConfig cfg;

  Rng a(41), b(41), c(42);
  const RgbImage out_a = jitter(img, cfg, a);
  const RgbImage out_b = jitter(img, cfg, b);
  const RgbImage out_c = jitter(img, cfg, c);
  CHECK(out_a == out_b);
  CHECK(out_a != out_c);
  CHECK(in_unit_range(out_a));
}

TEST_CASE("zero-width ranges force the exact identity") {
  Rng img_rng(8);
  const RgbImage img = random_image(img_rng, 6, 6);
  JitterConfig cfg;
  cfg.brightness_max = 0.0;
  cfg.contrast_lo = cfg.contrast_hi = 1.0;
  cfg.saturation_lo = cfg.saturation_hi = 1.0;
  cfg.hue_max = 0.0;
  Rng rng(9);
  CHECK(jitter(img, cfg, rng) == img);
}

TEST_CASE("PPM round-trip through the quantized container") {
  TempDir dir("ppm");
  Rng rng(10);
  RgbImage img = random_image(rng, 5, 7);
  // Snap to the 8-bit grid so write/read is exact.
  for (auto& v : img.data)
    v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
  write_ppm(img, dir.file("a.ppm"));
  const RgbImage back = read_ppm(dir.file("a.ppm"));
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("PPM reader rejects other netpbm flavors") {
  TempDir dir("ppm");
  {
    std::ofstream out(dir.file("a.ppm"), std::ios::binary);
    out << "P3 1 1 255\n255 0 0\n";
  }
  CHECK_THROWS_AS(read_ppm(dir.file("a.ppm")), Error);
}
