#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segcal/rng.hpp"
#include "segcal/tensor_io.hpp"

namespace segcal {

/// H x W x 3 float image, channels in [0, 1]. Every transform clamps back
/// into that range.
struct RgbImage {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> data;  // row-major (y, x, channel)

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

  bool operator==(const RgbImage&) const = default;
};

/// Color-jitter sampling ranges. A draw picks a brightness delta in
/// [-brightness_max, brightness_max), a contrast factor in
/// [contrast_lo, contrast_hi), a saturation factor in
/// [saturation_lo, saturation_hi) and a hue offset in [-hue_max, hue_max).
/// one_sided restricts brightness/hue draws to [0, max) instead.
struct JitterConfig {
  double brightness_max = 0.25;
  double contrast_lo = 0.5;
  double contrast_hi = 1.5;
  double saturation_lo = 1.0;
  double saturation_hi = 3.0;
  double hue_max = 0.25;
  bool one_sided = false;
  std::uint64_t seed = 0;
};

/// out = clamp(in + delta), per channel. |delta| <= 1.
RgbImage adjust_brightness(const RgbImage& img, float delta);

/// out = clamp(mean_ch + (in - mean_ch) * factor), pivoting on each
/// channel's image-wide mean. factor > 0.
RgbImage adjust_contrast(const RgbImage& img, float factor);

/// Blends each pixel against its Rec.601 luma:
/// out = clamp(gray + (rgb - gray) * factor). factor >= 0.
RgbImage adjust_saturation(const RgbImage& img, float factor);

/// Rotates hue in HSV space by `offset` (fraction of the hue circle,
/// |offset| <= 0.5); saturation and value preserved up to rounding.
RgbImage adjust_hue(const RgbImage& img, float offset);

struct JitterParams {
  float brightness = 0.0f;
  float contrast = 1.0f;
  float saturation = 1.0f;
  float hue = 0.0f;
};

/// Draws the four parameters from the stream, in the fixed order
/// brightness, contrast, saturation, hue.
JitterParams sample_jitter(const JitterConfig& cfg, Rng& rng);

/// Samples parameters and applies brightness, contrast, saturation, hue in
/// that order. Deterministic given the stream state.
RgbImage jitter(const RgbImage& img, const JitterConfig& cfg, Rng& rng);

// Binary PPM (P6, maxval 255); pixel bytes map to [0, 1] via v / 255.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

}  // namespace segcal
