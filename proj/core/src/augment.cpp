#include "segcal/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace segcal {

namespace {

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

void check_image(const RgbImage& img) {
  if (img.data.size() != img.pixel_count() * 3)
    fail(errc::shape_mismatch, "image buffer length does not match dimensions");
}

struct Hsv {
  float h, s, v;  // h in [0, 1)
};

Hsv rgb_to_hsv(float r, float g, float b) {
  const float maxc = std::max({r, g, b});
  const float minc = std::min({r, g, b});
  const float delta = maxc - minc;
  Hsv out{0.0f, 0.0f, maxc};
  if (delta <= 0.0f || maxc <= 0.0f) return out;  // gray: hue 0 by convention
  out.s = delta / maxc;
  float h;
  if (maxc == r)
    h = (g - b) / delta;
  else if (maxc == g)
    h = 2.0f + (b - r) / delta;
  else
    h = 4.0f + (r - g) / delta;
  h /= 6.0f;
  h -= std::floor(h);
  out.h = h;
  return out;
}

void hsv_to_rgb(const Hsv& c, float& r, float& g, float& b) {
  if (c.s <= 0.0f) {
    r = g = b = c.v;
    return;
  }
  const float h6 = c.h * 6.0f;
  const int sector = static_cast<int>(h6) % 6;
  const float f = h6 - std::floor(h6);
  const float p = c.v * (1.0f - c.s);
  const float q = c.v * (1.0f - c.s * f);
  const float t = c.v * (1.0f - c.s * (1.0f - f));
  switch (sector) {
    case 0: r = c.v; g = t; b = p; break;
    case 1: r = q; g = c.v; b = p; break;
    case 2: r = p; g = c.v; b = t; break;
    case 3: r = p; g = q; b = c.v; break;
    case 4: r = t; g = p; b = c.v; break;
    default: r = c.v; g = p; b = q; break;
  }
}

}  // namespace

RgbImage adjust_brightness(const RgbImage& img, float delta) {
  check_image(img);
  if (std::abs(delta) > 1.0f)
    fail(errc::invalid_argument, "brightness delta outside [-1, 1]");
  if (delta == 0.0f) return img;
  RgbImage out = img;
  for (float& v : out.data) v = clamp01(v + delta);
  return out;
}

RgbImage adjust_contrast(const RgbImage& img, float factor) {
  check_image(img);
  if (!(factor > 0.0f)) fail(errc::invalid_argument, "contrast factor must be positive");
  if (factor == 1.0f) return img;
  double mean[3] = {0.0, 0.0, 0.0};
  const std::size_t pixels = img.pixel_count();
  for (std::size_t i = 0; i < pixels; ++i)
    for (int ch = 0; ch < 3; ++ch) mean[ch] += static_cast<double>(img.data[i * 3 + ch]);
  for (double& m : mean) m /= pixels == 0 ? 1.0 : static_cast<double>(pixels);

  RgbImage out = img;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const float m = static_cast<float>(mean[ch]);
      out.data[i * 3 + ch] = clamp01(m + (img.data[i * 3 + ch] - m) * factor);
    }
  }
  return out;
}

RgbImage adjust_saturation(const RgbImage& img, float factor) {
  check_image(img);
  if (factor < 0.0f) fail(errc::invalid_argument, "saturation factor must be non-negative");
  if (factor == 1.0f) return img;
  RgbImage out = img;
  const std::size_t pixels = img.pixel_count();
  for (std::size_t i = 0; i < pixels; ++i) {
    const float r = img.data[i * 3];
    const float g = img.data[i * 3 + 1];
    const float b = img.data[i * 3 + 2];
    const float gray = 0.299f * r + 0.587f * g + 0.114f * b;
    out.data[i * 3] = clamp01(gray + (r - gray) * factor);
    out.data[i * 3 + 1] = clamp01(gray + (g - gray) * factor);
    out.data[i * 3 + 2] = clamp01(gray + (b - gray) * factor);
  }
  return out;
}

RgbImage adjust_hue(const RgbImage& img, float offset) {
  check_image(img);
  if (std::abs(offset) > 0.5f)
    fail(errc::invalid_argument, "hue offset outside [-0.5, 0.5]");
  if (offset == 0.0f) return img;
  RgbImage out = img;
  const std::size_t pixels = img.pixel_count();
  for (std::size_t i = 0; i < pixels; ++i) {
    Hsv c = rgb_to_hsv(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);
    c.h += offset;
    c.h -= std::floor(c.h);
    float r, g, b;
    hsv_to_rgb(c, r, g, b);
    out.data[i * 3] = clamp01(r);
    out.data[i * 3 + 1] = clamp01(g);
    out.data[i * 3 + 2] = clamp01(b);
  }
  return out;
}

JitterParams sample_jitter(const JitterConfig& cfg, Rng& rng) {
  if (cfg.brightness_max < 0.0 || cfg.hue_max < 0.0 || cfg.contrast_lo <= 0.0 ||
      cfg.contrast_hi < cfg.contrast_lo || cfg.saturation_lo < 0.0 ||
      cfg.saturation_hi < cfg.saturation_lo)
    fail(errc::invalid_argument, "invalid jitter ranges");
  JitterParams p;
  const double b_lo = cfg.one_sided ? 0.0 : -cfg.brightness_max;
  const double h_lo = cfg.one_sided ? 0.0 : -cfg.hue_max;
  p.brightness = static_cast<float>(rng.range(b_lo, cfg.brightness_max));
  p.contrast = static_cast<float>(rng.range(cfg.contrast_lo, cfg.contrast_hi));
  p.saturation = static_cast<float>(rng.range(cfg.saturation_lo, cfg.saturation_hi));
  p.hue = static_cast<float>(rng.range(h_lo, cfg.hue_max));
  return p;
}

RgbImage jitter(const RgbImage& img, const JitterConfig& cfg, Rng& rng) {
  const JitterParams p = sample_jitter(cfg, rng);
  RgbImage out = adjust_brightness(img, p.brightness);
  out = adjust_contrast(out, p.contrast);
  out = adjust_saturation(out, p.saturation);
  out = adjust_hue(out, p.hue);
  return out;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) fail(errc::missing_file, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_failure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = std::move(buf).str();

  if (bytes.size() < 2 || bytes[0] != 'P') fail(errc::bad_magic, path.string() + ": not a PPM file");
  if (bytes[1] != '6')
    fail(errc::unsupported_format, path.string() + ": only binary (P6) PPM is supported");

  std::size_t pos = 2;
  auto next_uint = [&]() -> std::uint64_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      fail(errc::bad_header, path.string() + ": malformed PPM header");
    std::uint64_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
      value = value * 10 + static_cast<std::uint64_t>(bytes[pos++] - '0');
    return value;
  };

  const std::uint64_t width = next_uint();
  const std::uint64_t height = next_uint();
  const std::uint64_t maxval = next_uint();
  if (maxval != 255) fail(errc::bad_maxval, path.string() + ": PPM maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail(errc::bad_header, path.string() + ": malformed PPM header");
  ++pos;

  const std::uint64_t n = height * width * 3;
  if (height == 0 || width == 0) fail(errc::empty_input, path.string() + ": empty PPM");
  if (bytes.size() - pos < n) fail(errc::truncated, path.string() + ": PPM payload too short");

  RgbImage img;
  img.height = static_cast<std::uint32_t>(height);
  img.width = static_cast<std::uint32_t>(width);
  img.data.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < n; ++i)
    img.data[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) / 255.0f;
  return img;
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  if (img.height == 0 || img.width == 0) fail(errc::empty_input, "refusing to write empty PPM");
  check_image(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
  const std::string header =
      "P6 " + std::to_string(img.width) + " " + std::to_string(img.height) + " 255\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::string payload(img.data.size(), '\0');
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const float v = clamp01(img.data[i]);
    payload[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) fail(errc::io_failure, "write failed on " + path.string());
}

}  // namespace segcal
