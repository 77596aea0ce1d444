#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segcal/error.hpp"

namespace segcal {

/// Label id marking pixels excluded from losses and metrics. Class ids are
/// restricted to [0, 255), so the ignore id never collides with a class.
inline constexpr std::uint8_t kIgnoreId = 255;

/// Per-pixel probability sums may deviate from 1 by this much on read;
/// f32 softmax outputs rarely sum to 1 exactly.
inline constexpr double kNormalizationTolerance = 1e-4;

/// H x W raster of class ids (row-major, unsigned 8-bit).
struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> data;

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  std::uint8_t at(std::uint32_t y, std::uint32_t x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const LabelMap&) const = default;
};

/// H x W x C tensor of per-pixel class probabilities (row-major y, x, c).
struct ProbMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t classes = 0;
  std::vector<float> data;

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> pixel(std::size_t i) const {
    return {data.data() + i * classes, classes};
  }

  bool operator==(const ProbMap&) const = default;
};

/// H x W x d tensor of features (row-major y, x, j). Same container format
/// as ProbMap on disk, without the probability invariants.
struct FeatureMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> pixel(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }

  bool operator==(const FeatureMap&) const = default;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path label_path;
  std::vector<std::filesystem::path> prob_paths;
  std::optional<std::filesystem::path> feature_path;
};

struct Manifest {
  std::uint32_t classes = 0;
  std::vector<ManifestEntry> entries;
};

struct ReadOptions {
  bool allow_unnormalized = false;  // skip probability range/sum validation
  bool strict = false;              // reject trailing bytes after the payload
};

struct SegpHeader {
  std::uint32_t version = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
};

enum class LabelFormat { pgm, segl };

// SEGP probability tensors ---------------------------------------------------

SegpHeader read_segp_header(const std::filesystem::path& path);
ProbMap read_probmap(const std::filesystem::path& path, const ReadOptions& options = {});
void write_probmap(const ProbMap& map, const std::filesystem::path& path);

// SEGP feature tensors (channels = feature dim, finiteness checked only) -----

FeatureMap read_featuremap(const std::filesystem::path& path, const ReadOptions& options = {});
void write_featuremap(const FeatureMap& map, const std::filesystem::path& path);

// Label rasters (binary PGM P5 with maxval 255, or raw SEGL) -----------------

LabelMap read_labelmap(const std::filesystem::path& path, const ReadOptions& options = {});
void write_labelmap(const LabelMap& map, const std::filesystem::path& path,
                    LabelFormat format = LabelFormat::pgm);

// Dataset manifests -----------------------------------------------------------

/// Parses a manifest JSON file. Relative paths are resolved against the
/// manifest's directory. Duplicate ids are rejected here; cross-file
/// dimension checks run in validate_manifest.
Manifest load_manifest(const std::filesystem::path& path);

/// Checks that referenced files exist. With strict=true also opens every
/// header and verifies class count and per-entry H x W consistency.
void validate_manifest(const Manifest& manifest, bool strict);

}  // namespace segcal
