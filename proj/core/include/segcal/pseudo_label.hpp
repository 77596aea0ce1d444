#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segcal/ensemble.hpp"
#include "segcal/tensor_io.hpp"

namespace segcal {

/// One point of a confidence-threshold sweep over valid ground-truth pixels.
/// precision = correct/annotated, recall = correct/valid, coverage =
/// annotated/valid, so recall = precision * coverage whenever precision is
/// defined.
struct SweepPoint {
  double threshold = 0.0;
  std::optional<double> precision;
  double recall = 0.0;
  double coverage = 0.0;
  std::uint64_t annotated = 0;
  std::uint64_t correct_annotated = 0;
  std::uint64_t valid = 0;
};

/// Mergeable integer counts behind a sweep; accumulate per image, merge, then
/// read the points.
class SweepCounts {
 public:
  SweepCounts() = default;
  explicit SweepCounts(std::span<const double> thresholds);

  /// Counts pixels with confidence >= t (inclusive) for each threshold.
  /// Ignore-gt pixels contribute to nothing, including `valid`.
  void accumulate(const HardPrediction& pred, const LabelMap& gt);

  void merge(const SweepCounts& other);

  std::vector<SweepPoint> points() const;

  const std::vector<double>& thresholds() const { return thresholds_; }
  std::uint64_t valid() const { return valid_; }

 private:
  std::vector<double> thresholds_;
  std::vector<std::uint64_t> annotated_;
  std::vector<std::uint64_t> correct_;
  std::uint64_t valid_ = 0;
};

/// Single-image sweep; errors when gt has no valid pixel.
std::vector<SweepPoint> threshold_sweep(const HardPrediction& pred, const LabelMap& gt,
                                        std::span<const double> thresholds);

/// {0.1 .. 0.9 step 0.1, 0.95, 0.99, 0.995}.
std::vector<double> default_sweep_grid();

struct PseudoLabelStats {
  double coverage = 0.0;                    // over ALL pixels; no gt involved
  std::optional<double> precision_vs_gt;    // filled by pseudo_quality when gt exists
};

/// Hard pseudo-labels: the predicted class where confidence >= threshold,
/// the ignore id elsewhere.
struct PseudoLabelSet {
  LabelMap labels;
  double threshold = 0.0;
  PseudoLabelStats stats;
};

PseudoLabelSet make_pseudo_labels(const HardPrediction& pred, double threshold);

struct PseudoQuality {
  double coverage_vs_valid = 0.0;       // annotated fraction among valid-gt pixels
  std::optional<double> precision;      // accuracy among annotated valid-gt pixels
};

PseudoQuality pseudo_quality(const PseudoLabelSet& pseudo, const LabelMap& gt);

/// CSV with columns threshold, precision, recall, coverage, annotated,
/// correct, valid.
std::string sweep_csv(std::span<const SweepPoint> points);

}  // namespace segcal
