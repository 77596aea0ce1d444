#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segcal/tensor_io.hpp"

namespace segcal {

/// C x C accumulator of valid-pixel counts, counts(g, p) = pixels with ground
/// truth g predicted as p. Mergeable: accumulate per image (or per tile) in
/// parallel, then reduce. Counts are 64-bit; 32 bits overflow on dataset-scale
/// pixel streams.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::uint32_t classes);

  std::uint32_t classes() const { return classes_; }
  std::uint64_t at(std::uint32_t gt, std::uint32_t pred) const {
    return counts_[static_cast<std::size_t>(gt) * classes_ + pred];
  }
  std::uint64_t total() const;

  /// Adds every pixel whose ground truth is not the ignore id. Predictions
  /// must be real classes (never 255) below C; ground-truth ids must be
  /// below C or 255.
  void accumulate(const LabelMap& pred, const LabelMap& gt);

  /// Element-wise sum. Associative and commutative with the default-constructed
  /// (or same-C zero) matrix as identity.
  void merge(const ConfusionMatrix& other);

  /// IoU_c = diag / (row + col - diag); nullopt when the class appears in
  /// neither ground truth nor predictions (0/0).
  std::vector<std::optional<double>> iou_per_class() const;

  /// Mean over classes with defined IoU. Errors when no class is defined.
  double miou() const;

  /// trace / total. Errors when no valid pixel has been accumulated.
  double pixel_accuracy() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::uint32_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct MetricReport {
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  double pixel_accuracy = 0.0;
  std::uint64_t valid_pixels = 0;
};

MetricReport make_report(const ConfusionMatrix& cm);

/// JSON object with keys per_class_iou, miou, pixel_accuracy, valid_pixels.
/// Undefined per-class entries serialize as null.
std::string metric_report_json(const MetricReport& report);

/// One header row plus one value row.
std::string metric_report_csv(const MetricReport& report);

}  // namespace segcal
