#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segcal/tensor_io.hpp"

namespace segcal {

/// M-bin accumulator over (confidence, correctness) pairs. Bin m covers the
/// confidence interval ((m-1)/M, m/M]; confidence 0 is clamped into bin 1.
/// Bin counts are 64-bit integers, confidence sums 64-bit floats, so a single
/// accumulator absorbs dataset-scale pixel streams without drift that matters.
class CalibrationBins {
 public:
  CalibrationBins() = default;
  explicit CalibrationBins(std::uint32_t bins);

  std::uint32_t bins() const { return bins_; }
  std::uint64_t total() const;

  /// Adds one prediction. Callers outside tests should prefer accumulate().
  void add(double confidence, bool correct);

  /// For each valid pixel: confidence = max class probability, correct =
  /// (argmax == gt), ties at argmax broken toward the lowest class index.
  /// Ignore pixels are skipped.
  void accumulate(const ProbMap& probs, const LabelMap& gt);

  /// Element-wise sums. Identity: a default-constructed (or empty same-M)
  /// accumulator.
  void merge(const CalibrationBins& other);

  /// Expected calibration error in percent:
  /// 100 * sum_m (count_m / n) * |accuracy_m - avg_confidence_m|.
  double ece() const;

  struct BinRecord {
    double lo = 0.0;
    double hi = 0.0;
    std::optional<double> avg_conf;
    std::optional<double> accuracy;
    double weight = 0.0;
    std::uint64_t count = 0;
  };

  /// Per-bin averages and weights; exactly the data a reliability diagram
  /// plots. Empty bins carry nullopt averages and weight 0.
  std::vector<BinRecord> reliability_data() const;

  std::vector<std::uint64_t> confidence_histogram() const { return count_; }

  std::uint64_t bin_count(std::uint32_t m) const { return count_[m - 1]; }       // m in [1, M]
  double bin_sum_conf(std::uint32_t m) const { return sum_conf_[m - 1]; }
  std::uint64_t bin_sum_correct(std::uint32_t m) const { return sum_correct_[m - 1]; }

 private:
  std::uint32_t bins_ = 0;
  std::vector<std::uint64_t> count_;
  std::vector<double> sum_conf_;
  std::vector<std::uint64_t> sum_correct_;
};

/// CSV with columns bin_lo, bin_hi, avg_conf, accuracy, weight, count.
/// Empty-bin averages render as nan.
std::string reliability_csv(const CalibrationBins& bins);

std::string histogram_csv(const CalibrationBins& bins);

}  // namespace segcal
