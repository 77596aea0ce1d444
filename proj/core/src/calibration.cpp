#include "segcal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace segcal {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

CalibrationBins::CalibrationBins(std::uint32_t bins) : bins_(bins) {
  if (bins == 0) fail(errc::invalid_argument, "bin count must be positive");
  count_.assign(bins, 0);
  sum_conf_.assign(bins, 0.0);
  sum_correct_.assign(bins, 0);
}

std::uint64_t CalibrationBins::total() const {
  return std::accumulate(count_.begin(), count_.end(), std::uint64_t{0});
}

void CalibrationBins::add(double confidence, bool correct) {
  if (bins_ == 0) fail(errc::bin_count_mismatch, "accumulator has no bins");
  int m = static_cast<int>(std::ceil(confidence * bins_));
  m = std::clamp(m, 1, static_cast<int>(bins_));
  const std::size_t i = static_cast<std::size_t>(m - 1);
  ++count_[i];
  sum_conf_[i] += confidence;
  sum_correct_[i] += correct ? 1 : 0;
}

void CalibrationBins::accumulate(const ProbMap& probs, const LabelMap& gt) {
  if (probs.height != gt.height || probs.width != gt.width)
    fail(errc::shape_mismatch, "probability map and ground truth disagree on dimensions");
  const std::size_t n = gt.pixel_count();
  const std::uint32_t classes = probs.classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t g = gt.data[i];
    if (g == kIgnoreId) continue;
    if (g >= classes) fail(errc::class_out_of_range, "ground-truth id " + std::to_string(g));
    const auto p = probs.pixel(i);
    std::uint32_t best = 0;
    float best_p = p[0];
    for (std::uint32_t c = 1; c < classes; ++c) {
      if (p[c] > best_p) {
        best_p = p[c];
        best = c;
      }
    }
    add(static_cast<double>(best_p), best == g);
  }
}

void CalibrationBins::merge(const CalibrationBins& other) {
  if (other.bins_ == 0) return;
  if (bins_ == 0) {
    *this = other;
    return;
  }
  if (bins_ != other.bins_)
    fail(errc::bin_count_mismatch,
         std::to_string(bins_) + " vs " + std::to_string(other.bins_));
  for (std::uint32_t i = 0; i < bins_; ++i) {
    count_[i] += other.count_[i];
    sum_conf_[i] += other.sum_conf_[i];
    sum_correct_[i] += other.sum_correct_[i];
  }
}

double CalibrationBins::ece() const {
  const std::uint64_t n = total();
  if (n == 0) fail(errc::empty_input, "no predictions accumulated");
  double e = 0.0;
  for (std::uint32_t i = 0; i < bins_; ++i) {
    if (count_[i] == 0) continue;
    const double cnt = static_cast<double>(count_[i]);
    const double accuracy = static_cast<double>(sum_correct_[i]) / cnt;
    const double avg_conf = sum_conf_[i] / cnt;
    e += (cnt / static_cast<double>(n)) * std::abs(accuracy - avg_conf);
  }
  return e * 100.0;
}

std::vector<CalibrationBins::BinRecord> CalibrationBins::reliability_data() const {
  const std::uint64_t n = total();
  std::vector<BinRecord> records(bins_);
  for (std::uint32_t i = 0; i < bins_; ++i) {
    BinRecord& r = records[i];
    r.lo = static_cast<double>(i) / bins_;
    r.hi = static_cast<double>(i + 1) / bins_;
    r.count = count_[i];
    if (count_[i] > 0) {
      const double cnt = static_cast<double>(count_[i]);
      r.avg_conf = sum_conf_[i] / cnt;
      r.accuracy = static_cast<double>(sum_correct_[i]) / cnt;
      r.weight = cnt / static_cast<double>(n);
    }
  }
  return records;
}

std::string reliability_csv(const CalibrationBins& bins) {
  std::string out = "bin_lo,bin_hi,avg_conf,accuracy,weight,count\n";
  for (const auto& r : bins.reliability_data()) {
    out += format_double(r.lo) + "," + format_double(r.hi) + ",";
    out += (r.avg_conf ? format_double(*r.avg_conf) : "nan");
    out += ",";
    out += (r.accuracy ? format_double(*r.accuracy) : "nan");
    out += "," + format_double(r.weight) + "," + std::to_string(r.count) + "\n";
  }
  return out;
}

std::string histogram_csv(const CalibrationBins& bins) {
  std::string out = "bin_lo,bin_hi,count\n";
  const auto counts = bins.confidence_histogram();
  for (std::uint32_t i = 0; i < bins.bins(); ++i) {
    out += format_double(static_cast<double>(i) / bins.bins()) + "," +
           format_double(static_cast<double>(i + 1) / bins.bins()) + "," +
           std::to_string(counts[i]) + "\n";
  }
  return out;
}

}  // namespace segcal
