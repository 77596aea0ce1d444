#include "segcal/pseudo_label.hpp"

#include <cmath>
#include <cstdio>

namespace segcal {

namespace {

void check_thresholds(std::span<const double> thresholds) {
  if (thresholds.empty()) fail(errc::invalid_argument, "threshold list is empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double t = thresholds[i];
    if (!(t > 0.0 && t <= 1.0))
      fail(errc::invalid_argument, "threshold " + std::to_string(t) + " outside (0, 1]");
    if (i > 0 && t <= thresholds[i - 1])
      fail(errc::invalid_argument, "thresholds must be strictly increasing");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

SweepCounts::SweepCounts(std::span<const double> thresholds)
    : thresholds_(thresholds.begin(), thresholds.end()),
      annotated_(thresholds.size(), 0),
      correct_(thresholds.size(), 0) {
  check_thresholds(thresholds_);
}

void SweepCounts::accumulate(const HardPrediction& pred, const LabelMap& gt) {
  if (pred.labels.height != gt.height || pred.labels.width != gt.width)
    fail(errc::shape_mismatch, "prediction and ground truth disagree on dimensions");
  const std::size_t n = gt.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t g = gt.data[i];
    if (g == kIgnoreId) continue;
    ++valid_;
    const double conf = static_cast<double>(pred.confidence[i]);
    const bool correct = pred.labels.data[i] == g;
    // Thresholds are increasing, so walk until the first one above conf.
    for (std::size_t k = 0; k < thresholds_.size() && conf >= thresholds_[k]; ++k) {
      ++annotated_[k];
      if (correct) ++correct_[k];
    }
  }
}

void SweepCounts::merge(const SweepCounts& other) {
  if (other.thresholds_.empty()) return;
  if (thresholds_.empty()) {
    *this = other;
    return;
  }
  if (thresholds_ != other.thresholds_)
    fail(errc::invalid_argument, "sweep accumulators disagree on thresholds");
  for (std::size_t k = 0; k < thresholds_.size(); ++k) {
    annotated_[k] += other.annotated_[k];
    correct_[k] += other.correct_[k];
  }
  valid_ += other.valid_;
}

std::vector<SweepPoint> SweepCounts::points() const {
  if (valid_ == 0) fail(errc::empty_input, "no valid ground-truth pixels");
  std::vector<SweepPoint> out(thresholds_.size());
  const double valid = static_cast<double>(valid_);
  for (std::size_t k = 0; k < thresholds_.size(); ++k) {
    SweepPoint& p = out[k];
    p.threshold = thresholds_[k];
    p.annotated = annotated_[k];
    p.correct_annotated = correct_[k];
    p.valid = valid_;
    p.coverage = static_cast<double>(annotated_[k]) / valid;
    p.recall = static_cast<double>(correct_[k]) / valid;
    if (annotated_[k] > 0)
      p.precision = static_cast<double>(correct_[k]) / static_cast<double>(annotated_[k]);
  }
  return out;
}

std::vector<SweepPoint> threshold_sweep(const HardPrediction& pred, const LabelMap& gt,
                                        std::span<const double> thresholds) {
  SweepCounts counts(thresholds);
  counts.accumulate(pred, gt);
  return counts.points();
}

std::vector<double> default_sweep_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995};
}

PseudoLabelSet make_pseudo_labels(const HardPrediction& pred, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    fail(errc::invalid_argument, "threshold " + std::to_string(threshold) + " outside (0, 1]");
  PseudoLabelSet out;
  out.threshold = threshold;
  out.labels.height = pred.labels.height;
  out.labels.width = pred.labels.width;
  const std::size_t n = pred.labels.pixel_count();
  out.labels.data.assign(n, kIgnoreId);
  std::uint64_t annotated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<double>(pred.confidence[i]) >= threshold) {
      out.labels.data[i] = pred.labels.data[i];
      ++annotated;
    }
  }
  out.stats.coverage = n == 0 ? 0.0 : static_cast<double>(annotated) / static_cast<double>(n);
  return out;
}

PseudoQuality pseudo_quality(const PseudoLabelSet& pseudo, const LabelMap& gt) {
  if (pseudo.labels.height != gt.height || pseudo.labels.width != gt.width)
    fail(errc::shape_mismatch, "pseudo labels and ground truth disagree on dimensions");
  std::uint64_t valid = 0, annotated = 0, correct = 0;
  const std::size_t n = gt.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.data[i] == kIgnoreId) continue;
    ++valid;
    if (pseudo.labels.data[i] == kIgnoreId) continue;
    ++annotated;
    if (pseudo.labels.data[i] == gt.data[i]) ++correct;
  }
  PseudoQuality q;
  if (valid == 0) return q;
  q.coverage_vs_valid = static_cast<double>(annotated) / static_cast<double>(valid);
  if (annotated > 0)
    q.precision = static_cast<double>(correct) / static_cast<double>(annotated);
  return q;
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "threshold,precision,recall,coverage,annotated,correct,valid\n";
  for (const auto& p : points) {
    out += format_double(p.threshold) + ",";
    out += (p.precision ? format_double(*p.precision) : "nan");
    out += "," + format_double(p.recall) + "," + format_double(p.coverage) + "," +
           std::to_string(p.annotated) + "," + std::to_string(p.correct_annotated) + "," +
           std::to_string(p.valid) + "\n";
  }
  return out;
}

}  // namespace segcal
