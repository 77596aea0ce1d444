#include "segcal/seg_metrics.hpp"

#include <numeric>

#include <json.hpp>

namespace segcal {

ConfusionMatrix::ConfusionMatrix(std::uint32_t classes) : classes_(classes) {
  if (classes == 0 || classes > 255)
    fail(errc::invalid_argument, "class count must be in [1, 255]");
  counts_.assign(static_cast<std::size_t>(classes) * classes, 0);
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (classes_ == 0) fail(errc::class_count_mismatch, "confusion matrix has no classes");
  if (pred.height != gt.height || pred.width != gt.width)
    fail(errc::shape_mismatch, "prediction and ground truth disagree on dimensions");
  const std::size_t n = gt.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t g = gt.data[i];
    if (g == kIgnoreId) continue;
    const std::uint8_t p = pred.data[i];
    if (g >= classes_)
      fail(errc::class_out_of_range, "ground-truth id " + std::to_string(g));
    if (p >= classes_)
      fail(errc::class_out_of_range, "predicted id " + std::to_string(p));
    ++counts_[static_cast<std::size_t>(g) * classes_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ == 0) return;  // zero identity
  if (classes_ == 0) {
    *this = other;
    return;
  }
  if (classes_ != other.classes_)
    fail(errc::class_count_mismatch, std::to_string(classes_) + " vs " +
                                         std::to_string(other.classes_));
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<std::optional<double>> ConfusionMatrix::iou_per_class() const {
  std::vector<std::optional<double>> iou(classes_);
  for (std::uint32_t c = 0; c < classes_; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::uint32_t k = 0; k < classes_; ++k) {
      row += at(c, k);
      col += at(k, c);
    }
    const std::uint64_t diag = at(c, c);
    const std::uint64_t denom = row + col - diag;
    if (denom == 0) continue;  // absent from both gt and predictions
    iou[c] = static_cast<double>(diag) / static_cast<double>(denom);
  }
  return iou;
}

double ConfusionMatrix::miou() const {
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& v : iou_per_class()) {
    if (!v) continue;
    sum += *v;
    ++defined;
  }
  if (defined == 0) fail(errc::empty_input, "no class has a defined IoU");
  return sum / static_cast<double>(defined);
}

double ConfusionMatrix::pixel_accuracy() const {
  const std::uint64_t n = total();
  if (n == 0) fail(errc::empty_input, "no valid pixels accumulated");
  std::uint64_t trace = 0;
  for (std::uint32_t c = 0; c < classes_; ++c) trace += at(c, c);
  return static_cast<double>(trace) / static_cast<double>(n);
}

MetricReport make_report(const ConfusionMatrix& cm) {
  MetricReport report;
  report.per_class_iou = cm.iou_per_class();
  report.miou = cm.miou();
  report.pixel_accuracy = cm.pixel_accuracy();
  report.valid_pixels = cm.total();
  return report;
}

std::string metric_report_json(const MetricReport& report) {
  nlohmann::json doc;
  auto& iou = doc["per_class_iou"];
  iou = nlohmann::json::array();
  for (const auto& v : report.per_class_iou) {
    if (v)
      iou.push_back(*v);
    else
      iou.push_back(nullptr);
  }
  doc["miou"] = report.miou;
  doc["pixel_accuracy"] = report.pixel_accuracy;
  doc["valid_pixels"] = report.valid_pixels;
  return doc.dump();
}

std::string metric_report_csv(const MetricReport& report) {
  std::string header = "miou,pixel_accuracy,valid_pixels";
  std::string row = std::to_string(report.miou) + "," + std::to_string(report.pixel_accuracy) +
                    "," + std::to_string(report.valid_pixels);
  for (std::size_t c = 0; c < report.per_class_iou.size(); ++c) {
    header += ",iou_" + std::to_string(c);
    row += ",";
    row += report.per_class_iou[c] ? std::to_string(*report.per_class_iou[c]) : "nan";
  }
  return header + "\n" + row + "\n";
}

}  // namespace segcal
