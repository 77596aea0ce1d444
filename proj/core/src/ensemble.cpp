#include "segcal/ensemble.hpp"

#include <algorithm>

namespace segcal {

ProbMap ensemble_average(std::vector<EnsembleMember> members) {
  if (members.empty()) fail(errc::empty_input, "ensemble needs at least one member");
  std::stable_sort(members.begin(), members.end(),
                   [](const EnsembleMember& a, const EnsembleMember& b) { return a.order < b.order; });

  const ProbMap& first = *members.front().map;
  for (const auto& m : members) {
    const ProbMap& map = *m.map;
    if (map.height != first.height || map.width != first.width)
      fail(errc::shape_mismatch, "ensemble members disagree on dimensions");
    if (map.classes != first.classes)
      fail(errc::class_count_mismatch, "ensemble members disagree on class count");
  }

  ProbMap out;
  out.height = first.height;
  out.width = first.width;
  out.classes = first.classes;
  out.data.resize(first.data.size());

  const double inv = 1.0 / static_cast<double>(members.size());
  const std::size_t n = first.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& m : members) sum += static_cast<double>(m.map->data[i]);
    out.data[i] = static_cast<float>(sum * inv);
  }
  return out;
}

ProbMap ensemble_average(std::span<const ProbMap> members) {
  std::vector<EnsembleMember> indexed;
  indexed.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) indexed.push_back({i, &members[i]});
  return ensemble_average(std::move(indexed));
}

HardPrediction argmax_prediction(const ProbMap& map) {
  if (map.classes == 0 || map.classes > 255)
    fail(errc::class_out_of_range,
         "argmax needs 1..255 classes, got " + std::to_string(map.classes));
  HardPrediction pred;
  pred.labels.height = map.height;
  pred.labels.width = map.width;
  const std::size_t pixels = map.pixel_count();
  pred.labels.data.resize(pixels);
  pred.confidence.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    const auto p = map.pixel(i);
    std::uint32_t best = 0;
    float best_p = p[0];
    for (std::uint32_t c = 1; c < map.classes; ++c) {
      if (p[c] > best_p) {  // strict: ties keep the lowest index
        best_p = p[c];
        best = c;
      }
    }
    pred.labels.data[i] = static_cast<std::uint8_t>(best);
    pred.confidence[i] = best_p;
  }
  return pred;
}

}  // namespace segcal
