#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "segcal/tensor_io.hpp"

namespace segcal {

/// Ensemble member with its canonical position (manifest order, CLI argument
/// order, ...). Averaging always sums in ascending `order`, so the result is
/// bitwise identical however the caller happens to arrange the list.
struct EnsembleMember {
  std::size_t order = 0;
  const ProbMap* map = nullptr;
};

/// Per-pixel, per-class arithmetic mean of the members, accumulated in f64
/// and rounded to f32. Members must share H x W x C.
ProbMap ensemble_average(std::vector<EnsembleMember> members);

/// Convenience overload: member order = position in the span.
ProbMap ensemble_average(std::span<const ProbMap> members);

/// Hard per-pixel decision: the winning class and its probability.
struct HardPrediction {
  LabelMap labels;                 // never contains the ignore id
  std::vector<float> confidence;   // H*W, the max class probability
};

/// Argmax with ties broken toward the lowest class index. Requires C <= 255
/// so the result fits a LabelMap.
HardPrediction argmax_prediction(const ProbMap& map);

}  // namespace segcal
