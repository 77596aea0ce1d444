#pragma once

#include <span>
#include <string>

#include "segcal/calibration.hpp"
#include "segcal/pseudo_label.hpp"

namespace segcal {

/// Self-contained reliability diagram: per-bin accuracy bars, average
/// confidence markers and the identity diagonal.
std::string reliability_svg(const CalibrationBins& bins);

/// Precision-over-recall curve for a threshold sweep, one marker per
/// threshold.
std::string sweep_svg(std::span<const SweepPoint> points);

}  // namespace segcal
