#include <benchmark/benchmark.h>

#include "segcal/calibration.hpp"
#include "segcal/rng.hpp"
#include "segcal/seg_metrics.hpp"

namespace {

using namespace segcal;

struct Raster {
  ProbMap probs;
  LabelMap pred;
  LabelMap gt;
};

Raster make_raster(std::uint32_t side, std::uint32_t classes) {
  Rng rng(99);
  Raster r;
  r.probs.height = r.pred.height = r.gt.height = side;
  r.probs.width = r.pred.width = r.gt.width = side;
  r.probs.classes = classes;
  const std::size_t pixels = static_cast<std::size_t>(side) * side;
  r.probs.data.resize(pixels * classes);
  r.pred.data.resize(pixels);
  r.gt.data.resize(pixels);
  std::vector<double> z(classes);
  for (std::size_t i = 0; i < pixels; ++i) {
    double sum = 0.0;
    for (auto& v : z) {
      v = std::exp(rng.normal());
      sum += v;
    }
    float best = 0.0f;
    std::uint8_t best_c = 0;
    for (std::uint32_t c = 0; c < classes; ++c) {
      const float p = static_cast<float>(z[c] / sum);
      r.probs.data[i * classes + c] = p;
      if (p > best) {
        best = p;
        best_c = static_cast<std::uint8_t>(c);
      }
    }
    r.pred.data[i] = best_c;
    r.gt.data[i] = rng.unit() < 0.1 ? kIgnoreId : static_cast<std::uint8_t>(rng.below(classes));
  }
  return r;
}

void BM_ConfusionAccumulate(benchmark::State& state) {
  const Raster r = make_raster(static_cast<std::uint32_t>(state.range(0)), 19);
  for (auto _ : state) {
    ConfusionMatrix cm(19);
    cm.accumulate(r.pred, r.gt);
    benchmark::DoNotOptimize(cm.total());
  }
  state.SetItemsProcessed(state.iterations() * r.gt.pixel_count());
}
BENCHMARK(BM_ConfusionAccumulate)->Arg(256)->Arg(512)->Arg(1024);

void BM_CalibrationAccumulate(benchmark::State& state) {
  const Raster r = make_raster(static_cast<std::uint32_t>(state.range(0)), 19);
  for (auto _ : state) {
    CalibrationBins bins(15);
    bins.accumulate(r.probs, r.gt);
    benchmark::DoNotOptimize(bins.total());
  }
  state.SetItemsProcessed(state.iterations() * r.gt.pixel_count());
}
BENCHMARK(BM_CalibrationAccumulate)->Arg(256)->Arg(512)->Arg(1024);

void BM_ConfusionMerge(benchmark::State& state) {
  const Raster r = make_raster(256, 19);
  ConfusionMatrix part(19);
  part.accumulate(r.pred, r.gt);
  for (auto _ : state) {
    ConfusionMatrix total(19);
    for (int i = 0; i < 64; ++i) total.merge(part);
    benchmark::DoNotOptimize(total.total());
  }
}
BENCHMARK(BM_ConfusionMerge);

}  // namespace
