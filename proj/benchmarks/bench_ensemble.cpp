#include <benchmark/benchmark.h>

#include "segcal/ensemble.hpp"
#include "segcal/rng.hpp"

namespace {

using namespace segcal;

std::vector<ProbMap> make_members(std::size_t count, std::uint32_t side, std::uint32_t classes) {
  Rng rng(7);
  std::vector<ProbMap> members(count);
  std::vector<double> z(classes);
  for (auto& map : members) {
    map.height = map.width = side;
    map.classes = classes;
    map.data.resize(static_cast<std::size_t>(side) * side * classes);
    for (std::size_t i = 0; i < map.pixel_count(); ++i) {
      double sum = 0.0;
      for (auto& v : z) {
        v = std::exp(rng.normal());
        sum += v;
      }
      for (std::uint32_t c = 0; c < classes; ++c)
        map.data[i * classes + c] = static_cast<float>(z[c] / sum);
    }
  }
  return members;
}

void BM_EnsembleAverage(benchmark::State& state) {
  const auto members = make_members(static_cast<std::size_t>(state.range(0)), 256, 19);
  for (auto _ : state) {
    const ProbMap fused = ensemble_average(std::span<const ProbMap>(members));
    benchmark::DoNotOptimize(fused.data.data());
  }
  state.SetItemsProcessed(state.iterations() * members[0].data.size());
}
BENCHMARK(BM_EnsembleAverage)->Arg(3)->Arg(5);

void BM_ArgmaxPrediction(benchmark::State& state) {
  const auto members = make_members(1, 512, 19);
  for (auto _ : state) {
    const HardPrediction pred = argmax_prediction(members[0]);
    benchmark::DoNotOptimize(pred.confidence.data());
  }
  state.SetItemsProcessed(state.iterations() * members[0].pixel_count());
}
BENCHMARK(BM_ArgmaxPrediction);

}  // namespace
