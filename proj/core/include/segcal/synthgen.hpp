#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segcal/tensor_io.hpp"

namespace segcal {

/// Generative model behind the synthetic benchmark: per-class axis-aligned
/// Gaussians over a d-dimensional feature space, class priors, and a mean
/// shift that defines the target domain. Label regions come from a seeded
/// Voronoi partition so scenes look like segmentation masks instead of
/// pixel noise.
struct DomainSpec {
  std::uint32_t classes = 0;
  std::uint32_t dim = 0;
  std::vector<double> class_means;   // C x d, row-major
  std::vector<double> class_stddev;  // C x d, all > 0
  std::vector<double> class_priors;  // C, sums to 1
  std::vector<double> shift;         // d, added to every mean in the target domain
  double region_scale = 8.0;         // expected label-region side length in pixels
};

enum class Domain { source, target };

struct Scene {
  FeatureMap features;
  LabelMap labels;
};

void check_spec(const DomainSpec& spec);

/// Labels: Voronoi partition with ~H*W/region_scale^2 sites whose classes are
/// drawn from the priors. Features: per-pixel draws from the pixel's
/// class-conditional Gaussian, means shifted by spec.shift in the target
/// domain. Bitwise deterministic given (spec, seed).
Scene generate_scene(const DomainSpec& spec, std::uint32_t height, std::uint32_t width,
                     Domain domain, std::uint64_t seed);

/// Exact posterior p(c | x) of the generative process, computed in log space.
/// Calibrated by construction against generate_scene's labels.
ProbMap bayes_posterior(const DomainSpec& spec, const FeatureMap& features, Domain domain);

struct SynthBenchmark {
  std::vector<Scene> source;
  std::vector<Scene> target;
};

/// n_scenes per domain with disjoint derived seeds (source uses indices
/// [0, n), target [n, 2n)).
SynthBenchmark make_benchmark(const DomainSpec& spec, std::size_t n_scenes, std::uint32_t height,
                              std::uint32_t width, std::uint64_t seed);

/// Random spec: unit stddev, uniform priors, class means of norm `separation`
/// in random directions. The shift direction is a random combination of the
/// centered class means (norm `shift_norm`), keeping the target translation
/// inside the discriminative subspace.
DomainSpec make_gaussian_spec(std::uint32_t classes, std::uint32_t dim, double separation,
                              double shift_norm, double region_scale, std::uint64_t seed);

// Spec JSON: {classes, dim, means, stddev, priors, shift, region_scale}.
void save_spec(const DomainSpec& spec, const std::filesystem::path& path);
DomainSpec load_spec(const std::filesystem::path& path);

}  // namespace segcal
