#include "segcal/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "segcal/rng.hpp"

namespace segcal {

namespace {

struct Site {
  double x, y;
  std::uint8_t label;
};

std::uint8_t sample_class(const DomainSpec& spec, Rng& rng) {
  const double u = rng.unit();
  double cum = 0.0;
  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    cum += spec.class_priors[c];
    if (u < cum) return static_cast<std::uint8_t>(c);
  }
  return static_cast<std::uint8_t>(spec.classes - 1);
}

/// Bucket grid over the sites; pixels find their nearest site by expanding
/// ring search, which stays exact for arbitrary site placements.
class NearestSiteGrid {
 public:
  NearestSiteGrid(const std::vector<Site>& sites, double cell, std::uint32_t width,
                  std::uint32_t height)
      : sites_(sites), cell_(cell) {
    nx_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(width / cell_)));
    ny_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(height / cell_)));
    buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
    for (std::size_t i = 0; i < sites.size(); ++i)
      buckets_[bucket_index(sites[i].x, sites[i].y)].push_back(static_cast<std::uint32_t>(i));
  }

  std::uint32_t nearest(double px, double py) const {
    const std::int64_t cx = clamp_x(static_cast<std::int64_t>(px / cell_));
    const std::int64_t cy = clamp_y(static_cast<std::int64_t>(py / cell_));
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best = 0;
    const std::int64_t max_ring = std::max(nx_, ny_);
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      // Once a site is found, rings whose nearest possible point is farther
      // than the current best cannot improve on it.
      if (std::isfinite(best_d2)) {
        const double ring_min = (static_cast<double>(ring) - 1.0) * cell_;
        if (ring_min > 0.0 && ring_min * ring_min > best_d2) break;
      }
      for (std::int64_t gy = cy - ring; gy <= cy + ring; ++gy) {
        if (gy < 0 || gy >= ny_) continue;
        for (std::int64_t gx = cx - ring; gx <= cx + ring; ++gx) {
          if (gx < 0 || gx >= nx_) continue;
          if (std::max(std::abs(gx - cx), std::abs(gy - cy)) != ring) continue;
          for (std::uint32_t idx : buckets_[static_cast<std::size_t>(gy * nx_ + gx)]) {
            const double dx = sites_[idx].x - px;
            const double dy = sites_[idx].y - py;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    return best;
  }

 private:
  std::size_t bucket_index(double x, double y) const {
    const std::int64_t gx = clamp_x(static_cast<std::int64_t>(x / cell_));
    const std::int64_t gy = clamp_y(static_cast<std::int64_t>(y / cell_));
    return static_cast<std::size_t>(gy * nx_ + gx);
  }
  std::int64_t clamp_x(std::int64_t v) const { return std::clamp<std::int64_t>(v, 0, nx_ - 1); }
  std::int64_t clamp_y(std::int64_t v) const { return std::clamp<std::int64_t>(v, 0, ny_ - 1); }

  const std::vector<Site>& sites_;
  double cell_;
  std::int64_t nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

}  // namespace

void check_spec(const DomainSpec& spec) {
  if (spec.classes == 0 || spec.classes > 255)
    fail(errc::invalid_argument, "spec needs classes in [1, 255]");
  if (spec.dim == 0) fail(errc::invalid_argument, "spec needs dim >= 1");
  const std::size_t cd = static_cast<std::size_t>(spec.classes) * spec.dim;
  if (spec.class_means.size() != cd || spec.class_stddev.size() != cd)
    fail(errc::shape_mismatch, "means/stddev must be classes x dim");
  if (spec.class_priors.size() != spec.classes)
    fail(errc::shape_mismatch, "priors must have one entry per class");
  if (spec.shift.size() != spec.dim) fail(errc::shape_mismatch, "shift must have dim entries");
  double prior_sum = 0.0;
  for (double p : spec.class_priors) {
    if (!(p >= 0.0)) fail(errc::invalid_argument, "priors must be non-negative");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9)
    fail(errc::invalid_argument, "priors sum to " + std::to_string(prior_sum));
  for (double s : spec.class_stddev)
    if (!(s > 0.0)) fail(errc::invalid_argument, "stddevs must be positive");
  if (!(spec.region_scale > 0.0)) fail(errc::invalid_argument, "region_scale must be positive");
}

Scene generate_scene(const DomainSpec& spec, std::uint32_t height, std::uint32_t width,
                     Domain domain, std::uint64_t seed) {
  check_spec(spec);
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  if (pixels == 0) fail(errc::empty_input, "scene must have at least one pixel");

  Rng rng(seed);
  const double target_sites =
      static_cast<double>(pixels) / (spec.region_scale * spec.region_scale);
  const std::size_t n_sites =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(target_sites)));

  std::vector<Site> sites(n_sites);
  for (auto& site : sites) {
    site.x = rng.range(0.0, static_cast<double>(width));
    site.y = rng.range(0.0, static_cast<double>(height));
    site.label = sample_class(spec, rng);
  }

  Scene scene;
  scene.labels.height = height;
  scene.labels.width = width;
  scene.labels.data.resize(pixels);
  if (spec.classes == 1) {
    std::fill(scene.labels.data.begin(), scene.labels.data.end(), std::uint8_t{0});
  } else {
    const NearestSiteGrid grid(sites, std::max(1.0, spec.region_scale), width, height);
    for (std::uint32_t y = 0; y < height; ++y)
      for (std::uint32_t x = 0; x < width; ++x)
        scene.labels.data[static_cast<std::size_t>(y) * width + x] =
            sites[grid.nearest(x + 0.5, y + 0.5)].label;
  }

  scene.features.height = height;
  scene.features.width = width;
  scene.features.dim = spec.dim;
  scene.features.data.resize(pixels * spec.dim);
  const bool shifted = domain == Domain::target;
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::uint8_t c = scene.labels.data[i];
    const double* mu = spec.class_means.data() + static_cast<std::size_t>(c) * spec.dim;
    const double* sd = spec.class_stddev.data() + static_cast<std::size_t>(c) * spec.dim;
    for (std::uint32_t j = 0; j < spec.dim; ++j) {
      double v = mu[j] + sd[j] * rng.normal();
      if (shifted) v += spec.shift[j];
      scene.features.data[i * spec.dim + j] = static_cast<float>(v);
    }
  }
  return scene;
}

ProbMap bayes_posterior(const DomainSpec& spec, const FeatureMap& features, Domain domain) {
  check_spec(spec);
  if (features.dim != spec.dim)
    fail(errc::shape_mismatch, "feature dim does not match spec dim");

  const std::uint32_t C = spec.classes;
  const std::uint32_t d = spec.dim;
  const bool shifted = domain == Domain::target;

  // Per-class constants: log prior - sum_j log sigma_cj.
  std::vector<double> log_const(C);
  for (std::uint32_t c = 0; c < C; ++c) {
    double v = spec.class_priors[c] > 0.0 ? std::log(spec.class_priors[c])
                                          : -std::numeric_limits<double>::infinity();
    const double* sd = spec.class_stddev.data() + static_cast<std::size_t>(c) * d;
    for (std::uint32_t j = 0; j < d; ++j) v -= std::log(sd[j]);
    log_const[c] = v;
  }

  ProbMap out;
  out.height = features.height;
  out.width = features.width;
  out.classes = C;
  const std::size_t pixels = features.pixel_count();
  out.data.resize(pixels * C);

  std::vector<double> logp(C);
  for (std::size_t i = 0; i < pixels; ++i) {
    const auto x = features.pixel(i);
    for (std::uint32_t c = 0; c < C; ++c) {
      const double* mu = spec.class_means.data() + static_cast<std::size_t>(c) * d;
      const double* sd = spec.class_stddev.data() + static_cast<std::size_t>(c) * d;
      double quad = 0.0;
      for (std::uint32_t j = 0; j < d; ++j) {
        const double mean = shifted ? mu[j] + spec.shift[j] : mu[j];
        const double z = (static_cast<double>(x[j]) - mean) / sd[j];
        quad += z * z;
      }
      logp[c] = log_const[c] - 0.5 * quad;
    }
    const double zmax = *std::max_element(logp.begin(), logp.end());
    double sum = 0.0;
    for (std::uint32_t c = 0; c < C; ++c) {
      logp[c] = std::exp(logp[c] - zmax);
      sum += logp[c];
    }
    for (std::uint32_t c = 0; c < C; ++c)
      out.data[i * C + c] = static_cast<float>(logp[c] / sum);
  }
  return out;
}

SynthBenchmark make_benchmark(const DomainSpec& spec, std::size_t n_scenes, std::uint32_t height,
                              std::uint32_t width, std::uint64_t seed) {
  if (n_scenes == 0) fail(errc::empty_input, "benchmark needs at least one scene");
  SynthBenchmark bench;
  bench.source.reserve(n_scenes);
  bench.target.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i)
    bench.source.push_back(
        generate_scene(spec, height, width, Domain::source, derive_seed(seed, i)));
  for (std::size_t i = 0; i < n_scenes; ++i)
    bench.target.push_back(
        generate_scene(spec, height, width, Domain::target, derive_seed(seed, n_scenes + i)));
  return bench;
}

DomainSpec make_gaussian_spec(std::uint32_t classes, std::uint32_t dim, double separation,
                              double shift_norm, double region_scale, std::uint64_t seed) {
  if (classes == 0 || classes > 255 || dim == 0)
    fail(errc::invalid_argument, "classes in [1, 255] and dim >= 1 required");
  Rng rng(seed);
  auto random_direction = [&]() {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& e : v) {
        e = rng.normal();
        norm2 += e * e;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& e : v) e *= inv;
    return v;
  };

  DomainSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.region_scale = region_scale;
  spec.class_means.resize(static_cast<std::size_t>(classes) * dim);
  spec.class_stddev.assign(static_cast<std::size_t>(classes) * dim, 1.0);
  spec.class_priors.assign(classes, 1.0 / classes);
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto dir = random_direction();
    for (std::uint32_t j = 0; j < dim; ++j)
      spec.class_means[static_cast<std::size_t>(c) * dim + j] = separation * dir[j];
  }

  // Shift direction: a random combination of the centered class means, so the
  // target translation lands in the discriminative subspace. A direction
  // orthogonal to every inter-class axis would leave predictions untouched
  // and make a vacuous shift benchmark.
  std::vector<double> centroid(dim, 0.0);
  for (std::uint32_t c = 0; c < classes; ++c)
    for (std::uint32_t j = 0; j < dim; ++j)
      centroid[j] += spec.class_means[static_cast<std::size_t>(c) * dim + j] / classes;
  std::vector<double> direction(dim, 0.0);
  double norm2 = 0.0;
  for (std::uint32_t c = 0; c < classes; ++c) {
    const double g = rng.normal();
    for (std::uint32_t j = 0; j < dim; ++j)
      direction[j] += g * (spec.class_means[static_cast<std::size_t>(c) * dim + j] - centroid[j]);
  }
  for (double v : direction) norm2 += v * v;
  if (norm2 == 0.0) {  // degenerate means (C = 1 or zero separation)
    direction = random_direction();
    norm2 = 1.0;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  spec.shift.resize(dim);
  for (std::uint32_t j = 0; j < dim; ++j) spec.shift[j] = shift_norm * direction[j] * inv;
  check_spec(spec);
  return spec;
}

void save_spec(const DomainSpec& spec, const std::filesystem::path& path) {
  check_spec(spec);
  nlohmann::json doc;
  doc["classes"] = spec.classes;
  doc["dim"] = spec.dim;
  doc["means"] = spec.class_means;
  doc["stddev"] = spec.class_stddev;
  doc["priors"] = spec.class_priors;
  doc["shift"] = spec.shift;
  doc["region_scale"] = spec.region_scale;
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) fail(errc::io_failure, "write failed on " + path.string());
}

DomainSpec load_spec(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) fail(errc::missing_file, path.string());
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    DomainSpec spec;
    spec.classes = doc.at("classes").get<std::uint32_t>();
    spec.dim = doc.at("dim").get<std::uint32_t>();
    spec.class_means = doc.at("means").get<std::vector<double>>();
    spec.class_stddev = doc.at("stddev").get<std::vector<double>>();
    spec.class_priors = doc.at("priors").get<std::vector<double>>();
    spec.shift = doc.at("shift").get<std::vector<double>>();
    spec.region_scale = doc.at("region_scale").get<double>();
    check_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, path.string() + ": " + e.what());
  }
}

}  // namespace segcal
