#include "segcal/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "segcal/ensemble.hpp"
#include "segcal/pseudo_label.hpp"
#include "segcal/rng.hpp"

namespace segcal {

namespace {

constexpr double kLogFloor = 1e-12;

void check_model(const ToyModel& model) {
  if (model.classes == 0 || model.dim == 0)
    fail(errc::invalid_argument, "model needs classes >= 1 and dim >= 1");
  if (model.weights.size() != static_cast<std::size_t>(model.classes) * model.dim ||
      model.bias.size() != model.classes)
    fail(errc::shape_mismatch, "model parameter buffers do not match classes x dim");
  for (double w : model.weights)
    if (!std::isfinite(w)) fail(errc::nan_entry, "non-finite weight");
  for (double b : model.bias)
    if (!std::isfinite(b)) fail(errc::nan_entry, "non-finite bias");
}

// Softmax of W x + b for one pixel, f64 throughout.
void pixel_probs(const ToyModel& model, std::span<const float> x, std::vector<double>& p) {
  const std::uint32_t C = model.classes;
  const std::uint32_t d = model.dim;
  for (std::uint32_t c = 0; c < C; ++c) {
    double z = model.bias[c];
    const double* w = model.weights.data() + static_cast<std::size_t>(c) * d;
    for (std::uint32_t j = 0; j < d; ++j) z += w[j] * static_cast<double>(x[j]);
    p[c] = z;
  }
  const double zmax = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (std::uint32_t c = 0; c < C; ++c) {
    p[c] = std::exp(p[c] - zmax);
    sum += p[c];
  }
  for (std::uint32_t c = 0; c < C; ++c) p[c] /= sum;
}

std::uint64_t checked_finetune_steps(const TrainConfig& cfg) {
  if (cfg.finetune_steps > 0) return cfg.finetune_steps;
  return std::max<std::uint64_t>(1, cfg.steps / 4);
}

void check_config(const TrainConfig& cfg) {
  if (cfg.steps < 1) fail(errc::invalid_argument, "steps must be >= 1");
  if (cfg.batch_pixels < 1) fail(errc::invalid_argument, "batch_pixels must be >= 1");
  if (!(cfg.lr0 > 0.0)) fail(errc::invalid_argument, "lr0 must be positive");
  if (!(cfg.power > 0.0)) fail(errc::invalid_argument, "power must be positive");
  if (cfg.feature_noise < 0.0) fail(errc::invalid_argument, "feature_noise must be >= 0");
}

}  // namespace

ToyModel make_zero_model(std::uint32_t classes, std::uint32_t dim) {
  if (classes == 0 || classes > 255 || dim == 0)
    fail(errc::invalid_argument, "model needs classes in [1, 255] and dim >= 1");
  ToyModel model;
  model.classes = classes;
  model.dim = dim;
  model.weights.assign(static_cast<std::size_t>(classes) * dim, 0.0);
  model.bias.assign(classes, 0.0);
  return model;
}

ProbMap forward(const ToyModel& model, const FeatureMap& features) {
  check_model(model);
  if (features.dim != model.dim)
    fail(errc::shape_mismatch, "feature dim " + std::to_string(features.dim) +
                                   " does not match model dim " + std::to_string(model.dim));
  ProbMap out;
  out.height = features.height;
  out.width = features.width;
  out.classes = model.classes;
  const std::size_t pixels = features.pixel_count();
  out.data.resize(pixels * model.classes);
  std::vector<double> p(model.classes);
  for (std::size_t i = 0; i < pixels; ++i) {
    pixel_probs(model, features.pixel(i), p);
    for (std::uint32_t c = 0; c < model.classes; ++c)
      out.data[i * model.classes + c] = static_cast<float>(p[c]);
  }
  return out;
}

double ce_loss(const ProbMap& probs, const LabelMap& labels) {
  if (probs.height != labels.height || probs.width != labels.width)
    fail(errc::shape_mismatch, "probabilities and labels disagree on dimensions");
  double sum = 0.0;
  std::uint64_t valid = 0;
  const std::size_t n = labels.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = labels.data[i];
    if (y == kIgnoreId) continue;
    if (y >= probs.classes) fail(errc::class_out_of_range, "label id " + std::to_string(y));
    const double p = std::max(static_cast<double>(probs.pixel(i)[y]), kLogFloor);
    sum += -std::log(p);
    ++valid;
  }
  if (valid == 0) fail(errc::empty_input, "no valid pixels in loss");
  return sum / static_cast<double>(valid);
}

double model_loss(const ToyModel& model, const FeatureMap& features, const LabelMap& labels) {
  check_model(model);
  if (features.height != labels.height || features.width != labels.width)
    fail(errc::shape_mismatch, "features and labels disagree on dimensions");
  if (features.dim != model.dim) fail(errc::shape_mismatch, "feature dim mismatch");
  double sum = 0.0;
  std::uint64_t valid = 0;
  std::vector<double> p(model.classes);
  const std::size_t n = labels.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = labels.data[i];
    if (y == kIgnoreId) continue;
    if (y >= model.classes) fail(errc::class_out_of_range, "label id " + std::to_string(y));
    pixel_probs(model, features.pixel(i), p);
    sum += -std::log(std::max(p[y], kLogFloor));
    ++valid;
  }
  if (valid == 0) fail(errc::empty_input, "no valid pixels in loss");
  return sum / static_cast<double>(valid);
}

Gradients ce_gradient(const ToyModel& model, const FeatureMap& features, const LabelMap& labels) {
  check_model(model);
  if (features.height != labels.height || features.width != labels.width)
    fail(errc::shape_mismatch, "features and labels disagree on dimensions");
  if (features.dim != model.dim) fail(errc::shape_mismatch, "feature dim mismatch");

  const std::uint32_t C = model.classes;
  const std::uint32_t d = model.dim;
  Gradients grad;
  grad.dw.assign(static_cast<std::size_t>(C) * d, 0.0);
  grad.db.assign(C, 0.0);

  std::vector<double> p(C);
  std::uint64_t valid = 0;
  const std::size_t n = labels.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = labels.data[i];
    if (y == kIgnoreId) continue;
    if (y >= C) fail(errc::class_out_of_range, "label id " + std::to_string(y));
    ++valid;
    pixel_probs(model, features.pixel(i), p);
    const auto x = features.pixel(i);
    for (std::uint32_t c = 0; c < C; ++c) {
      const double dz = p[c] - (c == y ? 1.0 : 0.0);
      grad.db[c] += dz;
      double* dw = grad.dw.data() + static_cast<std::size_t>(c) * d;
      for (std::uint32_t j = 0; j < d; ++j) dw[j] += dz * static_cast<double>(x[j]);
    }
  }
  if (valid == 0) fail(errc::empty_input, "no valid pixels in gradient");
  const double inv = 1.0 / static_cast<double>(valid);
  for (double& v : grad.dw) v *= inv;
  for (double& v : grad.db) v *= inv;
  return grad;
}

double poly_lr(std::uint64_t step, std::uint64_t total_steps, double lr0, double power) {
  if (total_steps == 0) fail(errc::invalid_argument, "total_steps must be >= 1");
  if (step > total_steps)
    fail(errc::invalid_argument, "step " + std::to_string(step) + " beyond total " +
                                     std::to_string(total_steps));
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * std::pow(1.0 - frac, power);
}

TrainResult train(const ToyModel& init, std::span<const TrainSample> data, const TrainConfig& cfg) {
  check_model(init);
  check_config(cfg);

  // Pool of (sample, pixel) pairs with a real label.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pool;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const FeatureMap& f = *data[s].features;
    const LabelMap& l = *data[s].labels;
    if (f.height != l.height || f.width != l.width)
      fail(errc::shape_mismatch, "sample " + std::to_string(s) + ": features vs labels");
    if (f.dim != init.dim) fail(errc::shape_mismatch, "sample " + std::to_string(s) + ": dim");
    const std::size_t n = l.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t y = l.data[i];
      if (y == kIgnoreId) continue;
      if (y >= init.classes) fail(errc::class_out_of_range, "label id " + std::to_string(y));
      pool.emplace_back(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(i));
    }
  }
  if (pool.empty()) fail(errc::empty_input, "no valid pixels to train on");

  TrainResult result;
  result.model = init;
  result.trace.reserve(cfg.steps);

  Rng rng(cfg.seed);
  const std::uint32_t C = init.classes;
  const std::uint32_t d = init.dim;
  std::vector<double> p(C);
  std::vector<double> dw(static_cast<std::size_t>(C) * d);
  std::vector<double> db(C);
  std::vector<double> x(d);

  for (std::uint64_t step = 0; step < cfg.steps; ++step) {
    const double lr = poly_lr(step, cfg.steps, cfg.lr0, cfg.power);
    std::fill(dw.begin(), dw.end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
    double batch_loss = 0.0;

    for (std::uint32_t b = 0; b < cfg.batch_pixels; ++b) {
      const auto [s, i] = pool[rng.below(pool.size())];
      const auto xf = data[s].features->pixel(i);
      for (std::uint32_t j = 0; j < d; ++j) {
        x[j] = static_cast<double>(xf[j]);
        if (cfg.feature_noise > 0.0) x[j] += cfg.feature_noise * rng.normal();
      }
      const std::uint8_t y = data[s].labels->data[i];

      for (std::uint32_t c = 0; c < C; ++c) {
        double z = result.model.bias[c];
        const double* w = result.model.weights.data() + static_cast<std::size_t>(c) * d;
        for (std::uint32_t j = 0; j < d; ++j) z += w[j] * x[j];
        p[c] = z;
      }
      const double zmax = *std::max_element(p.begin(), p.end());
      double sum = 0.0;
      for (std::uint32_t c = 0; c < C; ++c) {
        p[c] = std::exp(p[c] - zmax);
        sum += p[c];
      }
      for (std::uint32_t c = 0; c < C; ++c) p[c] /= sum;

      batch_loss += -std::log(std::max(p[y], kLogFloor));
      for (std::uint32_t c = 0; c < C; ++c) {
        const double dz = p[c] - (c == y ? 1.0 : 0.0);
        db[c] += dz;
        double* g = dw.data() + static_cast<std::size_t>(c) * d;
        for (std::uint32_t j = 0; j < d; ++j) g[j] += dz * x[j];
      }
    }

    const double inv = 1.0 / static_cast<double>(cfg.batch_pixels);
    for (std::size_t k = 0; k < dw.size(); ++k) result.model.weights[k] -= lr * dw[k] * inv;
    for (std::uint32_t c = 0; c < C; ++c) result.model.bias[c] -= lr * db[c] * inv;
    result.trace.push_back({step, lr, batch_loss * inv});
  }
  return result;
}

SelfTrainResult self_train(const ToyModel& source, const ProbProducer& pseudo_source,
                           std::span<const FeatureMap> target_features, double threshold,
                           const TrainConfig& cfg) {
  check_model(source);
  if (!(threshold > 0.0 && threshold <= 1.0))
    fail(errc::invalid_argument, "threshold " + std::to_string(threshold) + " outside (0, 1]");
  if (target_features.empty()) fail(errc::empty_input, "no target features");

  // Stage 1: confident predictions become hard labels, the rest is ignored.
  std::vector<LabelMap> pseudo;
  pseudo.reserve(target_features.size());
  std::uint64_t annotated = 0, total = 0;
  for (const FeatureMap& f : target_features) {
    const ProbMap probs = pseudo_source(f);
    if (probs.height != f.height || probs.width != f.width)
      fail(errc::shape_mismatch, "pseudo source returned mismatched dimensions");
    const HardPrediction hard = argmax_prediction(probs);
    PseudoLabelSet set = make_pseudo_labels(hard, threshold);
    total += set.labels.pixel_count();
    for (std::uint8_t v : set.labels.data)
      if (v != kIgnoreId) ++annotated;
    pseudo.push_back(std::move(set.labels));
  }
  if (annotated == 0)
    fail(errc::empty_input, "pseudo-label coverage is 0, nothing to fine-tune on");

  // Stage 2: fine-tune a copy of the source model with a fresh schedule.
  TrainConfig ft = cfg;
  ft.steps = checked_finetune_steps(cfg);
  std::vector<TrainSample> samples;
  samples.reserve(target_features.size());
  for (std::size_t i = 0; i < target_features.size(); ++i)
    samples.push_back({&target_features[i], &pseudo[i]});

  TrainResult trained = train(source, samples, ft);
  SelfTrainResult out;
  out.model = std::move(trained.model);
  out.trace = std::move(trained.trace);
  out.pseudo_coverage = static_cast<double>(annotated) / static_cast<double>(total);
  return out;
}

double gradient_check(const ToyModel& model, const FeatureMap& features, const LabelMap& labels,
                      double h) {
  if (!(h > 0.0)) fail(errc::invalid_argument, "step size must be positive");
  const Gradients analytic = ce_gradient(model, features, labels);

  ToyModel probe = model;
  double max_rel = 0.0;
  auto central = [&](double& param, double g) {
    const double saved = param;
    param = saved + h;
    const double up = model_loss(probe, features, labels);
    param = saved - h;
    const double down = model_loss(probe, features, labels);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(g), std::abs(numeric));
    if (scale < 1e-8) return;  // both vanish; relative error is meaningless
    max_rel = std::max(max_rel, std::abs(g - numeric) / scale);
  };

  for (std::size_t k = 0; k < probe.weights.size(); ++k) central(probe.weights[k], analytic.dw[k]);
  for (std::size_t c = 0; c < probe.bias.size(); ++c) central(probe.bias[c], analytic.db[c]);
  return max_rel;
}

void save_model(const ToyModel& model, const std::filesystem::path& path) {
  check_model(model);
  nlohmann::json doc;
  doc["classes"] = model.classes;
  doc["dim"] = model.dim;
  doc["weights"] = model.weights;
  doc["bias"] = model.bias;
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) fail(errc::io_failure, "write failed on " + path.string());
}

ToyModel load_model(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) fail(errc::missing_file, path.string());
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
    ToyModel model;
    model.classes = doc.at("classes").get<std::uint32_t>();
    model.dim = doc.at("dim").get<std::uint32_t>();
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<std::vector<double>>();
    check_model(model);
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, path.string() + ": " + e.what());
  }
}

std::string trace_csv(std::span<const TracePoint> trace) {
  std::string out = "step,lr,loss\n";
  char buf[96];
  for (const auto& t : trace) {
    std::snprintf(buf, sizeof(buf), "%llu,%.10g,%.10g\n",
                  static_cast<unsigned long long>(t.step), t.lr, t.loss);
    out += buf;
  }
  return out;
}

}  // namespace segcal
