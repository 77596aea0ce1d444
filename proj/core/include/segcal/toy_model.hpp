#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "segcal/tensor_io.hpp"

namespace segcal {

/// Linear softmax pixel classifier: logits z = W x + b, parameters in f64.
struct ToyModel {
  std::uint32_t classes = 0;
  std::uint32_t dim = 0;
  std::vector<double> weights;  // C x d, row-major
  std::vector<double> bias;     // C

  bool operator==(const ToyModel&) const = default;
};

ToyModel make_zero_model(std::uint32_t classes, std::uint32_t dim);

struct TrainConfig {
  std::uint64_t steps = 2000;
  std::uint32_t batch_pixels = 256;
  double lr0 = 0.01;
  double power = 0.9;
  std::uint64_t seed = 0;
  std::uint64_t finetune_steps = 0;  // 0 means steps / 4
  double feature_noise = 0.0;        // stddev of Gaussian noise added to batch
                                     // features; ensemble-diversity knob
};

/// Numerically stable softmax of W x + b per pixel, computed in f64 and
/// rounded to f32 on output.
ProbMap forward(const ToyModel& model, const FeatureMap& features);

/// Mean over valid pixels of -log p(true class), probabilities floored at
/// 1e-12 before the log.
double ce_loss(const ProbMap& probs, const LabelMap& labels);

/// Same loss on the f64 forward path, without the f32 rounding of ProbMap.
/// This is what gradient checking differentiates.
double model_loss(const ToyModel& model, const FeatureMap& features, const LabelMap& labels);

struct Gradients {
  std::vector<double> dw;  // C x d
  std::vector<double> db;  // C
};

/// Analytic cross-entropy gradient: dz_i = (p_i - onehot(y_i)) / N_valid,
/// dW = sum dz_i x_i^T, db = sum dz_i. Ignore pixels contribute nothing.
Gradients ce_gradient(const ToyModel& model, const FeatureMap& features, const LabelMap& labels);

/// lr0 * (1 - step/total_steps)^power. step must not exceed total_steps.
double poly_lr(std::uint64_t step, std::uint64_t total_steps, double lr0, double power);

struct TracePoint {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ToyModel model;
  std::vector<TracePoint> trace;
};

/// Non-owning (features, labels) pair used as training data.
struct TrainSample {
  const FeatureMap* features = nullptr;
  const LabelMap* labels = nullptr;
};

/// Minibatch SGD over the pooled valid pixels of all samples, with the
/// polynomial schedule. Bitwise deterministic given (data, config, seed).
TrainResult train(const ToyModel& init, std::span<const TrainSample> data, const TrainConfig& cfg);

using ProbProducer = std::function<ProbMap(const FeatureMap&)>;

struct SelfTrainResult {
  ToyModel model;
  std::vector<TracePoint> trace;
  double pseudo_coverage = 0.0;  // fraction of target pixels that got a label
};

/// Two-stage self-training: generate hard pseudo-labels on the target
/// features at `threshold` using `pseudo_source`, then fine-tune a copy of
/// `source` on them for the fine-tune budget with a fresh schedule.
SelfTrainResult self_train(const ToyModel& source, const ProbProducer& pseudo_source,
                           std::span<const FeatureMap> target_features, double threshold,
                           const TrainConfig& cfg);

/// Central finite differences on every parameter against the analytic
/// gradient; returns the max relative error. Intended for small instances.
double gradient_check(const ToyModel& model, const FeatureMap& features, const LabelMap& labels,
                      double h);

// Checkpoints: JSON {classes, dim, weights (row-major), bias}.
void save_model(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_model(const std::filesystem::path& path);

/// CSV with columns step, lr, loss.
std::string trace_csv(std::span<const TracePoint> trace);

}  // namespace segcal
