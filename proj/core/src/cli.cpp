#include "segcal/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "segcal/augment.hpp"
#include "segcal/calibration.hpp"
#include "segcal/ensemble.hpp"
#include "segcal/pseudo_label.hpp"
#include "segcal/seg_metrics.hpp"
#include "segcal/svg.hpp"
#include "segcal/synthgen.hpp"
#include "segcal/tensor_io.hpp"
#include "segcal/toy_model.hpp"

namespace segcal {

namespace {

using nlohmann::json;

struct RunReport {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json metrics = json::object();
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(errc::io_failure, "write failed on " + path.string());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// deposited into per-index slots; any later reduction happens in index
/// order, so outcomes do not depend on the thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

unsigned resolve_threads(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("SEGCAL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

/// Loads the entry's probability map: a single member when `member` >= 0,
/// otherwise the Eq.-3 average of all listed members in manifest order.
ProbMap entry_probmap(const Manifest& manifest, const ManifestEntry& entry, int member) {
  if (entry.prob_paths.empty())
    fail(errc::invalid_argument, "entry '" + entry.id + "' lists no probability maps");
  auto check = [&](const ProbMap& p) {
    if (p.classes != manifest.classes)
      fail(errc::inconsistent_classes,
           "entry '" + entry.id + "': C=" + std::to_string(p.classes) + ", manifest says " +
               std::to_string(manifest.classes));
  };
  if (member >= 0) {
    if (static_cast<std::size_t>(member) >= entry.prob_paths.size())
      fail(errc::invalid_argument, "entry '" + entry.id + "' has no member " +
                                       std::to_string(member));
    ProbMap p = read_probmap(entry.prob_paths[static_cast<std::size_t>(member)]);
    check(p);
    return p;
  }
  std::vector<ProbMap> members;
  members.reserve(entry.prob_paths.size());
  for (const auto& path : entry.prob_paths) {
    members.push_back(read_probmap(path));
    check(members.back());
  }
  if (members.size() == 1) return std::move(members.front());
  return ensemble_average(std::span<const ProbMap>(members));
}

std::vector<double> parse_threshold_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    const std::string tok = csv.substr(pos, comma - pos);
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      fail(errc::invalid_argument, "bad threshold '" + tok + "'");
    }
    pos = comma + 1;
  }
  return out;
}

// Shared flags ---------------------------------------------------------------

struct CommonOpts {
  std::string manifest_path;
  std::string report_path;
  int member = -1;
  int threads = 0;
  bool strict = false;
};

void add_manifest_opts(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--manifest", opts.manifest_path, "Dataset manifest (JSON)")->required();
  cmd->add_option("--member", opts.member,
                  "Use only this prob-map index per entry (default: ensemble of all)");
  cmd->add_option("--threads", opts.threads,
                  "Worker threads for per-entry accumulation (env SEGCAL_THREADS)");
  cmd->add_flag("--strict", opts.strict, "Eagerly validate manifest dimensions and classes");
}

Manifest open_manifest(const CommonOpts& opts, RunReport& report) {
  report.inputs.push_back(opts.manifest_path);
  Manifest manifest = load_manifest(opts.manifest_path);
  validate_manifest(manifest, opts.strict);
  return manifest;
}

// Subcommand payloads ---------------------------------------------------------

struct EvalOpts : CommonOpts {
  std::string csv_path;
};

void run_eval(const EvalOpts& opts, RunReport& report) {
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");

  std::vector<ConfusionMatrix> parts(manifest.entries.size());
  parallel_for(manifest.entries.size(), resolve_threads(opts.threads), [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    const LabelMap gt = read_labelmap(entry.label_path);
    const ProbMap probs = entry_probmap(manifest, entry, opts.member);
    const HardPrediction pred = argmax_prediction(probs);
    ConfusionMatrix cm(manifest.classes);
    cm.accumulate(pred.labels, gt);
    parts[i] = std::move(cm);
  });
  ConfusionMatrix cm(manifest.classes);
  for (const auto& part : parts) cm.merge(part);

  const MetricReport metrics = make_report(cm);
  report.metrics = json::parse(metric_report_json(metrics));
  if (!opts.csv_path.empty()) {
    write_text(opts.csv_path, metric_report_csv(metrics));
    report.outputs.push_back(opts.csv_path);
  }
}

struct EceOpts : CommonOpts {
  unsigned bins = 15;
};

CalibrationBins accumulate_manifest_calibration(const Manifest& manifest, unsigned bins,
                                                int member, unsigned threads) {
  std::vector<CalibrationBins> parts(manifest.entries.size());
  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    const LabelMap gt = read_labelmap(entry.label_path);
    const ProbMap probs = entry_probmap(manifest, entry, member);
    CalibrationBins acc(bins);
    acc.accumulate(probs, gt);
    parts[i] = std::move(acc);
  });
  CalibrationBins acc(bins);
  for (const auto& part : parts) acc.merge(part);
  return acc;
}

void run_ece(const EceOpts& opts, RunReport& report) {
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");
  const CalibrationBins acc = accumulate_manifest_calibration(
      manifest, opts.bins, opts.member, resolve_threads(opts.threads));
  report.metrics["ece"] = acc.ece();
  report.metrics["bins"] = acc.bins();
  report.metrics["pixels"] = acc.total();
}

struct ReliabilityOpts : EceOpts {
  std::string csv_path;
  std::string hist_path;
  std::string svg_path;
};

void run_reliability(const ReliabilityOpts& opts, RunReport& report) {
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");
  const CalibrationBins acc = accumulate_manifest_calibration(
      manifest, opts.bins, opts.member, resolve_threads(opts.threads));

  report.metrics["ece"] = acc.ece();
  report.metrics["bins"] = acc.bins();
  report.metrics["pixels"] = acc.total();
  auto bins_json = json::array();
  for (const auto& r : acc.reliability_data()) {
    json b;
    b["lo"] = r.lo;
    b["hi"] = r.hi;
    b["count"] = r.count;
    b["weight"] = r.weight;
    if (r.avg_conf) b["avg_conf"] = *r.avg_conf;
    if (r.accuracy) b["accuracy"] = *r.accuracy;
    bins_json.push_back(std::move(b));
  }
  report.metrics["reliability"] = std::move(bins_json);

  if (!opts.csv_path.empty()) {
    write_text(opts.csv_path, reliability_csv(acc));
    report.outputs.push_back(opts.csv_path);
  }
  if (!opts.hist_path.empty()) {
    write_text(opts.hist_path, histogram_csv(acc));
    report.outputs.push_back(opts.hist_path);
  }
  if (!opts.svg_path.empty()) {
    write_text(opts.svg_path, reliability_svg(acc));
    report.outputs.push_back(opts.svg_path);
  }
}

struct EnsembleOpts {
  std::vector<std::string> member_paths;
  std::string out_path;
  std::string confidence_path;
};

void run_ensemble(const EnsembleOpts& opts, RunReport& report) {
  std::vector<ProbMap> members;
  members.reserve(opts.member_paths.size());
  for (const auto& path : opts.member_paths) {
    report.inputs.push_back(path);
    members.push_back(read_probmap(path));
  }
  const ProbMap fused = ensemble_average(std::span<const ProbMap>(members));
  write_probmap(fused, opts.out_path);
  report.outputs.push_back(opts.out_path);
  report.metrics["members"] = members.size();
  report.metrics["height"] = fused.height;
  report.metrics["width"] = fused.width;
  report.metrics["classes"] = fused.classes;

  if (!opts.confidence_path.empty()) {
    const HardPrediction pred = argmax_prediction(fused);
    FeatureMap conf;
    conf.height = fused.height;
    conf.width = fused.width;
    conf.dim = 1;
    conf.data = pred.confidence;
    write_featuremap(conf, opts.confidence_path);
    report.outputs.push_back(opts.confidence_path);
  }
}

struct SweepOpts : CommonOpts {
  std::string thresholds_csv;
  std::string csv_path;
  std::string svg_path;
};

void run_sweep(const SweepOpts& opts, RunReport& report) {
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");
  const std::vector<double> grid =
      opts.thresholds_csv.empty() ? default_sweep_grid() : parse_threshold_list(opts.thresholds_csv);

  std::vector<SweepCounts> parts(manifest.entries.size());
  parallel_for(manifest.entries.size(), resolve_threads(opts.threads), [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    const LabelMap gt = read_labelmap(entry.label_path);
    const ProbMap probs = entry_probmap(manifest, entry, opts.member);
    SweepCounts counts(grid);
    counts.accumulate(argmax_prediction(probs), gt);
    parts[i] = std::move(counts);
  });
  SweepCounts counts(grid);
  for (const auto& part : parts) counts.merge(part);
  const std::vector<SweepPoint> points = counts.points();

  auto points_json = json::array();
  for (const auto& p : points) {
    json e;
    e["threshold"] = p.threshold;
    if (p.precision) e["precision"] = *p.precision;
    e["recall"] = p.recall;
    e["coverage"] = p.coverage;
    e["annotated"] = p.annotated;
    e["correct"] = p.correct_annotated;
    e["valid"] = p.valid;
    points_json.push_back(std::move(e));
  }
  report.metrics["sweep"] = std::move(points_json);

  if (!opts.csv_path.empty()) {
    write_text(opts.csv_path, sweep_csv(points));
    report.outputs.push_back(opts.csv_path);
  }
  if (!opts.svg_path.empty()) {
    write_text(opts.svg_path, sweep_svg(points));
    report.outputs.push_back(opts.svg_path);
  }
}

struct PseudoOpts : CommonOpts {
  double threshold = 0.9;
  std::string outdir;
  std::string format = "pgm";
};

void run_pseudo(const PseudoOpts& opts, RunReport& report) {
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");
  const LabelFormat format = opts.format == "segl" ? LabelFormat::segl : LabelFormat::pgm;
  if (opts.format != "pgm" && opts.format != "segl")
    fail(errc::invalid_argument, "--format must be pgm or segl");
  std::filesystem::create_directories(opts.outdir);

  std::uint64_t annotated = 0, pixels = 0, valid = 0, valid_annotated = 0, valid_correct = 0;
  auto entries_json = json::array();
  for (const ManifestEntry& entry : manifest.entries) {
    const LabelMap gt = read_labelmap(entry.label_path);
    const ProbMap probs = entry_probmap(manifest, entry, opts.member);
    const HardPrediction pred = argmax_prediction(probs);
    PseudoLabelSet set = make_pseudo_labels(pred, opts.threshold);
    const PseudoQuality quality = pseudo_quality(set, gt);

    const std::string name = entry.id + (format == LabelFormat::pgm ? ".pgm" : ".segl");
    const std::filesystem::path out_path = std::filesystem::path(opts.outdir) / name;
    write_labelmap(set.labels, out_path, format);
    report.outputs.push_back(out_path.string());

    json e;
    e["id"] = entry.id;
    e["coverage"] = set.stats.coverage;
    e["coverage_vs_valid"] = quality.coverage_vs_valid;
    if (quality.precision) e["precision"] = *quality.precision;
    entries_json.push_back(std::move(e));

    pixels += set.labels.pixel_count();
    for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
      if (set.labels.data[i] != kIgnoreId) ++annotated;
      if (gt.data[i] == kIgnoreId) continue;
      ++valid;
      if (set.labels.data[i] == kIgnoreId) continue;
      ++valid_annotated;
      if (set.labels.data[i] == gt.data[i]) ++valid_correct;
    }
  }
  report.metrics["threshold"] = opts.threshold;
  report.metrics["coverage"] = pixels ? static_cast<double>(annotated) / pixels : 0.0;
  if (valid > 0)
    report.metrics["coverage_vs_valid"] = static_cast<double>(valid_annotated) / valid;
  if (valid_annotated > 0)
    report.metrics["precision"] = static_cast<double>(valid_correct) / valid_annotated;
  report.metrics["entries"] = std::move(entries_json);
}

struct JitterOpts {
  std::string input_path;
  std::string out_path;
  double brightness = 0.25;
  double contrast_lo = 0.5, contrast_hi = 1.5;
  double saturation_lo = 1.0, saturation_hi = 3.0;
  double hue = 0.25;
  bool one_sided = false;
  std::uint64_t seed = 0;
};

void run_jitter(const JitterOpts& opts, RunReport& report) {
  report.inputs.push_back(opts.input_path);
  const RgbImage input = read_ppm(opts.input_path);
  JitterConfig cfg;
  cfg.brightness_max = opts.brightness;
  cfg.contrast_lo = opts.contrast_lo;
  cfg.contrast_hi = opts.contrast_hi;
  cfg.saturation_lo = opts.saturation_lo;
  cfg.saturation_hi = opts.saturation_hi;
  cfg.hue_max = opts.hue;
  cfg.one_sided = opts.one_sided;
  cfg.seed = opts.seed;

  Rng rng(cfg.seed);
  const JitterParams params = sample_jitter(cfg, rng);
  RgbImage out = adjust_brightness(input, params.brightness);
  out = adjust_contrast(out, params.contrast);
  out = adjust_saturation(out, params.saturation);
  out = adjust_hue(out, params.hue);
  write_ppm(out, opts.out_path);
  report.outputs.push_back(opts.out_path);
  report.metrics["brightness"] = params.brightness;
  report.metrics["contrast"] = params.contrast;
  report.metrics["saturation"] = params.saturation;
  report.metrics["hue"] = params.hue;
  report.metrics["seed"] = opts.seed;
}

struct SynthOpts {
  std::string outdir;
  std::string spec_path;
  unsigned classes = 5;
  unsigned dim = 8;
  double separation = 2.5;
  double shift = 1.0;
  double region_scale = 8.0;
  unsigned scenes = 8;
  unsigned height = 64;
  unsigned width = 64;
  std::uint64_t seed = 0;
  bool posteriors = false;
};

void run_synth(const SynthOpts& opts, RunReport& report) {
  DomainSpec spec;
  if (!opts.spec_path.empty()) {
    report.inputs.push_back(opts.spec_path);
    spec = load_spec(opts.spec_path);
  } else {
    spec = make_gaussian_spec(opts.classes, opts.dim, opts.separation, opts.shift,
                              opts.region_scale, opts.seed);
  }
  const std::filesystem::path root(opts.outdir);
  std::filesystem::create_directories(root / "source");
  std::filesystem::create_directories(root / "target");

  save_spec(spec, root / "spec.json");
  report.outputs.push_back((root / "spec.json").string());

  const SynthBenchmark bench =
      make_benchmark(spec, opts.scenes, opts.height, opts.width, opts.seed);

  auto export_domain = [&](const std::vector<Scene>& scenes, Domain domain,
                           const std::string& name) {
    json manifest;
    manifest["classes"] = spec.classes;
    auto entries = json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%04zu", i);
      const std::string id = name + "_" + idx;
      const std::string label_rel = name + "/" + id + ".pgm";
      const std::string feat_rel = name + "/" + id + ".segp";
      write_labelmap(scenes[i].labels, root / label_rel);
      write_featuremap(scenes[i].features, root / feat_rel);
      report.outputs.push_back((root / label_rel).string());
      report.outputs.push_back((root / feat_rel).string());
      json entry;
      entry["id"] = id;
      entry["label"] = label_rel;
      entry["features"] = feat_rel;
      auto probs = json::array();
      if (opts.posteriors) {
        const std::string post_rel = name + "/" + id + ".post.segp";
        write_probmap(bayes_posterior(spec, scenes[i].features, domain), root / post_rel);
        report.outputs.push_back((root / post_rel).string());
        probs.push_back(post_rel);
      }
      entry["probs"] = std::move(probs);
      entries.push_back(std::move(entry));
    }
    manifest["entries"] = std::move(entries);
    const std::filesystem::path manifest_path = root / (name + ".json");
    write_text(manifest_path, manifest.dump(2) + "\n");
    report.outputs.push_back(manifest_path.string());
  };
  export_domain(bench.source, Domain::source, "source");
  export_domain(bench.target, Domain::target, "target");

  report.metrics["classes"] = spec.classes;
  report.metrics["dim"] = spec.dim;
  report.metrics["scenes_per_domain"] = opts.scenes;
  report.metrics["height"] = opts.height;
  report.metrics["width"] = opts.width;
  report.metrics["seed"] = opts.seed;
}

struct TrainOpts : CommonOpts {
  std::uint64_t steps = 2000;
  unsigned batch = 256;
  double lr0 = 0.01;
  double power = 0.9;
  std::uint64_t seed = 0;
  double feature_noise = 0.0;
  std::string out_path;
  std::string trace_path;
};

struct LoadedScenes {
  std::vector<FeatureMap> features;
  std::vector<LabelMap> labels;
};

LoadedScenes load_feature_scenes(const Manifest& manifest) {
  LoadedScenes data;
  for (const ManifestEntry& entry : manifest.entries) {
    if (!entry.feature_path)
      fail(errc::invalid_argument, "entry '" + entry.id + "' has no features");
    data.features.push_back(read_featuremap(*entry.feature_path));
    data.labels.push_back(read_labelmap(entry.label_path));
  }
  return data;
}

void run_train(const TrainOpts& opts, RunReport& report) {
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");
  const LoadedScenes data = load_feature_scenes(manifest);

  TrainConfig cfg;
  cfg.steps = opts.steps;
  cfg.batch_pixels = opts.batch;
  cfg.lr0 = opts.lr0;
  cfg.power = opts.power;
  cfg.seed = opts.seed;
  cfg.feature_noise = opts.feature_noise;

  std::vector<TrainSample> samples;
  for (std::size_t i = 0; i < data.features.size(); ++i)
    samples.push_back({&data.features[i], &data.labels[i]});

  const ToyModel init = make_zero_model(manifest.classes, data.features.front().dim);
  const TrainResult result = train(init, samples, cfg);
  save_model(result.model, opts.out_path);
  report.outputs.push_back(opts.out_path);
  if (!opts.trace_path.empty()) {
    write_text(opts.trace_path, trace_csv(result.trace));
    report.outputs.push_back(opts.trace_path);
  }

  // Training-set accuracy, for quick sanity checks.
  ConfusionMatrix cm(manifest.classes);
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const HardPrediction pred = argmax_prediction(forward(result.model, data.features[i]));
    cm.accumulate(pred.labels, data.labels[i]);
  }
  report.metrics["steps"] = cfg.steps;
  report.metrics["final_loss"] = result.trace.empty() ? 0.0 : result.trace.back().loss;
  report.metrics["train_pixel_accuracy"] = cm.pixel_accuracy();
}

struct SelfTrainOpts : CommonOpts {
  std::string model_path;
  std::vector<std::string> member_paths;
  double threshold = 0.9;
  std::uint64_t finetune_steps = 500;
  unsigned batch = 256;
  double lr0 = 0.01;
  double power = 0.9;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string trace_path;
};

void run_selftrain(const SelfTrainOpts& opts, RunReport& report) {
  report.inputs.push_back(opts.model_path);
  const ToyModel source = load_model(opts.model_path);
  const Manifest manifest = open_manifest(opts, report);
  if (manifest.entries.empty()) fail(errc::empty_input, "manifest has no entries");
  const LoadedScenes data = load_feature_scenes(manifest);

  std::vector<ToyModel> members;
  for (const auto& path : opts.member_paths) {
    report.inputs.push_back(path);
    members.push_back(load_model(path));
  }

  ProbProducer producer;
  if (members.empty()) {
    producer = [&source](const FeatureMap& f) { return forward(source, f); };
  } else {
    producer = [&members](const FeatureMap& f) {
      std::vector<ProbMap> outputs;
      outputs.reserve(members.size());
      for (const auto& m : members) outputs.push_back(forward(m, f));
      return ensemble_average(std::span<const ProbMap>(outputs));
    };
  }

  TrainConfig cfg;
  cfg.steps = std::max<std::uint64_t>(1, opts.finetune_steps * 4);  // train() unused here
  cfg.finetune_steps = opts.finetune_steps;
  cfg.batch_pixels = opts.batch;
  cfg.lr0 = opts.lr0;
  cfg.power = opts.power;
  cfg.seed = opts.seed;

  const SelfTrainResult result =
      self_train(source, producer, data.features, opts.threshold, cfg);
  save_model(result.model, opts.out_path);
  report.outputs.push_back(opts.out_path);
  if (!opts.trace_path.empty()) {
    write_text(opts.trace_path, trace_csv(result.trace));
    report.outputs.push_back(opts.trace_path);
  }

  // Before/after accuracy against the manifest labels.
  ConfusionMatrix before(manifest.classes), after(manifest.classes);
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    before.accumulate(argmax_prediction(forward(source, data.features[i])).labels,
                      data.labels[i]);
    after.accumulate(argmax_prediction(forward(result.model, data.features[i])).labels,
                     data.labels[i]);
  }
  report.metrics["threshold"] = opts.threshold;
  report.metrics["pseudo_coverage"] = result.pseudo_coverage;
  report.metrics["members"] = members.size();
  report.metrics["finetune_steps"] = opts.finetune_steps;
  report.metrics["target_accuracy_before"] = before.pixel_accuracy();
  report.metrics["target_accuracy_after"] = after.pixel_accuracy();
}

struct GradCheckOpts {
  unsigned classes = 3;
  unsigned dim = 4;
  unsigned pixels = 64;
  double h = 1e-6;
  std::uint64_t seed = 0;
};

void run_gradcheck(const GradCheckOpts& opts, RunReport& report) {
  if (opts.classes == 0 || opts.dim == 0 || opts.pixels == 0)
    fail(errc::invalid_argument, "classes, dim, pixels must be positive");
  Rng rng(opts.seed);
  ToyModel model = make_zero_model(opts.classes, opts.dim);
  for (auto& w : model.weights) w = 0.5 * rng.normal();
  for (auto& b : model.bias) b = 0.5 * rng.normal();

  FeatureMap features;
  features.height = 1;
  features.width = opts.pixels;
  features.dim = opts.dim;
  features.data.resize(static_cast<std::size_t>(opts.pixels) * opts.dim);
  for (auto& v : features.data) v = static_cast<float>(rng.normal());

  LabelMap labels;
  labels.height = 1;
  labels.width = opts.pixels;
  labels.data.resize(opts.pixels);
  for (auto& y : labels.data) y = static_cast<std::uint8_t>(rng.below(opts.classes));

  const double max_rel = gradient_check(model, features, labels, opts.h);
  report.metrics["max_relative_error"] = max_rel;
  report.metrics["h"] = opts.h;
  report.metrics["classes"] = opts.classes;
  report.metrics["dim"] = opts.dim;
  report.metrics["pixels"] = opts.pixels;
  report.metrics["seed"] = opts.seed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"segcal: segmentation uncertainty & calibration toolkit"};
  app.name("segcal");
  app.require_subcommand(1);

  std::string report_path;
  app.add_option("--report", report_path, "Write the JSON run report here instead of stdout")
      ->configurable(false);

  EvalOpts eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Segmentation metrics (per-class IoU, mIoU, pixel accuracy)");
  add_manifest_opts(eval_cmd, eval_opts);
  eval_cmd->add_option("--csv", eval_opts.csv_path, "Also write a one-row CSV report");

  EceOpts ece_opts;
  auto* ece_cmd = app.add_subcommand("ece", "Expected calibration error (percent)");
  add_manifest_opts(ece_cmd, ece_opts);
  ece_cmd->add_option("--bins", ece_opts.bins, "Confidence bins (default 15)");

  ReliabilityOpts rel_opts;
  auto* rel_cmd = app.add_subcommand("reliability", "Reliability-diagram data (CSV/SVG)");
  add_manifest_opts(rel_cmd, rel_opts);
  rel_cmd->add_option("--bins", rel_opts.bins, "Confidence bins (default 15)");
  rel_cmd->add_option("--out", rel_opts.csv_path, "Reliability CSV path");
  rel_cmd->add_option("--hist", rel_opts.hist_path, "Confidence histogram CSV path");
  rel_cmd->add_option("--svg", rel_opts.svg_path, "Reliability diagram SVG path");

  EnsembleOpts ens_opts;
  auto* ens_cmd = app.add_subcommand("ensemble", "Average member probability maps (SEGP in, SEGP out)");
  ens_cmd->add_option("--out", ens_opts.out_path, "Output SEGP path")->required();
  ens_cmd->add_option("--confidence", ens_opts.confidence_path,
                      "Optional confidence raster (SEGP, C=1)");
  ens_cmd->add_option("members", ens_opts.member_paths, "Member SEGP files")
      ->required()
      ->expected(-1);

  SweepOpts sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Precision/recall/coverage over confidence thresholds");
  add_manifest_opts(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--thresholds", sweep_opts.thresholds_csv,
                        "Comma-separated thresholds (default 0.1..0.9,0.95,0.99,0.995)");
  sweep_cmd->add_option("--out", sweep_opts.csv_path, "Sweep CSV path");
  sweep_cmd->add_option("--svg", sweep_opts.svg_path, "Sweep curve SVG path");

  PseudoOpts pseudo_opts;
  auto* pseudo_cmd = app.add_subcommand("pseudo", "Export confidence-thresholded pseudo-labels");
  add_manifest_opts(pseudo_cmd, pseudo_opts);
  pseudo_cmd->add_option("--threshold", pseudo_opts.threshold, "Confidence threshold (default 0.9)");
  pseudo_cmd->add_option("--outdir", pseudo_opts.outdir, "Output directory")->required();
  pseudo_cmd->add_option("--format", pseudo_opts.format, "Label format: pgm or segl");

  JitterOpts jitter_opts;
  auto* jitter_cmd = app.add_subcommand("jitter", "Color-jitter a PPM image");
  jitter_cmd->add_option("input", jitter_opts.input_path, "Input PPM (P6)")->required();
  jitter_cmd->add_option("--out", jitter_opts.out_path, "Output PPM path")->required();
  jitter_cmd->add_option("--brightness", jitter_opts.brightness, "Max brightness delta (default 0.25)");
  jitter_cmd->add_option("--contrast-lo", jitter_opts.contrast_lo, "Contrast range low (default 0.5)");
  jitter_cmd->add_option("--contrast-hi", jitter_opts.contrast_hi, "Contrast range high (default 1.5)");
  jitter_cmd->add_option("--saturation-lo", jitter_opts.saturation_lo, "Saturation range low (default 1.0)");
  jitter_cmd->add_option("--saturation-hi", jitter_opts.saturation_hi, "Saturation range high (default 3.0)");
  jitter_cmd->add_option("--hue", jitter_opts.hue, "Max hue offset (default 0.25)");
  jitter_cmd->add_flag("--one-sided", jitter_opts.one_sided,
                       "Draw brightness/hue from [0, max) instead of [-max, max)");
  jitter_cmd->add_option("--seed", jitter_opts.seed, "Random seed");

  SynthOpts synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic domain-shift benchmark");
  synth_cmd->add_option("--outdir", synth_opts.outdir, "Output directory")->required();
  synth_cmd->add_option("--spec", synth_opts.spec_path, "Domain spec JSON (default: random spec)");
  synth_cmd->add_option("--classes", synth_opts.classes, "Classes for the random spec (default 5)");
  synth_cmd->add_option("--dim", synth_opts.dim, "Feature dim for the random spec (default 8)");
  synth_cmd->add_option("--separation", synth_opts.separation, "Class-mean norm (default 2.5)");
  synth_cmd->add_option("--shift", synth_opts.shift, "Target-domain mean shift norm (default 1.0)");
  synth_cmd->add_option("--region-scale", synth_opts.region_scale, "Label region side (default 8)");
  synth_cmd->add_option("--scenes", synth_opts.scenes, "Scenes per domain (default 8)");
  synth_cmd->add_option("--height", synth_opts.height, "Scene height (default 64)");
  synth_cmd->add_option("--width", synth_opts.width, "Scene width (default 64)");
  synth_cmd->add_option("--seed", synth_opts.seed, "Random seed");
  synth_cmd->add_flag("--posteriors", synth_opts.posteriors,
                      "Also export Bayes-posterior probability maps");

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the linear softmax pixel classifier");
  add_manifest_opts(train_cmd, train_opts);
  train_cmd->add_option("--steps", train_opts.steps, "SGD steps (default 2000)");
  train_cmd->add_option("--batch", train_opts.batch, "Pixels per batch (default 256)");
  train_cmd->add_option("--lr0", train_opts.lr0, "Initial learning rate (default 0.01)");
  train_cmd->add_option("--power", train_opts.power, "Polynomial decay power (default 0.9)");
  train_cmd->add_option("--seed", train_opts.seed, "Random seed");
  train_cmd->add_option("--feature-noise", train_opts.feature_noise,
                        "Gaussian feature noise stddev during training");
  train_cmd->add_option("--out", train_opts.out_path, "Model checkpoint path")->required();
  train_cmd->add_option("--trace", train_opts.trace_path, "Loss trace CSV path");

  SelfTrainOpts st_opts;
  auto* st_cmd = app.add_subcommand("selftrain", "Two-stage self-training on pseudo-labels");
  add_manifest_opts(st_cmd, st_opts);
  st_cmd->add_option("--model", st_opts.model_path, "Source model checkpoint")->required();
  st_cmd->add_option("--members", st_opts.member_paths,
                     "Ensemble member checkpoints for pseudo-labeling (default: the source model)");
  st_cmd->add_option("--threshold", st_opts.threshold, "Confidence threshold (default 0.9)");
  st_cmd->add_option("--finetune-steps", st_opts.finetune_steps, "Fine-tune steps (default 500)");
  st_cmd->add_option("--batch", st_opts.batch, "Pixels per batch (default 256)");
  st_cmd->add_option("--lr0", st_opts.lr0, "Fine-tune initial learning rate (default 0.01)");
  st_cmd->add_option("--power", st_opts.power, "Polynomial decay power (default 0.9)");
  st_cmd->add_option("--seed", st_opts.seed, "Random seed");
  st_cmd->add_option("--out", st_opts.out_path, "Fine-tuned checkpoint path")->required();
  st_cmd->add_option("--trace", st_opts.trace_path, "Loss trace CSV path");

  GradCheckOpts gc_opts;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradient");
  gc_cmd->add_option("--classes", gc_opts.classes, "Classes (default 3)");
  gc_cmd->add_option("--dim", gc_opts.dim, "Feature dim (default 4)");
  gc_cmd->add_option("--pixels", gc_opts.pixels, "Pixels (default 64)");
  gc_cmd->add_option("--step", gc_opts.h, "Finite-difference step (default 1e-6)");
  gc_cmd->add_option("--seed", gc_opts.seed, "Random seed");

  // CLI11 wants reversed args without the program name.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);  // prints the (sub)command help, exit 0
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  // Subcommand --help lands here through CLI11's help flags on the sub-App.
  RunReport report;
  const auto started = std::chrono::steady_clock::now();
  try {
    if (app.got_subcommand(eval_cmd)) {
      report.command = "eval";
      run_eval(eval_opts, report);
    } else if (app.got_subcommand(ece_cmd)) {
      report.command = "ece";
      run_ece(ece_opts, report);
    } else if (app.got_subcommand(rel_cmd)) {
      report.command = "reliability";
      run_reliability(rel_opts, report);
    } else if (app.got_subcommand(ens_cmd)) {
      report.command = "ensemble";
      run_ensemble(ens_opts, report);
    } else if (app.got_subcommand(sweep_cmd)) {
      report.command = "sweep";
      run_sweep(sweep_opts, report);
    } else if (app.got_subcommand(pseudo_cmd)) {
      report.command = "pseudo";
      run_pseudo(pseudo_opts, report);
    } else if (app.got_subcommand(jitter_cmd)) {
      report.command = "jitter";
      run_jitter(jitter_opts, report);
    } else if (app.got_subcommand(synth_cmd)) {
      report.command = "synth";
      run_synth(synth_opts, report);
    } else if (app.got_subcommand(train_cmd)) {
      report.command = "train";
      run_train(train_opts, report);
    } else if (app.got_subcommand(st_cmd)) {
      report.command = "selftrain";
      run_selftrain(st_opts, report);
    } else if (app.got_subcommand(gc_cmd)) {
      report.command = "gradcheck";
      run_gradcheck(gc_opts, report);
    }
  } catch (const Error& e) {
    err << "segcal: " << e.what() << "\n";
    return is_io_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "segcal: " << e.what() << "\n";
    return 1;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json doc;
  doc["command"] = report.command;
  doc["inputs"] = report.inputs;
  doc["outputs"] = report.outputs;
  doc["metrics"] = report.metrics;
  doc["wall_time"] = wall;
  const std::string text = doc.dump(2) + "\n";
  if (!report_path.empty()) {
    try {
      write_text(report_path, text);
    } catch (const Error& e) {
      err << "segcal: " << e.what() << "\n";
      return 2;
    }
  } else {
    out << text;
  }
  return 0;
}

}  // namespace segcal
