// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "gchk/byte_io.hpp"
#include "gchk/config.hpp"
#include "gchk/parallel.hpp"

namespace gchk::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool json_logs = false;
};

class Logger {
 public:
  Logger(std::ostream& err, bool json_lines) : err_(err), json_(json_lines) {}

  void info(const std::string& event, ojson fields = ojson::object()) const {
    if (json_) {
      ojson line = {{"level", "info"}, {"event", event}};
      line.update(fields);
      err_ << line.dump() << '\n';
    } else {
      err_ << "gchk: " << event;
      for (const auto& [key, value] : fields.items()) err_ << ' ' << key << '=' << value.dump();
      err_ << '\n';
    }
  }

 private:
  std::ostream& err_;
  bool json_;
};

std::string dump(const ojson& document) { return document.dump(2) + "\n"; }

RunConfig resolve_config(const Globals& g) {
  RunConfig config = g.config_path.empty() ? parse_config(json::object()) : load_config(g.config_path);
  if (g.seed) {
    config.seed = *g.seed;
    config.synth.seed = *g.seed;
  }
  if (g.threads) config.threads = *g.threads;
  return config;
}

/// Inline JSON object or a path to a JSON file.
json read_json_argument(const std::string& text, const char* what) {
  const bool inline_json = text.find_first_not_of(" \t") != std::string::npos &&
                           text[text.find_first_not_of(" \t")] == '{';
  const std::string source = inline_json ? text : bytes::read_text(text);
  try {
    return json::parse(source);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

struct FeatureFlags {
  std::optional<double> top_x;
  std::optional<std::size_t> tau;
  std::optional<double> top_k;
  std::optional<std::string> layers;

  void add(CLI::App* cmd) {
    cmd->add_option("--top-x", top_x, "ADS foreground percent (overrides ads.top_x_percent)");
    cmd->add_option("--tau", tau, "minimum blob area (overrides ads.tau)");
    cmd->add_option("--top-k", top_k, "CGC top-k percent (overrides cgc.top_k_percent)");
    cmd->add_option("--layers", layers, "layer subset: all, a-b or a comma list (overrides features.layer_subset)");
  }

  void apply(RunConfig& config) const {
    if (top_x) config.ads.top_x_percent = *top_x;
    if (tau) config.ads.tau = *tau;
    if (top_k) config.cgc.top_k_percent = *top_k;
    if (layers) {
      if (layers->find(',') != std::string::npos) {
        json list = json::array();
        std::stringstream in(*layers);
        std::string item;
        while (std::getline(in, item, ',')) list.push_back(parse_layers(item, "--layers").layers()->front());
        config.layer_subset = parse_layers(list, "--layers");
      } else {
        config.layer_subset = parse_layers(*layers, "--layers");
      }
    }
    // re-run the range checks on the overridden values
    json probe = {{"ads", {{"top_x_percent", config.ads.top_x_percent}, {"tau", config.ads.tau}}},
                  {"cgc", {{"top_k_percent", config.cgc.top_k_percent}}}};
    parse_config(probe);
  }
};

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// ---------------------------------------------------------------------------

void cmd_features(const RunConfig& config, const std::string& bundle_path, const std::string& labels_path,
                  const std::string& out_path, const Logger& log) {
  const TraceBundle bundle = read_bundle(bundle_path);
  std::optional<LabelFile> labels;
  if (!labels_path.empty()) {
    labels = load_labels(labels_path);
    for (const auto& warning : labels->warnings) log.info("warning", {{"message", warning}});
  }
  const Dataset dataset =
      build_features(bundle.traces, labels ? &labels->labels : nullptr, config.features(), config.worker_count());
  ensure_parent(out_path);
  export_dataset(dataset, out_path);
  const auto counts = dataset.class_counts();
  log.info("features", {{"rows", dataset.size()},
                        {"columns", dataset.width()},
                        {"grounded", counts[0]},
                        {"hallucinated", counts[1]},
                        {"out", out_path}});
}

void cmd_train(RunConfig config, const std::string& data_path, const std::optional<std::string>& family,
               const std::optional<std::string>& params_text, bool grid, const std::string& out_path,
               std::string report_path, const Logger& log) {
  if (family) config.train.family = parse_family(*family);
  if (params_text) config.train.params = read_json_argument(*params_text, "--params");
  if (grid) config.train.search = true;
  if (config.train.search && params_text) throw UsageError("--grid and --params are mutually exclusive");

  const Dataset dataset = import_dataset(data_path);
  const std::size_t threads = config.worker_count();
  ojson report;
  Hyperparams params = config.train_params();
  report["family"] = std::string(to_string(config.train.family));
  report["rows"] = dataset.size();
  report["seed"] = config.seed;
  if (config.train.search) {
    const GridSearchResult search =
        grid_search(dataset, config.train.family, config.train.grid, config.train.folds, config.seed, threads);
    params = search.best;
    report["grid_search"] = to_json(search);
    log.info("grid_search", {{"points", search.points.size()}, {"best_index", search.best_index},
                             {"mean_f1", search.points[search.best_index].mean_f1}});
  }
  TrainedDetector detector = train(dataset, params, config.seed, threads);
  detector.threshold = config.train.threshold;
  detector.preprocessing = to_json(config.features()).dump();
  ensure_parent(out_path);
  save_model(detector, out_path);

  report["params"] = params_to_json(params);
  report["threshold"] = detector.threshold;
  report["features"] = detector.feature_names;
  report["dropped_features"] = detector.standardizer.dropped;
  report["config"] = to_json(config);
  if (report_path.empty()) report_path = out_path + ".report.json";
  ensure_parent(report_path);
  bytes::write_text(report_path, dump(report));
  log.info("train", {{"family", report["family"]}, {"rows", dataset.size()}, {"out", out_path}});
}

void cmd_eval(RunConfig config, const std::string& data_path, const std::string& model_path,
              const std::optional<std::string>& family, const std::optional<std::string>& params_text,
              const std::optional<std::string>& protocol, const std::optional<std::size_t>& folds,
              const std::string& out_path, const Logger& log) {
  if (protocol) config.eval.kind = parse_protocol(*protocol);
  if (folds) config.eval.folds = *folds;
  if (family) config.train.family = parse_family(*family);
  if (params_text) config.train.params = read_json_argument(*params_text, "--params");
  if (model_path.empty() == !family.has_value()) throw UsageError("eval needs exactly one of --model or --family");

  const Dataset dataset = import_dataset(data_path);
  FitFn fit;
  ojson detector_info;
  if (!model_path.empty()) {
    TrainedDetector detector = load_model(model_path);
    config.eval.threshold = detector.threshold;
    detector_info = {{"model", std::filesystem::path(model_path).filename().string()},
                     {"params", params_to_json(detector.params)}};
    fit = use_detector(std::move(detector));
  } else {
    const Hyperparams params = config.train_params();
    detector_info = {{"params", params_to_json(params)}};
    fit = fit_with(params);
  }
  EvalReport report = evaluate(fit, dataset, config.eval, config.seed, config.worker_count());
  report.config["detector"] = detector_info;
  report.config["run"] = to_json(config);
  ensure_parent(out_path);
  bytes::write_text(out_path, dump(to_json(report)));
  log.info("eval", {{"protocol", std::string(to_string(report.protocol))},
                    {"f1", report.metrics.f1},
                    {"auc", report.metrics.auc},
                    {"out", out_path}});
}

void cmd_score(const RunConfig& config, const std::string& bundle_path, const std::string& model_path,
               const std::string& out_path, const Logger& log) {
  const TrainedDetector detector = load_model(model_path);
  json snapshot;
  try {
    snapshot = json::parse(detector.preprocessing);
  } catch (const json::parse_error&) {
    throw FormatError(model_path + ": preprocessing snapshot is not valid JSON");
  }
  const FeatureConfig features = parse_feature_config(snapshot);
  const TraceBundle bundle = read_bundle(bundle_path);
  if (!bundle.traces.empty() && feature_names(bundle.traces.front(), features) != detector.feature_names) {
    Dataset probe;
    probe.feature_names = feature_names(bundle.traces.front(), features);
    predict_proba(detector, probe);  // throws the layout mismatch naming columns
  }

  const std::size_t ads_width =
      features.ads_layers.is_all() || bundle.traces.empty() ? 0 : features.ads_layers.resolve(bundle.traces.front()).size();
  std::vector<std::string> lines(bundle.traces.size());
  parallel_for(bundle.traces.size(), config.worker_count(), [&](std::size_t i) {
    const TokenTrace& trace = bundle.traces[i];
    const std::vector<double> row = token_features(trace, features);
    const std::size_t split = features.ads_layers.is_all() ? trace.num_layers() : ads_width;
    ojson line;
    line["token_id"] = trace.token_id;
    line["object_text"] = trace.object_text;
    line["p_hallucination"] = predict_proba(detector, row);
    line["ads"] = std::vector<double>(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(split));
    line["cgc"] = std::vector<double>(row.begin() + static_cast<std::ptrdiff_t>(split), row.end());
    lines[i] = line.dump() + "\n";
  });
  std::string text;
  for (const auto& line : lines) text += line;
  ensure_parent(out_path);
  bytes::write_text(out_path, text);
  log.info("score", {{"tokens", bundle.traces.size()}, {"out", out_path}});
}

void cmd_synth(const RunConfig& config, const std::string& out_dir, const Logger& log) {
  const SynthResult result = generate(config.synth, config.worker_count());
  const BundleSummary summary = write_bundle(result.bundle.traces, out_dir, result.bundle.model);
  write_labels(result.labels, (std::filesystem::path(out_dir) / "labels.jsonl").string());
  log.info("synth", {{"tokens", summary.token_count}, {"layers", summary.num_layers}, {"out", out_dir}});
}

void cmd_bench(const RunConfig& config, const std::string& out_path, const Logger& log) {
  EvalReport report =
      benchmark(config.synth, config.features(), config.train_params(), config.eval, config.worker_count());
  report.config["run"] = to_json(config);
  ensure_parent(out_path);
  bytes::write_text(out_path, dump(to_json(report)));
  log.info("bench", {{"f1", report.metrics.f1}, {"auc", report.metrics.auc}, {"out", out_path}});
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kUsage;
    case ErrorKind::missing_input: return kMissingInput;
    case ErrorKind::format: return kFormat;
    case ErrorKind::degenerate: return kDegenerate;
    case ErrorKind::internal: return kInternal;
  }
  return kInternal;
}

void report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << ojson{{"level", "error"}, {"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  CLI::App app{"Token-level hallucination detection from attention and embedding traces", "gchk"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "seed for every stochastic step (also overrides synth.seed)");
  app.add_option("--threads", g.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  app.add_flag("--json-logs", g.json_logs, "log to stderr as JSON lines");

  std::string bundle, labels, out, data, model, report;
  std::optional<std::string> family, params, protocol;
  std::optional<std::size_t> folds;
  bool grid = false;
  FeatureFlags feature_flags;

  auto* features = app.add_subcommand("features", "compute per-token ADS/CGC features into a CSV");
  features->add_option("--bundle", bundle, "trace bundle directory")->required();
  features->add_option("--labels", labels, "label JSONL (default: labels stored in the bundle)");
  features->add_option("--out", out, "output CSV")->required();
  feature_flags.add(features);

  auto* train_cmd = app.add_subcommand("train", "train a detector from a feature CSV");
  train_cmd->add_option("--data", data, "feature CSV")->required();
  train_cmd->add_option("--family", family, "lr, mlp, rf or gbt");
  train_cmd->add_flag("--grid", grid, "grid-search hyperparameters first");
  train_cmd->add_option("--params", params, "hyperparameters as inline JSON or a JSON file");
  train_cmd->add_option("--out", out, "output model file")->required();
  train_cmd->add_option("--report", report, "tuning report JSON (default: <out>.report.json)");
  feature_flags.add(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model or a classifier family on a feature CSV");
  eval_cmd->add_option("--data", data, "feature CSV")->required();
  eval_cmd->add_option("--model", model, "score with this model on every split");
  eval_cmd->add_option("--family", family, "train this family on every training split");
  eval_cmd->add_option("--params", params, "hyperparameters for --family");
  eval_cmd->add_option("--protocol", protocol, "holdout or kfold");
  eval_cmd->add_option("--folds", folds, "folds for kfold");
  eval_cmd->add_option("--out", out, "output report JSON")->required();

  auto* score_cmd = app.add_subcommand("score", "score every token of a bundle (labels not needed)");
  score_cmd->add_option("--bundle", bundle, "trace bundle directory")->required();
  score_cmd->add_option("--model", model, "model file")->required();
  score_cmd->add_option("--out", out, "output JSONL")->required();

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic bundle plus labels.jsonl");
  synth_cmd->add_option("--out", out, "output bundle directory")->required();

  auto* bench_cmd = app.add_subcommand("bench", "synthetic end-to-end benchmark");
  bench_cmd->add_option("--out", out, "output report JSON")->required();
  feature_flags.add(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    help_out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    help_out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what(), kUsage);
    return kUsage;
  }

  const Logger log(err, g.json_logs);
  try {
    RunConfig config = resolve_config(g);
    feature_flags.apply(config);
    if (features->parsed()) {
      cmd_features(config, bundle, labels, out, log);
    } else if (train_cmd->parsed()) {
      cmd_train(config, data, family, params, grid, out, report, log);
    } else if (eval_cmd->parsed()) {
      cmd_eval(config, data, model, family, params, protocol, folds, out, log);
    } else if (score_cmd->parsed()) {
      cmd_score(config, bundle, model, out, log);
    } else if (synth_cmd->parsed()) {
      cmd_synth(config, out, log);
    } else if (bench_cmd->parsed()) {
      cmd_bench(config, out, log);
    }
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    report_error(err, to_string(e.kind()), e.what(), code);
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(err, "internal", e.what(), kInternal);
    return kInternal;
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what(), kInternal);
    return kInternal;
  }
  return kOk;
}

}  // namespace gchk::cli
