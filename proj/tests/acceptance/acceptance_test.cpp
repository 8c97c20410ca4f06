// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "gchk/ads.hpp"
#include "gchk/cgc.hpp"
#include "gchk/classifiers.hpp"
#include "gchk/config.hpp"
#include "gchk/parallel.hpp"
#include "gchk/synth.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gchk;
using testing_support::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::vector<double> as_double(const PatchGrid& g) { return {g.values().begin(), g.values().end()}; }

PatchGrid to_grid(std::size_t h, std::size_t w, const std::vector<double>& values) {
  return PatchGrid(h, w, std::vector<float>(values.begin(), values.end()));
}

// ---------------------------------------------------------------------------

Outcome a1_ads_oracle() {
  Rng rng(101);
  const auto start = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t side = i % 2 ? 24 : 8;
    const PatchGrid grid = to_grid(side, side, testing_support::random_attention(rng, side * side));
    const double x = 1.0 + rng.uniform() * 39.0;
    const std::size_t tau = 1 + rng.below(5);
    const double got = ads_map(grid, {x, tau}).ads;
    const double want = oracle::ads(as_double(grid), side, side, x, tau).ads;
    worst = std::max(worst, std::abs(got - want));
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-9 && elapsed < 10.0, format("max|diff|=%.3g time=%.2fs", worst, elapsed)};
}

Outcome a2_entropy_endpoints() {
  const Grid<double> uniform(24, 24, 1.0 / 576.0);
  const ForegroundMask none(24, 24, 0);
  const double high = background_entropy(uniform, none);

  Grid<double> spike(24, 24, 0.0);
  ForegroundMask fg(24, 24, 0);
  for (std::size_t p = 0; p < 10; ++p) {
    spike[p] = 0.09;
    fg[p] = 1;
  }
  spike[300] = 0.1;  // all background mass on one patch
  const double low = background_entropy(spike, fg);
  return {std::abs(high - 1.0) <= 1e-12 && low == 0.0, format("uniform=%.17g single=%.17g", high, low)};
}

Outcome a3_ccl_exhaustive() {
  const auto start = Clock::now();
  std::size_t mismatches = 0;
  for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
    ForegroundMask mask(4, 4, 0);
    std::vector<std::uint8_t> raw(16);
    for (std::size_t p = 0; p < 16; ++p) raw[p] = mask[p] = (bits >> p) & 1u;
    oracle::Partition got;
    for (const auto& c : connected_components(mask).components) got.push_back(c.members);
    std::sort(got.begin(), got.end());
    mismatches += got != oracle::flood_fill(raw, 4, 4);
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 30.0, format("masks=65536 mismatches=%zu time=%.2fs", mismatches, elapsed)};
}

/// Background patches with no foreground patch in their 8-neighborhood.
std::vector<std::size_t> isolated_spots(const ForegroundMask& mask) {
  std::vector<std::size_t> spots;
  const auto h = static_cast<std::ptrdiff_t>(mask.height()), w = static_cast<std::ptrdiff_t>(mask.width());
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t col = 0; col < w; ++col) {
      bool clear = true;
      for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          const auto rr = r + dr, cc = col + dc;
          if (rr >= 0 && rr < h && cc >= 0 && cc < w && mask.at(rr, cc)) clear = false;
        }
      }
      if (clear) spots.push_back(static_cast<std::size_t>(r * w + col));
    }
  }
  return spots;
}

Outcome a4_sink_robustness() {
  SynthConfig c;
  c.n_tokens = 60;
  c.hallucinated_fraction = 0.0;
  c.seed = 404;
  const auto synth = generate(c, default_threads());
  Rng rng(405);
  double worst = 0.0;
  std::size_t cases = 0, over = 0;
  for (const auto& trace : synth.bundle.traces) {
    for (const auto& slice : trace.layers) {
      const Grid<double> base = normalize_patch_attention(slice.attention);
      for (std::size_t tau : {2u, 3u, 4u}) {
        const AdsConfig config{10.0, tau};
        const AdsBreakdown before = ads_map(slice.attention, config);
        const auto spots = isolated_spots(before.mask);
        const std::size_t spot = spots[rng.below(spots.size())];
        for (double share : {0.01, 0.05, 0.1, 0.2}) {
          std::vector<double> injected(base.size());
          for (std::size_t p = 0; p < base.size(); ++p) injected[p] = (1.0 - share) * base[p];
          injected[spot] += share;
          const double change = std::abs(ads_map(to_grid(base.height(), base.width(), injected), config).ads - before.ads);
          worst = std::max(worst, change);
          over += change >= 0.02;
          ++cases;
        }
      }
    }
  }
  return {worst < 0.02, format("cases=%zu max|dADS|=%.4g cases_at_or_above_0.02=%zu", cases, worst, over)};
}

Outcome a5_cgc_oracle() {
  Rng rng(505);
  double worst_cos = 0.0;
  std::size_t inexact = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t dim = i % 2 ? 64 : 8;
    const std::size_t side = 2 + rng.below(15);
    const TokenTrace t = testing_support::random_trace(rng, "a5", side, side, 1, dim);
    const LayerSlice& slice = t.layers[0];
    const SimilarityMap map = similarity_map(slice);
    const std::vector<double> token(slice.token_embedding.begin(), slice.token_embedding.end());
    std::vector<double> cosines;
    for (std::size_t p = 0; p < slice.patch_count(); ++p) {
      const auto row = slice.patch_row(p);
      const double want = oracle::cosine(token, std::vector<double>(row.begin(), row.end()));
      worst_cos = std::max(worst_cos, std::abs(map[p] - want));
      cosines.push_back(map[p]);
    }
    const double k = 1.0 + rng.uniform() * 49.0;
    inexact += cgc_layer(map, k) != oracle::top_k_mean(cosines, k);
  }
  return {worst_cos < 1e-9 && inexact == 0, format("max|dcos|=%.3g topk_mismatches=%zu", worst_cos, inexact)};
}

Outcome a6_auc_oracle() {
  Rng rng(606);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.below(400);
    std::vector<int> y(n);
    std::vector<double> s(n);
    const std::size_t levels = i % 3 == 0 ? 2 : i % 3 == 1 ? 5 : 1000000;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = rng.uniform() < 0.3 ? 1 : 0;
      s[j] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
    }
    y[0] = 0;
    y[1] = 1;
    worst = std::max(worst, std::abs(auc(y, s) - oracle::pairwise_auc(y, s)));
  }
  return {worst < 1e-12, format("sets=200 max|diff|=%.3g", worst)};
}

Outcome a7_benchmark() {
  const auto start = Clock::now();
  const SynthConfig c;
  const auto synth = generate(c, 1);
  const Dataset d = build_features(synth.bundle.traces, &synth.labels, {}, 1);
  bool pass = true;
  std::string detail;
  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const auto r = evaluate(fit_with(default_params(f)), d, {}, c.seed, 1);
    pass = pass && r.metrics.auc >= 0.95 && r.metrics.f1 >= 0.90;
    detail += format("%s auc=%.4f f1=%.4f ", std::string(to_string(f)).c_str(), r.metrics.auc, r.metrics.f1);
  }
  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 120.0;
  return {pass, detail + format("time=%.1fs", elapsed)};
}

Outcome a8_layer_ablation() {
  SynthConfig c;
  c.signal_layers = std::vector<int>{3, 4, 5, 6};
  const auto synth = generate(c, default_threads());
  const auto score = [&](const LayerSelection& layers) {
    FeatureConfig f;
    f.ads_layers = f.cgc_layers = layers;
    const Dataset d = build_features(synth.bundle.traces, &synth.labels, f, default_threads());
    return evaluate(fit_with(default_params(Family::gbt)), d, {}, c.seed, default_threads()).metrics.auc;
  };
  const double mid = score(LayerSelection({3, 4, 5, 6}));
  const double late = score(LayerSelection({7, 8}));
  const double all = score(LayerSelection::all());
  const bool pass = mid - late >= 0.1 && all >= mid - 0.02 && all >= late - 0.02;
  return {pass, format("auc[3-6]=%.4f auc[7-8]=%.4f auc[all]=%.4f", mid, late, all)};
}

Outcome a9_threshold_sweep() {
  const SynthConfig c;
  const auto synth = generate(c, default_threads());
  std::string detail;
  double best_low = 0.0, at30 = 0.0;
  for (double x : {5.0, 10.0, 15.0, 20.0, 30.0}) {
    FeatureConfig f;
    f.ads.top_x_percent = x;
    const Dataset d = build_features(synth.bundle.traces, &synth.labels, f, default_threads());
    const double a = evaluate(fit_with(default_params(Family::gbt)), d, {}, c.seed, default_threads()).metrics.auc;
    if (x <= 15.0) best_low = std::max(best_low, a);
    if (x == 30.0) at30 = a;
    detail += format("x=%g:%.4f ", x, a);
  }
  return {at30 < best_low, detail};
}

Outcome a10_round_trips() {
  TempDir dir;
  SynthConfig c;
  c.n_tokens = 60;
  c.grid_height = c.grid_width = 12;
  c.num_layers = 4;
  const auto synth = generate(c, default_threads());
  std::vector<std::string> failures;

  write_bundle(synth.bundle.traces, dir.file("b1"), synth.bundle.model);
  const TraceBundle back = read_bundle(dir.file("b1"));
  write_bundle(back.traces, dir.file("b2"), back.model);
  if (!(back.traces == synth.bundle.traces)) failures.push_back("bundle-values");
  for (const char* f : {kManifestFile, kTensorFile}) {
    if (testing_support::file_bytes(dir.file(std::string("b1/") + f)) !=
        testing_support::file_bytes(dir.file(std::string("b2/") + f))) {
      failures.push_back(std::string("bundle-") + f);
    }
  }

  const Dataset d = build_features(synth.bundle.traces, &synth.labels, {}, default_threads());
  export_dataset(d, dir.file("d.csv"));
  const Dataset d2 = import_dataset(dir.file("d.csv"));
  if (!same_content(d, d2) || dataset_to_csv(d2) != testing_support::file_text(dir.file("d.csv"))) {
    failures.push_back("csv");
  }

  for (Family f : {Family::lr, Family::mlp, Family::rf, Family::gbt}) {
    const auto det = train(d, default_params(f), 3, default_threads());
    save_model(det, dir.file("m.gcmd"));
    const auto loaded = load_model(dir.file("m.gcmd"));
    if (serialize_model(loaded) != testing_support::file_bytes(dir.file("m.gcmd")) ||
        predict_proba(loaded, d) != predict_proba(det, d)) {
      failures.push_back("model-" + std::string(to_string(f)));
    }
  }

  // CLI byte identity across thread counts
  std::ofstream(dir.file("config.json"))
      << R"({"seed": 11, "synth": {"grid_height": 12, "grid_width": 12, "num_layers": 4, "n_tokens": 60},
             "train": {"family": "rf", "params": {"n_trees": 50}}})";
  const auto run = [&](const std::string& threads, std::vector<std::string> args) {
    args.insert(args.begin(), {"--config", dir.file("config.json"), "--threads", threads});
    return testing_support::run_tool(args).exit_code;
  };
  for (const std::string t : {"1", "8"}) {
    const auto out = [&](const std::string& name) { return dir.file("t" + t + "/" + name); };
    int rc = run(t, {"synth", "--out", out("bundle")});
    rc |= run(t, {"features", "--bundle", out("bundle"), "--labels", out("bundle/labels.jsonl"), "--out",
                  out("features.csv")});
    rc |= run(t, {"train", "--data", out("features.csv"), "--out", out("model.gcmd")});
    rc |= run(t, {"eval", "--data", out("features.csv"), "--model", out("model.gcmd"), "--out", out("eval.json")});
    rc |= run(t, {"score", "--bundle", out("bundle"), "--model", out("model.gcmd"), "--out", out("scores.jsonl")});
    rc |= run(t, {"bench", "--out", out("bench.json")});
    if (rc != 0) failures.push_back("cli-exit-threads-" + t);
  }
  std::size_t compared = 0;
  for (const std::string f : {"bundle/manifest.json", "bundle/tensors.bin", "bundle/labels.jsonl", "features.csv",
                              "model.gcmd", "model.gcmd.report.json", "eval.json", "scores.jsonl", "bench.json"}) {
    ++compared;
    if (!std::filesystem::exists(dir.file("t1/" + f)) ||
        testing_support::file_bytes(dir.file("t1/" + f)) != testing_support::file_bytes(dir.file("t8/" + f))) {
      failures.push_back("cli-" + f);
    }
  }
  std::string detail = format("cli_files_compared=%zu", compared);
  for (const auto& f : failures) detail += " failed:" + f;
  return {failures.empty(), detail};
}

Outcome a11_imbalanced_folds() {
  SynthConfig c;
  c.n_tokens = 3339 + 217;
  c.hallucinated_fraction = 217.0 / 3556.0;
  c.grid_height = c.grid_width = 8;
  c.num_layers = 4;
  c.seed = 1111;
  const auto synth = generate(c, default_threads());
  const Dataset d = build_features(synth.bundle.traces, &synth.labels, {}, default_threads());
  const auto counts = d.class_counts();
  const auto y = d.targets();
  bool pass = counts[0] == 3339 && counts[1] == 217;
  std::string detail = format("rows=%zu/%zu positives per fold:", counts[0], counts[1]);
  for (const auto& split : kfold_splits(y, 5, c.seed)) {
    std::size_t pos = 0;
    for (auto i : split.test) pos += static_cast<std::size_t>(y[i]);
    pass = pass && (pos == 43 || pos == 44);
    detail += format(" %zu", pos);
  }
  const auto report = evaluate(fit_with(default_params(Family::gbt)), d, {}, c.seed, default_threads());
  pass = pass && report.folds.size() == 5;
  for (const auto& f : report.folds) {
    pass = pass && std::isfinite(f.metrics.f1) && std::isfinite(f.metrics.auc);
    detail += format(" | fold%zu f1=%.3f auc=%.3f", f.fold, f.metrics.f1, f.metrics.auc);
  }
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"A1", a1_ads_oracle},      {"A2", a2_entropy_endpoints}, {"A3", a3_ccl_exhaustive},
      {"A4", a4_sink_robustness}, {"A5", a5_cgc_oracle},        {"A6", a6_auc_oracle},
      {"A7", a7_benchmark},       {"A8", a8_layer_ablation},    {"A9", a9_threshold_sweep},
      {"A10", a10_round_trips},   {"A11", a11_imbalanced_folds},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failed += !outcome.pass;
    std::printf("%s %s %s\n", name, outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
