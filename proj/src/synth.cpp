// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gchk/parallel.hpp"
#include "gchk/random.hpp"

namespace gchk {

namespace {

constexpr std::array<const char*, 12> kObjects = {"dog",   "cat",  "car",   "person", "chair", "table",
                                                  "bottle", "cup", "bench", "clock",  "horse", "umbrella"};

std::size_t footprint(double sigma) { return static_cast<std::size_t>(std::ceil(2.0 * sigma)); }

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError("synth: " + message);
}

bool in_unit(double v) { return v > 0.0 && v < 1.0; }

struct Latents {
  double compactness;
  double alignment;
};

Latents draw_latents(const SynthConfig& c, bool hallucinated, Rng& rng) {
  const double q_mean = hallucinated ? 1.0 - c.hallucinated.dispersion : c.grounded.compactness;
  const double a_mean = hallucinated ? c.embedding.misalignment : c.embedding.alignment;
  return {std::clamp(rng.normal(q_mean, c.latent_spread), 0.0, 1.0),
          std::clamp(rng.normal(a_mean, c.latent_spread), -0.95, 0.95)};
}

/// Distinct patch indices drawn uniformly.
std::vector<std::size_t> pick_patches(std::size_t count, std::size_t total, Rng& rng) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.below(total - i)]);
  all.resize(count);
  return all;
}

TokenTrace make_token(const SynthConfig& c, std::size_t index, bool hallucinated) {
  Rng rng(derive_seed(c.seed, index + 1));
  const std::size_t h = c.grid_height;
  const std::size_t w = c.grid_width;
  const std::size_t patches = h * w;
  const std::size_t d = c.embed_dim;

  TokenTrace trace;
  char id[32];
  std::snprintf(id, sizeof id, "t%05zu", index);
  trace.token_id = id;
  trace.object_text = kObjects[rng.below(kObjects.size())];
  trace.label = hallucinated ? Label::hallucinated : Label::grounded;

  const Latents real = draw_latents(c, hallucinated, rng);
  const bool decoy_class = rng.below(2) == 1;
  const Latents decoy = draw_latents(c, decoy_class, rng);

  // Blob profile: sum of truncated Gaussians, fixed across layers.
  const double sigma = c.grounded.blob_radius;
  const auto reach = static_cast<std::ptrdiff_t>(footprint(sigma));
  std::vector<double> profile(patches, 0.0);  // per-patch blob mass share, sums to 1
  std::vector<double> shape(patches, 0.0);    // peak-normalized profile in [0, 1]
  for (std::size_t b = 0; b < c.grounded.blob_count; ++b) {
    const auto cr = static_cast<std::ptrdiff_t>(reach + rng.below(h - 2 * reach));
    const auto cc = static_cast<std::ptrdiff_t>(reach + rng.below(w - 2 * reach));
    std::vector<double> blob(patches, 0.0);
    double sum = 0.0;
    for (std::ptrdiff_t r = cr - reach; r <= cr + reach; ++r) {
      for (std::ptrdiff_t col = cc - reach; col <= cc + reach; ++col) {
        const double dist2 = static_cast<double>((r - cr) * (r - cr) + (col - cc) * (col - cc));
        if (dist2 > static_cast<double>(reach * reach)) continue;
        const double g = std::exp(-dist2 / (2.0 * sigma * sigma));
        blob[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(col)] = g;
        sum += g;
      }
    }
    for (std::size_t p = 0; p < patches; ++p) {
      profile[p] += blob[p] / sum / static_cast<double>(c.grounded.blob_count);
      shape[p] = std::max(shape[p], blob[p]);
    }
  }

  for (std::size_t l = 1; l <= c.num_layers; ++l) {
    const bool signal = !c.signal_layers ||
                        std::find(c.signal_layers->begin(), c.signal_layers->end(), static_cast<int>(l)) !=
                            c.signal_layers->end();
    const bool cls = signal ? hallucinated : decoy_class;
    const Latents& base = signal ? real : decoy;
    const double q = std::clamp(base.compactness + c.layer_jitter * rng.normal(), 0.0, 1.0);
    const double a = std::clamp(base.alignment + c.layer_jitter * rng.normal(), -0.95, 0.95);

    // attention
    const double structured = rng.uniform(c.grounded.structured_mass - c.mass_jitter,
                                          c.grounded.structured_mass + c.mass_jitter);
    const std::size_t sinks = cls ? c.hallucinated.sink_count : c.grounded.sink_count;
    const double sink_mass = cls ? c.hallucinated.sink_mass : c.grounded.sink_mass;
    std::vector<double> att(patches, 0.0);
    for (std::size_t p = 0; p < patches; ++p) att[p] += q * structured * profile[p];

    const std::size_t scatter = c.hallucinated.scatter_patches;
    if (scatter > 0) {
      std::vector<double> share(scatter);
      for (double& s : share) s = rng.uniform(0.5, 1.5);
      const double total = std::accumulate(share.begin(), share.end(), 0.0);
      const auto spots = pick_patches(scatter, patches, rng);
      for (std::size_t i = 0; i < scatter; ++i) att[spots[i]] += (1.0 - q) * structured * share[i] / total;
    } else {
      for (std::size_t p = 0; p < patches; ++p) att[p] += (1.0 - q) * structured * profile[p];
    }
    for (std::size_t spot : pick_patches(sinks, patches, rng)) att[spot] += sink_mass;

    const double background = 1.0 - structured - static_cast<double>(sinks) * sink_mass;
    std::vector<double> noise(patches);
    for (double& v : noise) v = std::exp(c.grounded.background_noise * rng.normal());
    const double noise_total = std::accumulate(noise.begin(), noise.end(), 0.0);
    for (std::size_t p = 0; p < patches; ++p) att[p] += background * noise[p] / noise_total;

    LayerSlice slice;
    slice.layer_index = static_cast<int>(l);
    std::vector<float> values(patches);
    for (std::size_t p = 0; p < patches; ++p) values[p] = static_cast<float>(att[p]);
    slice.attention = PatchGrid(h, w, std::move(values));

    // embeddings: patch p has cosine c_p with the token embedding
    std::vector<double> token(d);
    double norm2 = 0.0;
    for (double& v : token) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    slice.token_embedding.resize(d);
    for (std::size_t k = 0; k < d; ++k) slice.token_embedding[k] = static_cast<float>(token[k]);
    slice.patch_embeddings.resize(patches * d);
    std::vector<double> u(d);
    for (std::size_t p = 0; p < patches; ++p) {
      const double cosine = std::clamp(a * shape[p] + c.embedding.noise * rng.normal(), -0.99, 0.99);
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        u[k] = rng.normal();
        dot += u[k] * token[k];
      }
      double u2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        u[k] -= dot / norm2 * token[k];
        u2 += u[k] * u[k];
      }
      const double un = std::sqrt(u2);
      const double ortho = std::sqrt(1.0 - cosine * cosine);
      for (std::size_t k = 0; k < d; ++k) {
        slice.patch_embeddings[p * d + k] =
            static_cast<float>(norm * (cosine * token[k] / norm + ortho * u[k] / un));
      }
    }
    trace.layers.push_back(std::move(slice));
  }
  return trace;
}

}  // namespace

void validate(const SynthConfig& c) {
  require(c.grid_height >= 2 && c.grid_width >= 2, "grid must be at least 2x2");
  require(c.num_layers >= 1, "num_layers must be >= 1");
  require(c.embed_dim >= 2, "embed_dim must be >= 2");
  require(c.n_tokens >= 1, "n_tokens must be >= 1");
  require(c.hallucinated_fraction >= 0.0 && c.hallucinated_fraction <= 1.0,
          "hallucinated_fraction must be in [0, 1]");
  require(in_unit(c.grounded.structured_mass), "grounded.structured_mass must be in (0, 1)");
  require(c.mass_jitter >= 0.0 && in_unit(c.grounded.structured_mass - c.mass_jitter) &&
              in_unit(c.grounded.structured_mass + c.mass_jitter),
          "structured_mass +- mass_jitter must stay in (0, 1)");
  require(c.grounded.compactness >= 0.0 && c.grounded.compactness <= 1.0, "grounded.compactness must be in [0, 1]");
  require(c.hallucinated.dispersion >= 0.0 && c.hallucinated.dispersion <= 1.0,
          "hallucinated.dispersion must be in [0, 1]");
  require(c.grounded.sink_mass >= 0.0 && c.grounded.sink_mass < 1.0, "grounded.sink_mass must be in [0, 1)");
  require(c.hallucinated.sink_mass >= 0.0 && c.hallucinated.sink_mass < 1.0,
          "hallucinated.sink_mass must be in [0, 1)");
  const double top = c.grounded.structured_mass + c.mass_jitter;
  require(top + static_cast<double>(c.grounded.sink_count) * c.grounded.sink_mass < 1.0 &&
              top + static_cast<double>(c.hallucinated.sink_count) * c.hallucinated.sink_mass < 1.0,
          "structured mass plus sinks must leave some background mass");
  require(c.grounded.blob_count >= 1, "grounded.blob_count must be >= 1");
  require(c.grounded.blob_radius > 0.0, "grounded.blob_radius must be > 0");
  const std::size_t span = 2 * footprint(c.grounded.blob_radius) + 1;
  require(span <= std::min(c.grid_height, c.grid_width),
          "blob radius " + std::to_string(c.grounded.blob_radius) + " needs a " + std::to_string(span) + "x" +
              std::to_string(span) + " footprint, larger than the " + std::to_string(c.grid_height) + "x" +
              std::to_string(c.grid_width) + " grid");
  const std::size_t patches = c.grid_height * c.grid_width;
  require(c.hallucinated.scatter_patches <= patches, "hallucinated.scatter_patches exceeds the patch count");
  require(std::max(c.grounded.sink_count, c.hallucinated.sink_count) <= patches, "sink_count exceeds the patch count");
  require(c.grounded.background_noise >= 0.0, "grounded.background_noise must be >= 0");
  require(c.embedding.alignment >= -1.0 && c.embedding.alignment <= 1.0, "embedding.alignment must be in [-1, 1]");
  require(c.embedding.misalignment >= -1.0 && c.embedding.misalignment <= 1.0,
          "embedding.misalignment must be in [-1, 1]");
  require(c.embedding.noise >= 0.0, "embedding.noise must be >= 0");
  require(c.latent_spread >= 0.0 && c.layer_jitter >= 0.0, "latent_spread and layer_jitter must be >= 0");
  if (c.signal_layers) {
    for (int layer : *c.signal_layers) {
      require(layer >= 1 && static_cast<std::size_t>(layer) <= c.num_layers,
              "signal layer " + std::to_string(layer) + " is outside 1.." + std::to_string(c.num_layers));
    }
  }
}

SynthResult generate(const SynthConfig& config, std::size_t threads) {
  validate(config);
  const auto positives =
      static_cast<std::size_t>(std::llround(config.hallucinated_fraction * static_cast<double>(config.n_tokens)));
  std::vector<std::uint8_t> hallucinated(config.n_tokens, 0);
  std::fill(hallucinated.begin(), hallucinated.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  Rng order(derive_seed(config.seed, 0));
  order.shuffle(std::span(hallucinated));

  SynthResult result;
  result.bundle.model = "synthetic";
  result.bundle.traces.resize(config.n_tokens);
  parallel_for(config.n_tokens, threads, [&](std::size_t i) {
    result.bundle.traces[i] = make_token(config, i, hallucinated[i] != 0);
  });
  for (const auto& trace : result.bundle.traces) result.labels[trace.token_id] = trace.label;
  return result;
}

EvalReport benchmark(const SynthConfig& config, const FeatureConfig& features, const Hyperparams& params,
                     const EvalProtocol& protocol, std::size_t threads) {
  const SynthResult synth = generate(config, threads);
  const Dataset dataset = build_features(synth.bundle.traces, &synth.labels, features, threads);
  EvalReport report = evaluate(fit_with(params), dataset, protocol, config.seed, threads);
  report.config["classifier"] = params_to_json(params);
  return report;
}

}  // namespace gchk
