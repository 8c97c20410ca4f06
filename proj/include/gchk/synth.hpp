// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gchk/bundle.hpp"
#include "gchk/classifiers.hpp"
#include "gchk/evaluation.hpp"
#include "gchk/features.hpp"

namespace gchk {

/// Synthetic trace generator.
///
/// Each token gets two latent scores. Compactness q in [0, 1] decides how much of the
/// structured attention mass lands in one smooth blob versus scattered single
/// patches; alignment a decides how close blob patch embeddings are to the token
/// embedding (their cosine). Grounded and hallucinated tokens draw both latents from
/// normals with different means and a shared spread, so the classes overlap a little
/// and no feature is a perfect separator.
///
/// Attention for one layer:
///   S ~ U(structured_mass - mass_jitter, structured_mass + mass_jitter)
///   q S into the blob(s), (1 - q) S over `scatter_patches` isolated patches,
///   sink_mass per 1-patch sink, and the rest over all patches with lognormal noise.
///
/// Layers not listed in `signal_layers` use the latents of a decoy class drawn
/// independently of the true label.
struct SynthConfig {
  struct Grounded {
    std::size_t blob_count = 1;
    double blob_radius = 1.5;  // Gaussian sigma in patches; footprint is 2 sigma
    double structured_mass = 0.55;
    double background_noise = 0.6;  // lognormal sigma, 0 = flat background
    double compactness = 0.8;
    std::size_t sink_count = 1;
    double sink_mass = 0.04;

    friend bool operator==(const Grounded&, const Grounded&) = default;
  };
  struct Hallucinated {
    double dispersion = 0.7;  // mean 1 - q
    std::size_t scatter_patches = 12;
    std::size_t sink_count = 2;
    double sink_mass = 0.04;

    friend bool operator==(const Hallucinated&, const Hallucinated&) = default;
  };
  struct Embedding {
    double alignment = 0.6;     // mean blob cosine for grounded tokens
    double misalignment = 0.4;  // mean blob cosine for hallucinated tokens
    double noise = 0.05;        // per-patch cosine jitter

    friend bool operator==(const Embedding&, const Embedding&) = default;
  };

  std::size_t grid_height = 24;
  std::size_t grid_width = 24;
  std::size_t num_layers = 8;  // layers are numbered 1..num_layers
  std::size_t embed_dim = 8;
  std::size_t n_tokens = 400;
  double hallucinated_fraction = 0.5;
  double mass_jitter = 0.1;
  double latent_spread = 0.1;
  double layer_jitter = 0.05;
  std::optional<std::vector<int>> signal_layers;  // nullopt = every layer
  Grounded grounded;
  Hallucinated hallucinated;
  Embedding embedding;
  std::uint64_t seed = 7;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Throws UsageError for an invalid config (mass fractions outside (0, 1), grid smaller
/// than 2x2, blob footprint wider than the grid, ...).
void validate(const SynthConfig& config);

struct SynthResult {
  TraceBundle bundle;
  LabelMap labels;
};

/// Exactly round(hallucinated_fraction * n_tokens) hallucinated tokens, placed by a
/// seeded permutation. Token i draws from stream derive_seed(seed, i), so the output
/// does not depend on `threads`.
SynthResult generate(const SynthConfig& config, std::size_t threads = 1);

/// generate -> build_features -> evaluate(fit_with(params)) with the config's seed.
EvalReport benchmark(const SynthConfig& config, const FeatureConfig& features = {},
                     const Hyperparams& params = default_params(Family::gbt),
                     const EvalProtocol& protocol = {}, std::size_t threads = 1);

}  // namespace gchk
