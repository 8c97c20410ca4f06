// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gchk/trace.hpp"

namespace gchk {

// On-disk trace bundle: a directory with
//
//   manifest.json  UTF-8 metadata, one entry per token in payload order
//   tensors.bin    "GCHK", u16 LE version, then one record per token
//
// A token record holds, for every layer in order: attention (|P| f32), patch
// embeddings (|P| x d f32, row-major) and the token embedding (d f32). All floats
// are little-endian. Offsets in the manifest are absolute offsets into tensors.bin.
//
// Bundles are immutable once written; concurrent writers to one directory are not
// supported.

inline constexpr char kBundleMagic[4] = {'G', 'C', 'H', 'K'};
inline constexpr std::uint16_t kBundleVersion = 1;
inline constexpr std::size_t kBundleHeaderBytes = 6;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTensorFile = "tensors.bin";

struct BundleSummary {
  std::size_t token_count = 0;
  std::size_t num_layers = 0;
  std::size_t grid_height = 0;
  std::size_t grid_width = 0;
  std::size_t embed_dim = 0;
  std::uint64_t payload_bytes = 0;  // size of tensors.bin including the header
};

struct TraceBundle {
  std::string model;
  std::vector<TokenTrace> traces;
};

/// Writes a bundle directory (created if needed). Every trace is validated first and
/// all traces must share layer indices, grid and embedding dimensions; a violation is
/// rejected with an InvariantError naming the token_id and nothing is written.
BundleSummary write_bundle(std::span<const TokenTrace> traces, const std::string& destination,
                           const std::string& model = "unknown");

/// Reads and fully re-validates a bundle.
///   bad magic / unsupported version          -> FormatError
///   payload shorter than the manifest claims  -> CorruptionError (with offset)
///   manifest and payload disagree             -> ConsistencyError
TraceBundle read_bundle(const std::string& source);

/// Bytes one token record occupies for the given shape.
std::uint64_t record_bytes(std::size_t num_layers, std::size_t patch_count, std::size_t embed_dim);

using LabelMap = std::map<std::string, Label>;

struct LabelFile {
  LabelMap labels;
  std::vector<std::string> warnings;
};

/// Loads newline-delimited JSON records {"token_id": ..., "label": "grounded"|"hallucinated"}.
/// Blank lines are skipped. A repeated token_id keeps the last record and adds a warning.
/// Any other label string is a FormatError naming the 1-based line number.
LabelFile load_labels(const std::string& path);

/// Writes labels in the format load_labels reads, sorted by token_id.
void write_labels(const LabelMap& labels, const std::string& path);

}  // namespace gchk
