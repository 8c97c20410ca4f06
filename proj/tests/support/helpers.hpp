// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gchk/features.hpp"
#include "gchk/random.hpp"
#include "gchk/trace.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Random positive attention (some exact ties) and Gaussian embeddings.
gchk::TokenTrace random_trace(gchk::Rng& rng, const std::string& id, std::size_t height, std::size_t width,
                              std::size_t layers, std::size_t dim, gchk::Label label = gchk::Label::grounded);

std::vector<double> random_attention(gchk::Rng& rng, std::size_t count);

/// Rows drawn from two Gaussians with means +-shift along every feature.
gchk::Dataset gaussian_dataset(gchk::Rng& rng, std::size_t rows_per_class, std::size_t width, double shift);

std::vector<std::uint8_t> file_bytes(const std::string& path);
std::string file_text(const std::string& path);

struct ProcessResult {
  int exit_code;
  std::string err;
};

/// Runs the gchk executable with the given arguments (shell-quoted here).
ProcessResult run_tool(const std::vector<std::string>& args);

}  // namespace testing_support
