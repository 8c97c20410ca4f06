// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace testing_support {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("gchk-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ignored;
  std::filesystem::remove_all(path_, ignored);
}

std::vector<double> random_attention(gchk::Rng& rng, std::size_t count) {
  std::vector<double> values(count);
  for (double& v : values) {
    // coarse levels make exact ties common
    v = rng.uniform() < 0.3 ? static_cast<double>(1 + rng.below(4)) : std::exp(2.0 * rng.normal());
  }
  return values;
}

gchk::TokenTrace random_trace(gchk::Rng& rng, const std::string& id, std::size_t height, std::size_t width,
                              std::size_t layers, std::size_t dim, gchk::Label label) {
  gchk::TokenTrace trace;
  trace.token_id = id;
  trace.object_text = "object";
  trace.label = label;
  const std::size_t patches = height * width;
  for (std::size_t l = 0; l < layers; ++l) {
    gchk::LayerSlice slice;
    slice.layer_index = static_cast<int>(l + 1);
    std::vector<float> att(patches);
    for (float& v : att) v = static_cast<float>(rng.uniform(0.01, 1.0));
    slice.attention = gchk::PatchGrid(height, width, std::move(att));
    slice.token_embedding.resize(dim);
    for (float& v : slice.token_embedding) v = static_cast<float>(rng.normal());
    slice.patch_embeddings.resize(patches * dim);
    for (float& v : slice.patch_embeddings) v = static_cast<float>(rng.normal());
    trace.layers.push_back(std::move(slice));
  }
  return trace;
}

gchk::Dataset gaussian_dataset(gchk::Rng& rng, std::size_t rows_per_class, std::size_t width, double shift) {
  gchk::Dataset d;
  for (std::size_t c = 0; c < width; ++c) d.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t i = 0; i < 2 * rows_per_class; ++i) {
    const bool positive = i % 2 == 1;
    gchk::FeatureRow row;
    row.token_id = "r" + std::to_string(i);
    row.label = positive ? gchk::Label::hallucinated : gchk::Label::grounded;
    for (std::size_t c = 0; c < width; ++c) row.values.push_back(rng.normal(positive ? shift : -shift, 1.0));
    d.rows.push_back(std::move(row));
  }
  return d;
}

std::vector<std::uint8_t> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ProcessResult run_tool(const std::vector<std::string>& args) {
  static std::atomic<int> counter{0};
  const auto err_path = std::filesystem::temp_directory_path() /
                        ("gchk-stderr-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::string command = "'" GCHK_TOOL_PATH "'";
  for (const auto& arg : args) {
    std::string quoted = "'";
    for (char ch : arg) quoted += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
    command += " " + quoted + "'";
  }
  command += " >/dev/null 2>'" + err_path.string() + "'";
  const int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status)) throw std::runtime_error("could not run " + command);
  ProcessResult result{WEXITSTATUS(status), file_text(err_path.string())};
  std::filesystem::remove(err_path);
  return result;
}

}  // namespace testing_support
