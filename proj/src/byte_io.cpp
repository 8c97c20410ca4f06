// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/byte_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

namespace gchk::bytes {

std::vector<std::uint8_t> read_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingInputError("no such file: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  auto raw = read_file(path);
  return std::string(raw.begin(), raw.end());
}

void write_text(const std::string& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace gchk::bytes
