// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gchk/error.hpp"

namespace gchk::bytes {

// Little-endian encoding independent of host byte order.

template <typename U>
void put_uint(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

inline void put_f32(std::vector<std::uint8_t>& out, float value) {
  put_uint(out, std::bit_cast<std::uint32_t>(value));
}

inline void put_f64(std::vector<std::uint8_t>& out, double value) {
  put_uint(out, std::bit_cast<std::uint64_t>(value));
}

inline void put_f32s(std::vector<std::uint8_t>& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
    out.insert(out.end(), raw, raw + values.size_bytes());
  } else {
    for (float v : values) put_f32(out, v);
  }
}

inline void put_f64s(std::vector<std::uint8_t>& out, std::span<const double> values) {
  for (double v : values) put_f64(out, v);
}

inline void put_bytes(std::vector<std::uint8_t>& out, std::string_view text) {
  out.insert(out.end(), text.begin(), text.end());
}

/// Bounds-checked cursor over an immutable byte buffer. Reading past the end
/// throws CorruptionError with the offending offset.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data, std::uint64_t base_offset = 0)
      : data_(data), base_(base_offset) {}

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::uint64_t offset() const noexcept { return base_ + pos_; }

  void require(std::size_t count, const char* what) const {
    if (remaining() < count) {
      throw CorruptionError(std::string("truncated ") + what + ": need " + std::to_string(count) +
                                " bytes, " + std::to_string(remaining()) + " left",
                            offset());
    }
  }

  template <typename U>
  U uint(const char* what = "integer") {
    require(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return value;
  }

  float f32(const char* what = "float") { return std::bit_cast<float>(uint<std::uint32_t>(what)); }
  double f64(const char* what = "double") { return std::bit_cast<double>(uint<std::uint64_t>(what)); }

  void f32s(std::span<float> out, const char* what = "float array") {
    require(out.size_bytes(), what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (float& v : out) v = f32(what);
    }
  }

  std::vector<double> f64s(std::size_t count, const char* what = "double array") {
    require(count * 8, what);
    std::vector<double> out(count);
    for (double& v : out) v = f64(what);
    return out;
  }

  std::string text(std::size_t count, const char* what = "string") {
    require(count, what);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), count);
    pos_ += count;
    return out;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::uint64_t base_;
  std::size_t pos_ = 0;
};

/// Whole-file helpers. read_file throws MissingInputError when the path is absent.
std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);
std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

}  // namespace gchk::bytes
