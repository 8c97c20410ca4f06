// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gchk {

/// Broad failure category. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  usage,          // bad arguments or configuration
  missing_input,  // a required input file does not exist
  format,         // malformed, corrupt or inconsistent file content
  degenerate,     // input is well-formed but mathematically unusable
  internal,       // IO failure while writing, or anything unexpected
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& message)
      : Error(ErrorKind::missing_input, message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error(ErrorKind::format, message) {}
};

/// Payload ends early or holds bytes that cannot be decoded.
class CorruptionError : public FormatError {
 public:
  CorruptionError(const std::string& message, std::uint64_t offset)
      : FormatError(message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Two parts of a file disagree with each other (manifest vs payload, header vs rows).
class ConsistencyError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A domain invariant does not hold for an in-memory or decoded value.
class InvariantError : public FormatError {
 public:
  using FormatError::FormatError;
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& message)
      : Error(ErrorKind::degenerate, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::internal, message) {}
};

}  // namespace gchk
