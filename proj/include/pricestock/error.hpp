// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pricestock {

enum class ErrorKind {
  Config,
  Domain,
  Singular,
  Shape,
  Size,
  Contract,
  Parse,
  Io,
  NonFinite,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config_error";
    case ErrorKind::Domain: return "domain_error";
    case ErrorKind::Singular: return "singularity_error";
    case ErrorKind::Shape: return "shape_error";
    case ErrorKind::Size: return "size_error";
    case ErrorKind::Contract: return "contract_error";
    case ErrorKind::Parse: return "parse_error";
    case ErrorKind::Io: return "io_error";
    case ErrorKind::NonFinite: return "non_finite_error";
  }
  return "error";
}

/// Single exception type for the library; `kind()` lets callers (and the CLI's
/// machine-readable error output) distinguish failure classes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace pricestock
