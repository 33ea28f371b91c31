// Copyright 2026 The NWCAD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nwcad {

enum class ErrorKind {
  kInvalidArgument,  // caller passed something malformed
  kData,             // input files or provider output violate a contract
  kIo,
  kInvariant,
};

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

inline void check_arg(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::kInvalidArgument, message);
}

inline void check_data(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::kData, message);
}

}  // namespace nwcad
