// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace progsplat {

enum class ErrorCode {
    InvalidParameter,
    NotFound,
    ContractViolation,
    DimensionMismatch,
    Io,
    Parse,
    UnsupportedModel,
    Config,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace progsplat
