// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace difftts {

// Raised when a solver or estimator produces a non-finite intermediate.
// Contract violations use std::invalid_argument, parameter-range violations
// std::domain_error.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace difftts
