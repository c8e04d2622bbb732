// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace emogen {

// Bad arguments are reported with std::invalid_argument and I/O problems with
// std::runtime_error. The two types below cover the remaining error classes.

/// The requested operation is not available for this backend or configuration.
class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A computation produced NaN or Inf.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace emogen
