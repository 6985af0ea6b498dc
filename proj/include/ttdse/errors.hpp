// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ttdse {

// Tensor or factor-tuple shapes that do not fit together.
class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A computation refused because it would exceed an element, permutation or
// wall-clock budget.
class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Register-blocking factors or plans that break a hard scheduling constraint.
class ConstraintViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid policy / hardware / config values. `path` is a JSON-pointer-like
// location when the error comes from a config file, empty otherwise.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what, std::string path = {})
        : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// The tiling inequalities admit no schedule for an Einsum layer.
class PlannerInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ttdse
