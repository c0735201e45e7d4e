#pragma once

#include <stdexcept>
#include <string>

namespace ratekit {

/// Bad run configuration: missing columns, invalid ratios, unknown keys.
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure while evaluating a computation graph (domain violation,
/// non-finite value). The CLI maps this to exit code 3.
class EvalError : public std::runtime_error {
public:
    explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

/// Training diverged or hit a non-finite objective.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Inputs violate a documented contract (out-of-bounds coefficient, length
/// mismatch, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ratekit
