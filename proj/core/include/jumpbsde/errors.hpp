#pragma once

#include <stdexcept>
#include <string>

namespace jumpbsde {

/// Invalid configuration or precondition violation (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure during a run, e.g. a regression matrix that stays
/// singular after the ridge rescue. Carries the time-step index.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, int step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    int step() const { return step_; }

private:
    int step_;
};

}  // namespace jumpbsde
