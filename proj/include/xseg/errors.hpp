#pragma once

#include <stdexcept>
#include <string>

namespace xseg {

// Usage / configuration problems; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric or convergence failures; the CLI maps these to exit code 1.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xseg
