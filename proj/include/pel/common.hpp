#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace pel {

using Complex = std::complex<double>;

// Error categories map onto the CLI exit codes: configuration errors (2),
// computation errors (3). Domain/precondition violations use std::domain_error.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class ComputationError : public std::runtime_error {
public:
  explicit ComputationError(const std::string& what) : std::runtime_error(what) {}
};

class DegenerateInput : public std::runtime_error {
public:
  explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

// +infinity is the dedicated sentinel for "no finite endpoint".
inline double infinity_sentinel() { return std::numeric_limits<double>::infinity(); }

}  // namespace pel
