#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace minimax {

/// Invalid user input: bad dimensions, out-of-range parameters, schema
/// violations. The CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed at run time. The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterates became non-finite or left the divergence guard.
class DivergenceError : public RuntimeFailure {
 public:
  DivergenceError(std::int64_t iteration, const std::string& what)
      : RuntimeFailure(what), iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::int64_t iteration_;
};

/// A sample-size-conditioned bound was requested below its validity threshold.
class ThresholdError : public RuntimeFailure {
 public:
  ThresholdError(std::int64_t required_n, const std::string& what)
      : RuntimeFailure(what), required_n_(required_n) {}
  std::int64_t required_n() const noexcept { return required_n_; }

 private:
  std::int64_t required_n_;
};

/// An iterative inner solver hit its iteration cap.
class ConvergenceError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace minimax
