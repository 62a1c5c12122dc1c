#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace poevi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Input vector/matrix has the wrong shape.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A matrix that must be invertible is numerically singular.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation requires a normalizable density but the weights do not admit one.
class NormalizabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative method hit its cap; carries the best iterate seen.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, Vector best, double residual)
      : std::runtime_error(what), best_iterate(std::move(best)), residual(residual) {}

  Vector best_iterate;
  double residual = 0.0;
};

/// Subprocess transport failure (exit, malformed reply, timeout).
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, std::string payload = {})
      : std::runtime_error(payload.empty() ? what : what + "; payload: " + payload),
        payload_excerpt(std::move(payload)) {}

  std::string payload_excerpt;
};

/// File contents could not be parsed; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_number(line) {}

  long line_number = -1;
};

inline double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a nan/inf poisoned input)
  return m + std::log((v.array() - m).exp().sum());
}

inline void require_length(const Vector& v, Index n, const char* name) {
  if (v.size() != n) {
    throw DimensionError(std::string(name) + ": expected length " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

}  // namespace poevi
