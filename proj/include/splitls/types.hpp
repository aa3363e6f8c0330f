#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace splitls {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Invalid dimensions, parameter ranges, or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Singular system encountered while building a cached factorization.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, Index rank, Index size)
      : std::runtime_error(what), rank(rank), size(size) {}
  Index rank;
  Index size;
};

/// Non-finite values produced while iterating.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

/// Malformed problem or trace file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), field_path(field_path) {}
  std::string field_path;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace splitls
