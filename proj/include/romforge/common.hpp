#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace romforge {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Time samples of an n-dof field: row r holds the samples of dof r contiguously.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated preconditions: dimension mismatches, non-finite inputs, bad arguments.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failure (CLI exit code 3).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual_norm, int iterations)
      : Error(what), residual_norm_(residual_norm), iterations_(iterations) {}
  double residual_norm() const { return residual_norm_; }
  int iterations() const { return iterations_; }

 private:
  double residual_norm_;
  int iterations_;
};

/// Filesystem or format failure (CLI exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

inline void require_size(Index actual, Index expected, const char* what) {
  if (actual != expected) {
    throw ContractViolation(std::string(what) + ": expected length " + std::to_string(expected) +
                            ", got " + std::to_string(actual));
  }
}

inline bool all_finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

}  // namespace romforge
