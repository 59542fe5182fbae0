#pragma once

#include "romforge/core/model.hpp"

#include <numbers>
#include <vector>

namespace romforge {

struct EigenPair {
  double omega = 0.0;  ///< rad/time
  Vector shape;        ///< mass-normalized, largest-magnitude component positive

  double frequency() const { return omega / (2.0 * std::numbers::pi); }
};

/// k lowest eigenpairs of K phi = omega^2 M phi (dense symmetric-definite solve).
std::vector<EigenPair> solve_eigs(const DynamicSystem& model, Index k);

/// (omega0 / Q) M
SparseMatrixSym rayleigh_damping(const FullOrderModel& model, double omega0, double Q);

}  // namespace romforge
