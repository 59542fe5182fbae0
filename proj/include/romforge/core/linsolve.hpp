#pragma once

#include "romforge/common.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <vector>

namespace romforge {

/// Square solver used inside Newton loops. Small systems go through a dense LU
/// (with a reciprocal-condition estimate); larger ones through SparseLU whose
/// symbolic analysis is reused as long as the sparsity pattern does not change.
class LinearSolver {
 public:
  explicit LinearSolver(Index dense_threshold = 96) : dense_threshold_(dense_threshold) {}

  /// Returns false when the matrix is numerically singular.
  bool factorize(const SpMat& A);
  bool factorize(const Matrix& A);
  Vector solve(const Vector& b) const;
  /// Reciprocal condition estimate (dense path only, 1 for sparse).
  double rcond() const { return rcond_; }

 private:
  Index dense_threshold_;
  bool dense_ = true;
  double rcond_ = 0.0;
  Eigen::PartialPivLU<Matrix> lu_;
  std::unique_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> sparse_;
  Index pattern_nnz_ = -1;
  Index pattern_n_ = -1;
};

/// Adds a slot-addressed sparse contribution onto a fixed base matrix without
/// re-running setFromTriplets: the union pattern is built once.
class PatternAssembler {
 public:
  PatternAssembler() = default;
  /// `rows`/`cols` give the slot positions that will be scattered later.
  PatternAssembler(const SpMat& base, const std::vector<Index>& rows, const std::vector<Index>& cols);

  /// Replace the base values (same pattern as at construction, or a subset of it).
  void set_base(const SpMat& base);
  /// result = base + scale * slots
  const SpMat& assemble(const double* slots, double scale = 1.0);
  const SpMat& matrix() const { return work_; }

 private:
  std::vector<double> base_values_;
  std::vector<Index> slot_pos_;
  SpMat work_;
};

}  // namespace romforge
