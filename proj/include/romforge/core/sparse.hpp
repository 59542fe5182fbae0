#pragma once

#include "romforge/common.hpp"

#include <vector>

namespace romforge {

struct MatrixEntry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

/// Square sparse matrix. When `symmetric` is set only the upper triangle is
/// kept in entries(); full() always holds both triangles.
class SparseMatrixSym {
 public:
  SparseMatrixSym() = default;

  /// Duplicate (row, col) pairs are summed. For symmetric matrices an entry in
  /// either triangle is folded onto the upper one.
  SparseMatrixSym(Index n, std::vector<MatrixEntry> entries, bool symmetric);

  static SparseMatrixSym from_dense(const Matrix& A, bool symmetric);
  static SparseMatrixSym from_full(const SpMat& A, bool symmetric);
  static SparseMatrixSym diagonal(const Vector& d);

  Index n() const { return n_; }
  bool symmetric() const { return symmetric_; }
  const std::vector<MatrixEntry>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  const SpMat& full() const { return full_; }

  Vector multiply(const Eigen::Ref<const Vector>& x) const;
  Matrix to_dense() const { return Matrix(full_); }
  SparseMatrixSym scaled(double factor) const;
  double frobenius_norm() const { return full_.norm(); }

 private:
  Index n_ = 0;
  bool symmetric_ = true;
  std::vector<MatrixEntry> entries_;
  SpMat full_;
};

}  // namespace romforge
