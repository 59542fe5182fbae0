#include "romforge/core/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace romforge {

SparseMatrixSym::SparseMatrixSym(Index n, std::vector<MatrixEntry> entries, bool symmetric)
    : n_(n), symmetric_(symmetric) {
  require(n >= 0, "SparseMatrixSym: negative dimension");
  for (auto& e : entries) {
    if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n) {
      throw ContractViolation("SparseMatrixSym: entry (" + std::to_string(e.row) + "," +
                              std::to_string(e.col) + ") outside [0," + std::to_string(n) + ")");
    }
    if (!std::isfinite(e.value)) throw ContractViolation("SparseMatrixSym: non-finite entry");
    if (symmetric && e.row > e.col) std::swap(e.row, e.col);
  }
  std::sort(entries.begin(), entries.end(), [](const MatrixEntry& a, const MatrixEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (const auto& e : entries) {
    if (!entries_.empty() && entries_.back().row == e.row && entries_.back().col == e.col) {
      entries_.back().value += e.value;
    } else {
      entries_.push_back(e);
    }
  }

  std::vector<Triplet> trips;
  trips.reserve(entries_.size() * (symmetric ? 2 : 1));
  for (const auto& e : entries_) {
    trips.emplace_back(e.row, e.col, e.value);
    if (symmetric && e.row != e.col) trips.emplace_back(e.col, e.row, e.value);
  }
  full_.resize(n, n);
  full_.setFromTriplets(trips.begin(), trips.end());
  full_.makeCompressed();
}

SparseMatrixSym SparseMatrixSym::from_dense(const Matrix& A, bool symmetric) {
  require(A.rows() == A.cols(), "SparseMatrixSym::from_dense: matrix must be square");
  std::vector<MatrixEntry> entries;
  for (Index c = 0; c < A.cols(); ++c) {
    for (Index r = 0; r < A.rows(); ++r) {
      if (symmetric && r > c) continue;
      if (A(r, c) != 0.0) entries.push_back({r, c, A(r, c)});
    }
  }
  return SparseMatrixSym(A.rows(), std::move(entries), symmetric);
}

SparseMatrixSym SparseMatrixSym::from_full(const SpMat& A, bool symmetric) {
  require(A.rows() == A.cols(), "SparseMatrixSym::from_full: matrix must be square");
  std::vector<MatrixEntry> entries;
  for (Index c = 0; c < A.outerSize(); ++c) {
    for (SpMat::InnerIterator it(A, c); it; ++it) {
      if (symmetric && it.row() > it.col()) continue;
      entries.push_back({it.row(), it.col(), it.value()});
    }
  }
  return SparseMatrixSym(A.rows(), std::move(entries), symmetric);
}

SparseMatrixSym SparseMatrixSym::diagonal(const Vector& d) {
  std::vector<MatrixEntry> entries;
  for (Index i = 0; i < d.size(); ++i) entries.push_back({i, i, d[i]});
  return SparseMatrixSym(d.size(), std::move(entries), true);
}

Vector SparseMatrixSym::multiply(const Eigen::Ref<const Vector>& x) const {
  require_size(x.size(), n_, "SparseMatrixSym::multiply");
  return full_ * x;
}

SparseMatrixSym SparseMatrixSym::scaled(double factor) const {
  auto entries = entries_;
  for (auto& e : entries) e.value *= factor;
  return SparseMatrixSym(n_, std::move(entries), symmetric_);
}

}  // namespace romforge
