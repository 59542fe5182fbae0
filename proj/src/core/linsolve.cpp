#include "romforge/core/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace romforge {

bool LinearSolver::factorize(const Matrix& A) {
  dense_ = true;
  lu_.compute(A);
  rcond_ = lu_.rcond();
  return std::isfinite(rcond_) && rcond_ > 1e3 * std::numeric_limits<double>::epsilon();
}

bool LinearSolver::factorize(const SpMat& A) {
  require(A.rows() == A.cols(), "LinearSolver: matrix must be square");
  if (A.rows() <= dense_threshold_) return factorize(Matrix(A));
  dense_ = false;
  rcond_ = 1.0;
  if (!sparse_ || pattern_nnz_ != A.nonZeros() || pattern_n_ != A.rows()) {
    sparse_ = std::make_unique<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
    sparse_->analyzePattern(A);
    pattern_nnz_ = A.nonZeros();
    pattern_n_ = A.rows();
  }
  sparse_->factorize(A);
  return sparse_->info() == Eigen::Success;
}

Vector LinearSolver::solve(const Vector& b) const {
  if (dense_) return lu_.solve(b);
  return sparse_->solve(b);
}

PatternAssembler::PatternAssembler(const SpMat& base, const std::vector<Index>& rows,
                                   const std::vector<Index>& cols) {
  require(rows.size() == cols.size(), "PatternAssembler: slot rows/cols differ in length");
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(base.nonZeros()) + rows.size());
  for (Index c = 0; c < base.outerSize(); ++c) {
    for (SpMat::InnerIterator it(base, c); it; ++it) trips.emplace_back(it.row(), it.col(), 0.0);
  }
  for (std::size_t s = 0; s < rows.size(); ++s) trips.emplace_back(rows[s], cols[s], 0.0);
  work_.resize(base.rows(), base.cols());
  work_.setFromTriplets(trips.begin(), trips.end());
  work_.makeCompressed();

  auto position = [&](Index r, Index c) -> Index {
    const int* inner = work_.innerIndexPtr();
    const int* begin = inner + work_.outerIndexPtr()[c];
    const int* end = inner + work_.outerIndexPtr()[c + 1];
    const int* it = std::lower_bound(begin, end, static_cast<int>(r));
    return static_cast<Index>(it - inner);
  };
  slot_pos_.resize(rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s) slot_pos_[s] = position(rows[s], cols[s]);
  set_base(base);
}

void PatternAssembler::set_base(const SpMat& base) {
  base_values_.assign(static_cast<std::size_t>(work_.nonZeros()), 0.0);
  const int* inner = work_.innerIndexPtr();
  for (Index c = 0; c < base.outerSize(); ++c) {
    const int* begin = inner + work_.outerIndexPtr()[c];
    const int* end = inner + work_.outerIndexPtr()[c + 1];
    for (SpMat::InnerIterator it(base, c); it; ++it) {
      const int* p = std::lower_bound(begin, end, static_cast<int>(it.row()));
      require(p != end && *p == it.row(), "PatternAssembler: base entry outside the assembled pattern");
      base_values_[static_cast<std::size_t>(p - inner)] += it.value();
    }
  }
}

const SpMat& PatternAssembler::assemble(const double* slots, double scale) {
  double* v = work_.valuePtr();
  std::copy(base_values_.begin(), base_values_.end(), v);
  for (std::size_t s = 0; s < slot_pos_.size(); ++s) v[slot_pos_[s]] += scale * slots[s];
  return work_;
}

}  // namespace romforge
