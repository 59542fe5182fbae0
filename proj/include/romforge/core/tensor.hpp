#pragma once

#include "romforge/common.hpp"

#include <array>
#include <vector>

namespace romforge {

struct CubicEntry {
  Index i = 0, j = 0, k = 0;
  double value = 0.0;
};

struct QuarticEntry {
  Index i = 0, j = 0, k = 0, l = 0;
  double value = 0.0;
};

/// Quadratic force G(D,D)_i = sum value * D_j * D_k over canonical entries with
/// j <= k. Any multiplicity from the symmetric pair (j,k)/(k,j) is folded into
/// the stored value.
class CubicTensor {
 public:
  CubicTensor() = default;
  explicit CubicTensor(Index n) : n_(n) {}
  /// Trailing indices are sorted into canonical order and duplicates summed.
  CubicTensor(Index n, std::vector<CubicEntry> entries);

  Index n() const { return n_; }
  const std::vector<CubicEntry>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// out += G(D,D)
  void apply(const Eigen::Ref<const Vector>& D, Eigen::Ref<Vector> out) const;

 private:
  Index n_ = 0;
  std::vector<CubicEntry> entries_;
};

/// Cubic force H(D,D,D)_i = sum value * D_j * D_k * D_l with j <= k <= l.
class QuarticTensor {
 public:
  QuarticTensor() = default;
  explicit QuarticTensor(Index n) : n_(n) {}
  QuarticTensor(Index n, std::vector<QuarticEntry> entries);

  Index n() const { return n_; }
  const std::vector<QuarticEntry>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  void apply(const Eigen::Ref<const Vector>& D, Eigen::Ref<Vector> out) const;

 private:
  Index n_ = 0;
  std::vector<QuarticEntry> entries_;
};

/// Sparsity pattern of a nonlinear tangent; slot s addresses (rows[s], cols[s]).
struct TangentPattern {
  Index n = 0;
  std::vector<Index> rows;
  std::vector<Index> cols;

  std::size_t size() const { return rows.size(); }
  void add_to_triplets(const double* slots, std::vector<Triplet>& out, double scale = 1.0) const;
  void add_to_dense(const double* slots, Matrix& out, double scale = 1.0) const;
};

/// State (and optionally forcing-phase) dependent force on the left-hand side
/// of the equations of motion, excluding the linear stiffness term.
///
/// Sample-wise entry points take one row per dof with the time samples laid
/// out contiguously; `theta` holds the forcing phase angle of each sample.
class NonlinearTerms {
 public:
  virtual ~NonlinearTerms() = default;

  virtual Index dofs() const = 0;
  virtual const TangentPattern& pattern() const = 0;
  virtual bool phase_dependent() const { return false; }
  /// Highest power of the state appearing in the force.
  virtual int degree() const = 0;

  virtual void add_force(const Eigen::Ref<const Vector>& D, double theta,
                         Eigen::Ref<Vector> out) const = 0;
  /// Overwrites slots (length pattern().size()).
  virtual void tangent(const Eigen::Ref<const Vector>& D, double theta, double* slots) const = 0;

  virtual void add_force_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& out) const = 0;
  /// Overwrites slots, resized to pattern().size() x samples.
  virtual void tangent_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& slots) const = 0;
};

/// G(D,D) + H(D,D,D) evaluator with a precomputed tangent pattern.
class PolynomialForce final : public NonlinearTerms {
 public:
  PolynomialForce() = default;
  PolynomialForce(CubicTensor G, QuarticTensor H);

  const CubicTensor& quadratic() const { return G_; }
  const QuarticTensor& cubic() const { return H_; }

  Index dofs() const override { return n_; }
  const TangentPattern& pattern() const override { return pattern_; }
  int degree() const override { return H_.empty() ? (G_.empty() ? 1 : 2) : 3; }

  void add_force(const Eigen::Ref<const Vector>& D, double theta, Eigen::Ref<Vector> out) const override;
  void tangent(const Eigen::Ref<const Vector>& D, double theta, double* slots) const override;
  void add_force_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& out) const override;
  void tangent_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& slots) const override;

 private:
  Index n_ = 0;
  CubicTensor G_;
  QuarticTensor H_;
  TangentPattern pattern_;
  // Slot of d/dD_j, d/dD_k (cubic) and d/dD_j, d/dD_k, d/dD_l (quartic) per entry.
  std::vector<std::array<Index, 2>> g_slots_;
  std::vector<std::array<Index, 3>> h_slots_;
};

}  // namespace romforge
