#pragma once

#include "romforge/core/sparse.hpp"
#include "romforge/core/system.hpp"
#include "romforge/core/tensor.hpp"

#include <string>
#include <vector>

namespace romforge {

/// Discrete equations of motion with an exact polynomial internal force:
///   M D'' + C D' + K D + G(D,D) + H(D,D,D) = beta F0 cos(omega t + phase).
/// Immutable once constructed; construction checks dimensions, symmetry and
/// positive definiteness of M.
class FullOrderModel final : public DynamicSystem {
 public:
  FullOrderModel(SparseMatrixSym M, SparseMatrixSym C, SparseMatrixSym K, CubicTensor G, QuarticTensor H,
                 ForcingSpec forcing, std::vector<Observable> observables = {});

  Index dofs() const override { return n_; }
  const SpMat& mass() const override { return M_.full(); }
  const SpMat& damping() const override { return C_.full(); }
  const SpMat& stiffness() const override { return K_.full(); }
  const NonlinearTerms& nonlinear() const override { return force_; }
  const ForcingSpec& forcing() const override { return forcing_; }
  const std::vector<Observable>& observables() const override { return observables_; }

  const SparseMatrixSym& M() const { return M_; }
  const SparseMatrixSym& C() const { return C_; }
  const SparseMatrixSym& K() const { return K_; }
  const CubicTensor& G() const { return force_.quadratic(); }
  const QuarticTensor& H() const { return force_.cubic(); }
  const PolynomialForce& polynomial() const { return force_; }

  FullOrderModel with_forcing(ForcingSpec forcing) const;
  FullOrderModel with_damping(SparseMatrixSym C) const;
  FullOrderModel with_observables(std::vector<Observable> observables) const;

 private:
  Index n_;
  SparseMatrixSym M_, C_, K_;
  PolynomialForce force_;
  ForcingSpec forcing_;
  std::vector<Observable> observables_;
};

/// K D + G(D,D) + H(D,D,D)
Vector eval_internal_force(const FullOrderModel& model, const Eigen::Ref<const Vector>& D);

/// K + dG/dD + dH/dD. Returned without the symmetry flag since quadratic terms
/// that do not derive from a potential give a non-symmetric tangent.
SparseMatrixSym eval_tangent_stiffness(const FullOrderModel& model, const Eigen::Ref<const Vector>& D);

/// M A + C V + f_int(D) - beta F0 cos(omega t + phase)
Vector eval_residual(const FullOrderModel& model, const Eigen::Ref<const Vector>& D,
                     const Eigen::Ref<const Vector>& V, const Eigen::Ref<const Vector>& A, double t);

}  // namespace romforge
