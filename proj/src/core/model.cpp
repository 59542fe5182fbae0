#include "romforge/core/model.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace romforge {

Vector internal_force(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D, double theta) {
  require_size(D.size(), sys.dofs(), "internal_force");
  Vector f = sys.stiffness() * D;
  sys.nonlinear().add_force(D, theta, f);
  return f;
}

SpMat tangent_stiffness(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D, double theta) {
  require_size(D.size(), sys.dofs(), "tangent_stiffness");
  const auto& nl = sys.nonlinear();
  std::vector<double> slots(nl.pattern().size());
  nl.tangent(D, theta, slots.data());
  std::vector<Triplet> trips;
  trips.reserve(slots.size() + static_cast<std::size_t>(sys.stiffness().nonZeros()));
  const SpMat& K = sys.stiffness();
  for (Index c = 0; c < K.outerSize(); ++c) {
    for (SpMat::InnerIterator it(K, c); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  }
  nl.pattern().add_to_triplets(slots.data(), trips);
  SpMat T(sys.dofs(), sys.dofs());
  T.setFromTriplets(trips.begin(), trips.end());
  return T;
}

Matrix tangent_stiffness_dense(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D, double theta) {
  require_size(D.size(), sys.dofs(), "tangent_stiffness_dense");
  const auto& nl = sys.nonlinear();
  std::vector<double> slots(nl.pattern().size());
  nl.tangent(D, theta, slots.data());
  Matrix T = Matrix(sys.stiffness());
  nl.pattern().add_to_dense(slots.data(), T);
  return T;
}

Vector residual(const DynamicSystem& sys, const ForcingSpec& load, const Eigen::Ref<const Vector>& D,
                const Eigen::Ref<const Vector>& V, const Eigen::Ref<const Vector>& A, double t) {
  require_size(V.size(), sys.dofs(), "residual velocity");
  require_size(A.size(), sys.dofs(), "residual acceleration");
  Vector r = sys.mass() * A + sys.damping() * V + internal_force(sys, D, load.theta(t));
  if (load.F0.size() == sys.dofs()) r -= load.scale(t) * load.F0;
  return r;
}

Vector observe(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D) {
  const auto& obs = sys.observables();
  Vector out(static_cast<Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) out[static_cast<Index>(i)] = obs[i].functional.dot(D);
  return out;
}

FullOrderModel::FullOrderModel(SparseMatrixSym M, SparseMatrixSym C, SparseMatrixSym K, CubicTensor G,
                               QuarticTensor H, ForcingSpec forcing, std::vector<Observable> observables)
    : n_(M.n()),
      M_(std::move(M)),
      C_(std::move(C)),
      K_(std::move(K)),
      forcing_(std::move(forcing)),
      observables_(std::move(observables)) {
  require(C_.n() == n_ && K_.n() == n_, "FullOrderModel: M, C, K dimensions differ");
  if (G.n() == 0) G = CubicTensor(n_);
  if (H.n() == 0) H = QuarticTensor(n_);
  require(G.n() == n_ && H.n() == n_, "FullOrderModel: tensor dimension differs from n");
  require(M_.symmetric(), "FullOrderModel: mass matrix must be stored symmetric");
  require(K_.symmetric(), "FullOrderModel: stiffness matrix must be stored symmetric");
  if (forcing_.F0.size() == 0) forcing_.F0 = Vector::Zero(n_);
  require_size(forcing_.F0.size(), n_, "FullOrderModel forcing F0");
  require(forcing_.F0.allFinite(), "FullOrderModel: forcing vector is not finite");
  for (const auto& o : observables_) require_size(o.functional.size(), n_, "FullOrderModel observable");

  if (n_ > 0) {
    Eigen::SimplicialLLT<SpMat> llt(M_.full());
    if (llt.info() != Eigen::Success) throw ContractViolation("FullOrderModel: mass matrix is not positive definite");
  }
  force_ = PolynomialForce(std::move(G), std::move(H));
}

FullOrderModel FullOrderModel::with_forcing(ForcingSpec forcing) const {
  return FullOrderModel(M_, C_, K_, G(), H(), std::move(forcing), observables_);
}

FullOrderModel FullOrderModel::with_damping(SparseMatrixSym C) const {
  return FullOrderModel(M_, std::move(C), K_, G(), H(), forcing_, observables_);
}

FullOrderModel FullOrderModel::with_observables(std::vector<Observable> observables) const {
  return FullOrderModel(M_, C_, K_, G(), H(), forcing_, std::move(observables));
}

Vector eval_internal_force(const FullOrderModel& model, const Eigen::Ref<const Vector>& D) {
  require(D.allFinite(), "eval_internal_force: non-finite displacement");
  return internal_force(model, D, 0.0);
}

SparseMatrixSym eval_tangent_stiffness(const FullOrderModel& model, const Eigen::Ref<const Vector>& D) {
  require(D.allFinite(), "eval_tangent_stiffness: non-finite displacement");
  return SparseMatrixSym::from_full(tangent_stiffness(model, D, 0.0), false);
}

Vector eval_residual(const FullOrderModel& model, const Eigen::Ref<const Vector>& D,
                     const Eigen::Ref<const Vector>& V, const Eigen::Ref<const Vector>& A, double t) {
  require(D.allFinite() && V.allFinite() && A.allFinite(), "eval_residual: non-finite state");
  return residual(model, model.forcing(), D, V, A, t);
}

}  // namespace romforge
