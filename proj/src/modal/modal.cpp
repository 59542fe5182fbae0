#include "romforge/modal.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace romforge {

std::vector<EigenPair> solve_eigs(const DynamicSystem& model, Index k) {
  const Index n = model.dofs();
  require(k >= 1 && k <= n, "solve_eigs: k must lie in [1, n], got " + std::to_string(k));
  const Matrix M = Matrix(model.mass());
  Matrix K = Matrix(model.stiffness());
  K = 0.5 * (K + K.transpose()).eval();

  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw ContractViolation("solve_eigs: mass matrix is not positive definite");

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(K, M, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw ContractViolation("solve_eigs: generalized eigensolver failed");

  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    double lambda = es.eigenvalues()[i];
    if (lambda < -1e-10 * scale) {
      throw ContractViolation("solve_eigs: negative eigenvalue " + std::to_string(lambda) + " (K not positive semidefinite)");
    }
    Vector phi = es.eigenvectors().col(i);
    phi /= std::sqrt(phi.dot(M * phi));
    Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    if (phi[imax] < 0.0) phi = -phi;
    out.push_back({std::sqrt(std::max(lambda, 0.0)), std::move(phi)});
  }
  return out;
}

SparseMatrixSym rayleigh_damping(const FullOrderModel& model, double omega0, double Q) {
  if (!(Q > 0.0)) throw ContractViolation("rayleigh_damping: quality factor must be positive");
  if (!(omega0 >= 0.0)) throw ContractViolation("rayleigh_damping: reference frequency must be nonnegative");
  return model.M().scaled(omega0 / Q);
}

}  // namespace romforge
