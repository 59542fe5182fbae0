#pragma once

#include "romforge/core/model.hpp"
#include "romforge/hb.hpp"
#include "romforge/timeint.hpp"

#include <string_view>
#include <variant>
#include <vector>

namespace romforge {

enum class SnapshotSource { HB, TM_SS, TM_TR };

std::string_view to_string(SnapshotSource s);

struct SnapshotBlock {
  SnapshotSource source = SnapshotSource::HB;
  double omega = 0.0;
  double beta = 0.0;
  Index first = 0;
  Index count = 0;
};

struct SnapshotMatrix {
  Matrix X;  ///< n x m, displacement snapshots as columns
  std::vector<SnapshotBlock> provenance;

  Index dofs() const { return X.rows(); }
  Index count() const { return X.cols(); }
};

/// Every recorded state of a trajectory (one provenance block per segment).
struct TrajectorySnapshots {
  const Trajectory* trajectory = nullptr;
  SnapshotSource source = SnapshotSource::TM_TR;
};

/// m equispaced states over one period of a harmonic-balance solution.
struct HbSnapshots {
  FourierSolution solution;
  Index samples = 50;
  double beta = 0.0;
};

using SnapshotInput = std::variant<TrajectorySnapshots, HbSnapshots>;

SnapshotMatrix assemble_snapshots(const std::vector<SnapshotInput>& sources);

enum class SvdMethod {
  Jacobi,     ///< QR preconditioning followed by one-sided (Hestenes) Jacobi
  Snapshots,  ///< eigen-decomposition of the smaller Gram matrix
};

struct ThinSvd {
  Matrix U;      ///< n x r left singular vectors
  Vector sigma;  ///< r, descending
};

/// Thin SVD of X (all min(n, m) singular values; U columns for the nonzero ones).
ThinSvd thin_svd(const Matrix& X, SvdMethod method = SvdMethod::Jacobi);

struct PodBasis {
  Matrix U;      ///< n x p, orthonormal columns, largest entry of each positive
  Vector sigma;  ///< all singular values, descending
  double energy = 0.0;  ///< sum sigma^2

  Index dofs() const { return U.rows(); }
  Index size() const { return U.cols(); }
};

/// Relative rank cut below which singular directions are treated as noise.
inline constexpr double kRankTolerance = 1e-14;

Index numerical_rank(const Vector& sigma);

PodBasis compute_pod(const SnapshotMatrix& X, Index p, SvdMethod method = SvdMethod::Jacobi);
PodBasis compute_pod(const Matrix& X, Index p, SvdMethod method = SvdMethod::Jacobi);

/// sigma_k^2 / sum sigma^2
Vector energy_spectrum(const PodBasis& basis);

/// Galerkin-projected system M Q'' + C Q' + K Q + g(Q,Q) + h(Q,Q,Q) = U^T F.
class ReducedOrderModel final : public DynamicSystem {
 public:
  ReducedOrderModel(Matrix M, Matrix C, Matrix K, CubicTensor g, QuarticTensor h, ForcingSpec forcing,
                    std::vector<Observable> observables, Matrix basis);

  Index dofs() const override { return p_; }
  const SpMat& mass() const override { return Ms_; }
  const SpMat& damping() const override { return Cs_; }
  const SpMat& stiffness() const override { return Ks_; }
  const NonlinearTerms& nonlinear() const override { return force_; }
  const ForcingSpec& forcing() const override { return forcing_; }
  const std::vector<Observable>& observables() const override { return observables_; }

  const Matrix& M() const { return M_; }
  const Matrix& C() const { return C_; }
  const Matrix& K() const { return K_; }
  const CubicTensor& g() const { return force_.quadratic(); }
  const QuarticTensor& h() const { return force_.cubic(); }
  const Matrix& basis() const { return U_; }

  /// Dense canonical arrays: g(i,j,k) with j <= k (zero elsewhere), row-major i-j-k.
  std::vector<double> g_dense() const;
  std::vector<double> h_dense() const;

  ReducedOrderModel with_forcing(ForcingSpec forcing) const;

 private:
  Index p_;
  Matrix M_, C_, K_;
  SpMat Ms_, Cs_, Ks_;
  PolynomialForce force_;
  ForcingSpec forcing_;
  std::vector<Observable> observables_;
  Matrix U_;
};

/// Exact Galerkin projection; fails when U^T U deviates from I by more than 1e-8.
ReducedOrderModel project(const FullOrderModel& model, const PodBasis& basis);
ReducedOrderModel project(const FullOrderModel& model, const Matrix& U);

/// U Q for a reduced trajectory (velocities lifted alike).
Trajectory lift(const Matrix& U, const Trajectory& reduced);
Vector lift(const Matrix& U, const Vector& q);
Vector project_state(const Matrix& U, const Vector& D);

struct ModalCurves {
  std::vector<Index> modes;
  Matrix q;     ///< modes x n_t: phi_i^T M D
  Matrix qdot;  ///< modes x n_t: phi_i^T M V
};

/// Mass-normalized modal coordinates of a physical trajectory (0-based mode indices).
ModalCurves eigenmode_coordinates(const FullOrderModel& model, const Trajectory& traj, const std::vector<Index>& modes);

}  // namespace romforge
