#pragma once

// Electrostatic actuation of a reduced model through a precomputed force
// manifold over the first POM amplitude. Forces are in uN, displacements in
// um, voltages in V.

#include "romforge/continuation.hpp"
#include "romforge/pod.hpp"
#include "romforge/zoo.hpp"

#include <string>
#include <vector>

namespace romforge {

inline constexpr double kEpsilon0 = 8.8541878128e-6;  ///< vacuum permittivity, uN / V^2

/// Maps a physical displacement to the nodal electrostatic force per unit V^2.
class ElectroOracle {
 public:
  virtual ~ElectroOracle() = default;
  virtual Index dofs() const = 0;
  /// Throws ContractViolation when a gap is (nearly) closed.
  virtual Vector force(const Vector& D) const = 0;
};

/// One parallel-plate capacitor per facing dof: f_i = eps0 A_i / (2 (g - d_i)^2),
/// pulling along +d_i towards an electrode at distance g.
class PlateOracle final : public ElectroOracle {
 public:
  PlateOracle(Index n, std::vector<Index> gap_dofs, std::vector<double> areas, double gap);

  /// Electrode facing the whole span of the beam; tributary area width x element length per node.
  static PlateOracle for_beam(const zoo::BeamSpec& spec, double gap);

  Index dofs() const override { return n_; }
  Vector force(const Vector& D) const override;

  double gap() const { return gap_; }
  const std::vector<Index>& gap_dofs() const { return dofs_; }
  const std::vector<double>& areas() const { return areas_; }
  /// Smallest remaining gap as a fraction of the nominal one.
  double clearance(const Vector& D) const;

  static constexpr double kMinClearance = 0.05;

 private:
  Index n_;
  std::vector<Index> dofs_;
  std::vector<double> areas_;
  double gap_;
};

/// Force samples along D = U_active q and their cubic fits, one channel per POM.
struct ElectroManifold {
  Index active = 0;
  Vector grid;               ///< q values (um)
  Matrix samples;            ///< p x grid: U^T F(U_active q), uN / V^2
  Matrix alpha;              ///< p x 4: F / (eps0 V^2) = alpha_0 + alpha_1 q + alpha_2 q^2 + alpha_3 q^3 (um^2 / um^j)
  Vector fit_residual;       ///< p: max |fit - sample| over the grid, uN / V^2
  std::vector<bool> dropped; ///< channels zeroed because the cubic does not represent them
  std::vector<std::string> warnings;

  Index channels() const { return samples.rows(); }
  bool fitted() const { return alpha.rows() == samples.rows() && alpha.cols() == 4; }
  double q_min() const { return grid.minCoeff(); }
  double q_max() const { return grid.maxCoeff(); }
};

inline constexpr Index kDefaultGridPoints = 23;

Vector uniform_grid(double lo, double hi, Index count = kDefaultGridPoints);

ElectroManifold sample_manifold(const ElectroOracle& oracle, const Matrix& U, Index active, const Vector& grid);

/// Least-squares cubic in q for each column-sample row; returns rows x 4 coefficients.
/// Needs at least 8 points; degenerate grids raise ConfigError.
Matrix fit_cubic(const Vector& grid, const Matrix& samples);

/// Fits every channel (coefficients per unit eps0 V^2). Channels other than the
/// active one whose max residual exceeds rel_tol times the channel's force range
/// are dropped to zero with a logged warning.
void fit_cubic(ElectroManifold& manifold, double rel_tol = 1e-2);

enum class RangeCheck { Inside, Extrapolating };

/// Hard error beyond 25 % of the fitted range outside it, warning beyond 10 %.
RangeCheck check_range(const ElectroManifold& manifold, double q);

/// eps0 (V_DC^2 + 2 V_DC V_AC cos(omega t)) P(q); V_AC^2 terms are left out by design.
Vector eval_ef(const ElectroManifold& manifold, double q, double v_dc, double v_ac, double omega, double t);
/// d eval_ef / dq
Vector eval_ef_dq(const ElectroManifold& manifold, double q, double v_dc, double v_ac, double omega, double t);

/// f_nl(Q, theta) = g + h - eps0 (V_DC^2 P(Q_a) + 2 V_DC V_AC cos(theta) (P(Q_a) - alpha_0)).
/// The single-harmonic constant part 2 eps0 V_DC alpha_0 V_AC cos(theta) is the forcing.
class ElectroForce final : public NonlinearTerms {
 public:
  ElectroForce(const PolynomialForce& base, Matrix alpha, Index active, double v_dc, double v_ac);

  Index dofs() const override { return base_.dofs(); }
  const TangentPattern& pattern() const override { return pattern_; }
  bool phase_dependent() const override { return v_ac_ != 0.0 && v_dc_ != 0.0; }
  int degree() const override { return 3; }

  void add_force(const Eigen::Ref<const Vector>& D, double theta, Eigen::Ref<Vector> out) const override;
  void tangent(const Eigen::Ref<const Vector>& D, double theta, double* slots) const override;
  void add_force_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& out) const override;
  void tangent_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& slots) const override;

 private:
  PolynomialForce base_;
  Matrix alpha_;
  Index active_;
  double v_dc_, v_ac_;
  std::vector<Index> channels_;  // rows with a nonzero fit
  TangentPattern pattern_;
};

class ElectroCoupledSystem final : public DynamicSystem {
 public:
  ElectroCoupledSystem(const ReducedOrderModel& rom, const ElectroManifold& manifold, double v_dc, double v_ac);

  Index dofs() const override { return rom_.dofs(); }
  const SpMat& mass() const override { return rom_.mass(); }
  const SpMat& damping() const override { return rom_.damping(); }
  const SpMat& stiffness() const override { return rom_.stiffness(); }
  const NonlinearTerms& nonlinear() const override { return force_; }
  const ForcingSpec& forcing() const override { return forcing_; }
  const std::vector<Observable>& observables() const override { return rom_.observables(); }

  double v_dc() const { return v_dc_; }
  double v_ac() const { return v_ac_; }
  const ElectroManifold& manifold() const { return manifold_; }

  /// Static equilibrium under V_DC alone (Newton from rest).
  Vector static_equilibrium() const;
  /// Lowest undamped frequency of the system linearized about the static equilibrium.
  double linearized_frequency() const;

 private:
  ReducedOrderModel rom_;
  ElectroManifold manifold_;
  double v_dc_, v_ac_;
  ElectroForce force_;
  ForcingSpec forcing_;
};

/// FRF of the electrostatically driven ROM (beta = V_AC). Orbits leaving the
/// fitted manifold range are flagged in the diagnostics, or rejected beyond
/// the hard limit.
FrfBranch coupled_frf(const ReducedOrderModel& rom, const ElectroManifold& manifold, double v_dc, double v_ac,
                      double omega_min, double omega_max, const ContinuationConfig& cfg = {});

}  // namespace romforge
