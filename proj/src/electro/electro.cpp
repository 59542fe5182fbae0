#include "romforge/electro.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace romforge {

PlateOracle::PlateOracle(Index n, std::vector<Index> gap_dofs, std::vector<double> areas, double gap)
    : n_(n), dofs_(std::move(gap_dofs)), areas_(std::move(areas)), gap_(gap) {
  require(n_ >= 1, "PlateOracle: empty model");
  require(dofs_.size() == areas_.size(), "PlateOracle: one area per facing dof");
  require(gap_ > 0.0, "PlateOracle: gap must be positive");
  for (std::size_t i = 0; i < dofs_.size(); ++i) {
    require(dofs_[i] >= 0 && dofs_[i] < n_, "PlateOracle: facing dof out of range");
    require(areas_[i] > 0.0, "PlateOracle: areas must be positive");
  }
}

PlateOracle PlateOracle::for_beam(const zoo::BeamSpec& spec, double gap) {
  const auto layout = zoo::beam_layout(spec);
  std::vector<double> areas(layout.transverse_dofs.size(), spec.width * layout.element_length);
  return PlateOracle(3 * layout.nodes, layout.transverse_dofs, std::move(areas), gap);
}

double PlateOracle::clearance(const Vector& D) const {
  require_size(D.size(), n_, "PlateOracle::clearance");
  double c = 1.0;
  for (Index d : dofs_) c = std::min(c, (gap_ - D[d]) / gap_);
  return c;
}

Vector PlateOracle::force(const Vector& D) const {
  require_size(D.size(), n_, "PlateOracle::force");
  Vector f = Vector::Zero(n_);
  for (std::size_t i = 0; i < dofs_.size(); ++i) {
    const double s = gap_ - D[dofs_[i]];
    if (!(s > kMinClearance * gap_)) {
      std::ostringstream msg;
      msg << "PlateOracle: gap closure at dof " << dofs_[i] << " (remaining gap " << s << " of " << gap_ << ")";
      throw ContractViolation(msg.str());
    }
    f[dofs_[i]] += kEpsilon0 * areas_[i] / (2.0 * s * s);
  }
  return f;
}

Vector uniform_grid(double lo, double hi, Index count) {
  require(count >= 2 && hi > lo, "uniform_grid: need hi > lo and at least two points");
  return Vector::LinSpaced(count, lo, hi);
}

ElectroManifold sample_manifold(const ElectroOracle& oracle, const Matrix& U, Index active, const Vector& grid) {
  require(U.rows() == oracle.dofs(), "sample_manifold: basis and oracle dimensions differ");
  require(active >= 0 && active < U.cols(), "sample_manifold: active POM index out of range");
  require(grid.size() >= 1 && grid.allFinite(), "sample_manifold: empty or non-finite grid");
  ElectroManifold mf;
  mf.active = active;
  mf.grid = grid;
  mf.samples.resize(U.cols(), grid.size());
  for (Index s = 0; s < grid.size(); ++s) {
    Vector F;
    try {
      F = oracle.force(U.col(active) * grid[s]);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "sample_manifold: oracle failed at grid point " << s << " (q = " << grid[s] << "): " << e.what();
      throw ContractViolation(msg.str());
    }
    mf.samples.col(s) = U.transpose() * F;
  }
  mf.dropped.assign(static_cast<std::size_t>(U.cols()), false);
  return mf;
}

Matrix fit_cubic(const Vector& grid, const Matrix& samples) {
  if (grid.size() < 8) throw ConfigError("fit_cubic: at least 8 grid points are required");
  require(samples.cols() == grid.size(), "fit_cubic: one sample column per grid point");
  const double scale = grid.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw ConfigError("fit_cubic: degenerate grid (all points at zero)");
  Matrix V(grid.size(), 4);
  for (Index s = 0; s < grid.size(); ++s) {
    const double x = grid[s] / scale;
    V(s, 0) = 1.0;
    V(s, 1) = x;
    V(s, 2) = x * x;
    V(s, 3) = x * x * x;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(V);
  const auto R = qr.matrixR();
  const double ratio = std::abs(R(3, 3)) / std::abs(R(0, 0));
  if (qr.rank() < 4 || !(ratio > 1e-8)) {
    throw ConfigError("fit_cubic: ill-conditioned design matrix (grid has too few distinct points)");
  }
  Matrix c = qr.solve(Matrix(samples.transpose())).transpose();  // rows x 4 in scaled abscissa
  for (int j = 1; j < 4; ++j) c.col(j) /= std::pow(scale, j);
  return c;
}

void fit_cubic(ElectroManifold& mf, double rel_tol) {
  require(mf.samples.cols() == mf.grid.size(), "fit_cubic: manifold has not been sampled");
  const Matrix c = fit_cubic(mf.grid, mf.samples);
  const Index p = mf.channels();
  mf.alpha = c / kEpsilon0;
  mf.fit_residual.resize(p);
  mf.dropped.assign(static_cast<std::size_t>(p), false);
  for (Index i = 0; i < p; ++i) {
    double res = 0.0;
    for (Index s = 0; s < mf.grid.size(); ++s) {
      const double q = mf.grid[s];
      const double fit = c(i, 0) + q * (c(i, 1) + q * (c(i, 2) + q * c(i, 3)));
      res = std::max(res, std::abs(fit - mf.samples(i, s)));
    }
    mf.fit_residual[i] = res;
    const double range = mf.samples.row(i).maxCoeff() - mf.samples.row(i).minCoeff();
    const double level = std::max(range, 1e-12 * mf.samples.cwiseAbs().maxCoeff());
    if (res <= rel_tol * level) continue;
    std::ostringstream msg;
    msg << "electrostatic channel " << i << ": cubic fit residual " << res << " exceeds " << rel_tol
        << " of its force range " << range;
    if (i == mf.active) throw ConfigError(msg.str() + " (active channel; narrow the sampled range)");
    mf.alpha.row(i).setZero();
    mf.dropped[static_cast<std::size_t>(i)] = true;
    mf.warnings.push_back(msg.str() + "; channel dropped");
    spdlog::warn("{}; channel dropped", msg.str());
  }
}

RangeCheck check_range(const ElectroManifold& mf, double q) {
  const double lo = mf.q_min(), hi = mf.q_max();
  const double out = std::max({lo - q, q - hi, 0.0}) / (hi - lo);
  if (out > 0.25) {
    std::ostringstream msg;
    msg << "electrostatic manifold evaluated at q = " << q << ", more than 25% outside its fitted range [" << lo
        << ", " << hi << "]";
    throw ContractViolation(msg.str());
  }
  if (out > 0.10) {
    spdlog::warn("electrostatic manifold extrapolated to q = {} (fitted range [{}, {}])", q, lo, hi);
    return RangeCheck::Extrapolating;
  }
  return RangeCheck::Inside;
}

Vector eval_ef(const ElectroManifold& mf, double q, double v_dc, double v_ac, double omega, double t) {
  require(mf.fitted(), "eval_ef: manifold has not been fitted");
  check_range(mf, q);
  const double amp = kEpsilon0 * (v_dc * v_dc + 2.0 * v_dc * v_ac * std::cos(omega * t));
  return amp * (mf.alpha.col(0) + q * (mf.alpha.col(1) + q * (mf.alpha.col(2) + q * mf.alpha.col(3))));
}

Vector eval_ef_dq(const ElectroManifold& mf, double q, double v_dc, double v_ac, double omega, double t) {
  require(mf.fitted(), "eval_ef_dq: manifold has not been fitted");
  check_range(mf, q);
  const double amp = kEpsilon0 * (v_dc * v_dc + 2.0 * v_dc * v_ac * std::cos(omega * t));
  return amp * (mf.alpha.col(1) + q * (2.0 * mf.alpha.col(2) + 3.0 * q * mf.alpha.col(3)));
}

// ---------------------------------------------------------------------------

ElectroForce::ElectroForce(const PolynomialForce& base, Matrix alpha, Index active, double v_dc, double v_ac)
    : base_(base), alpha_(std::move(alpha)), active_(active), v_dc_(v_dc), v_ac_(v_ac) {
  require(alpha_.rows() == base_.dofs() && alpha_.cols() == 4, "ElectroForce: coefficient table shape");
  require(active_ >= 0 && active_ < base_.dofs(), "ElectroForce: active index out of range");
  pattern_ = base_.pattern();
  pattern_.n = base_.dofs();
  if (v_dc_ != 0.0) {
    for (Index i = 0; i < alpha_.rows(); ++i) {
      if (alpha_.row(i).cwiseAbs().maxCoeff() == 0.0) continue;
      channels_.push_back(i);
      pattern_.rows.push_back(i);
      pattern_.cols.push_back(active_);
    }
  }
}

void ElectroForce::add_force(const Eigen::Ref<const Vector>& D, double theta, Eigen::Ref<Vector> out) const {
  base_.add_force(D, theta, out);
  if (channels_.empty()) return;
  const double q = D[active_];
  const double e = kEpsilon0 * v_dc_ * v_dc_;
  const double h = 2.0 * kEpsilon0 * v_dc_ * v_ac_ * std::cos(theta);
  for (Index i : channels_) {
    const double var = q * (alpha_(i, 1) + q * (alpha_(i, 2) + q * alpha_(i, 3)));
    out[i] -= e * (alpha_(i, 0) + var) + h * var;
  }
}

void ElectroForce::tangent(const Eigen::Ref<const Vector>& D, double theta, double* slots) const {
  base_.tangent(D, theta, slots);
  const std::size_t off = base_.pattern().size();
  const double q = D[active_];
  const double amp = kEpsilon0 * (v_dc_ * v_dc_ + 2.0 * v_dc_ * v_ac_ * std::cos(theta));
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    const Index i = channels_[c];
    slots[off + c] = -amp * (alpha_(i, 1) + q * (2.0 * alpha_(i, 2) + 3.0 * q * alpha_(i, 3)));
  }
}

void ElectroForce::add_force_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& out) const {
  base_.add_force_samples(D, theta, out);
  if (channels_.empty()) return;
  const Index N = D.cols();
  const double e = kEpsilon0 * v_dc_ * v_dc_;
  for (Index s = 0; s < N; ++s) {
    const double q = D(active_, s);
    const double h = 2.0 * kEpsilon0 * v_dc_ * v_ac_ * std::cos(theta[s]);
    for (Index i : channels_) {
      const double var = q * (alpha_(i, 1) + q * (alpha_(i, 2) + q * alpha_(i, 3)));
      out(i, s) -= e * (alpha_(i, 0) + var) + h * var;
    }
  }
}

void ElectroForce::tangent_samples(const SampleMatrix& D, const Vector& theta, SampleMatrix& slots) const {
  const Index N = D.cols();
  const Index nb = static_cast<Index>(base_.pattern().size());
  SampleMatrix base_slots;
  base_.tangent_samples(D, theta, base_slots);
  slots.resize(static_cast<Index>(pattern_.size()), N);
  if (nb > 0) slots.topRows(nb) = base_slots;
  for (Index s = 0; s < N; ++s) {
    const double q = D(active_, s);
    const double amp = kEpsilon0 * (v_dc_ * v_dc_ + 2.0 * v_dc_ * v_ac_ * std::cos(theta[s]));
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      const Index i = channels_[c];
      slots(nb + static_cast<Index>(c), s) = -amp * (alpha_(i, 1) + q * (2.0 * alpha_(i, 2) + 3.0 * q * alpha_(i, 3)));
    }
  }
}

// ---------------------------------------------------------------------------

ElectroCoupledSystem::ElectroCoupledSystem(const ReducedOrderModel& rom, const ElectroManifold& manifold, double v_dc,
                                           double v_ac)
    : rom_(rom),
      manifold_(manifold),
      v_dc_(v_dc),
      v_ac_(v_ac),
      force_(PolynomialForce(rom.g(), rom.h()), manifold.alpha, manifold.active, v_dc, v_ac) {
  require(manifold.fitted(), "ElectroCoupledSystem: manifold has not been fitted");
  require(manifold.channels() == rom.dofs(), "ElectroCoupledSystem: manifold was built for another basis size");
  require(std::isfinite(v_dc) && std::isfinite(v_ac), "ElectroCoupledSystem: non-finite voltage");
  forcing_ = rom.forcing();
  forcing_.F0 = 2.0 * kEpsilon0 * v_dc * manifold.alpha.col(0);
  forcing_.beta = v_ac;
  forcing_.phase = 0.0;
}

Vector ElectroCoupledSystem::static_equilibrium() const {
  const Index p = dofs();
  const double theta = 0.5 * std::numbers::pi;  // AC part vanishes
  Vector Q = Vector::Zero(p);
  const double scale = std::max(Matrix(stiffness()).norm(), 1e-300);
  for (int it = 0; it < 50; ++it) {
    const Vector r = internal_force(*this, Q, theta);
    if (r.norm() <= 1e-13 * scale * std::max(Q.norm(), 1e-3 * std::abs(manifold_.q_max()))) return Q;
    const Matrix T = tangent_stiffness_dense(*this, Q, theta);
    const Vector dQ = T.partialPivLu().solve(-r);
    Q += dQ;
    if (dQ.norm() <= 1e-15 * std::max(Q.norm(), 1.0)) return Q;
  }
  throw ConvergenceError("static_equilibrium: Newton did not converge (pull-in?)",
                         internal_force(*this, Q, theta).norm(), 50);
}

double ElectroCoupledSystem::linearized_frequency() const {
  const Vector Q = static_equilibrium();
  const Matrix T = tangent_stiffness_dense(*this, Q, 0.5 * std::numbers::pi);
  const Matrix M = Matrix(mass());
  Eigen::EigenSolver<Matrix> es(M.partialPivLu().solve(T));
  double lam = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < es.eigenvalues().size(); ++k) lam = std::min(lam, es.eigenvalues()[k].real());
  if (!(lam > 0.0)) throw ConvergenceError("linearized_frequency: statically unstable equilibrium", lam, 0);
  return std::sqrt(lam);
}

FrfBranch coupled_frf(const ReducedOrderModel& rom, const ElectroManifold& manifold, double v_dc, double v_ac,
                      double omega_min, double omega_max, const ContinuationConfig& cfg) {
  ElectroCoupledSystem sys(rom, manifold, v_dc, v_ac);
  FrfBranch branch = trace_frf(sys, omega_min, omega_max, v_ac, cfg);
  bool flagged = false;
  for (const auto& pt : branch.points) {
    const Matrix D = sample_period(pt.sol, 32);
    const double lo = D.row(manifold.active).minCoeff(), hi = D.row(manifold.active).maxCoeff();
    for (double q : {lo, hi}) {
      if (check_range(manifold, q) == RangeCheck::Extrapolating && !flagged) {
        std::ostringstream msg;
        msg << "orbit at omega = " << pt.omega << " extrapolates the electrostatic manifold (q = " << q << ")";
        branch.diagnostics.push_back(msg.str());
        flagged = true;
      }
    }
  }
  return branch;
}

}  // namespace romforge
