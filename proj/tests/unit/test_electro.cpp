#include <doctest.h>

#include "random_models.hpp"
#include "romforge/electro.hpp"
#include "romforge/modal.hpp"

#include <numbers>

using namespace romforge;

namespace {

ElectroManifold manifold_with(const Matrix& alpha, double lo, double hi) {
  ElectroManifold mf;
  mf.grid = uniform_grid(lo, hi);
  mf.alpha = alpha;
  mf.samples = Matrix::Zero(alpha.rows(), mf.grid.size());
  mf.fit_residual = Vector::Zero(alpha.rows());
  mf.dropped.assign(static_cast<std::size_t>(alpha.rows()), false);
  return mf;
}

double plate(double A, double g, double q) { return kEpsilon0 * A / (2.0 * (g - q) * (g - q)); }

}  // namespace

TEST_CASE("plate oracle: single capacitor matches the closed form") {
  const double A = 120.0, g = 5.0;
  PlateOracle oracle(1, {0}, {A}, g);
  const Vector grid = uniform_grid(-0.55, 0.55);
  const ElectroManifold mf = sample_manifold(oracle, Matrix::Ones(1, 1), 0, grid);
  REQUIRE(mf.samples.cols() == 23);
  for (Index s = 0; s < grid.size(); ++s) {
    CHECK(std::abs(mf.samples(0, s) - plate(A, g, grid[s])) <= 1e-12 * plate(A, g, grid[s]));
    if (s > 0) CHECK(mf.samples(0, s) > mf.samples(0, s - 1));
  }
  // Static pull at rest.
  CHECK(oracle.force(Vector::Zero(1))[0] == doctest::Approx(plate(A, g, 0.0)).epsilon(1e-15));
}

TEST_CASE("plate oracle: gap closure is reported with the grid point") {
  PlateOracle oracle(1, {0}, {1.0}, 2.0);
  CHECK(oracle.clearance(Vector::Constant(1, 1.0)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(oracle.force(Vector::Constant(1, 1.95)), ContractViolation);
  try {
    sample_manifold(oracle, Matrix::Ones(1, 1), 0, uniform_grid(0.0, 1.96, 8));
    FAIL("expected a gap-closure error");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("grid point 7") != std::string::npos);
  }
  CHECK_THROWS_AS(PlateOracle(2, {0, 1}, {1.0}, 1.0), ContractViolation);
}

TEST_CASE("cubic fit: exact polynomials and conditioning") {
  const Vector grid = uniform_grid(-1.1, 1.1);
  Matrix truth(2, 4);
  truth << 6.8638, 0.0469, 2e-4, 1e-6, -3.0, 1.5, 0.25, -0.125;
  Matrix samples(2, grid.size());
  for (Index s = 0; s < grid.size(); ++s) {
    const double q = grid[s];
    for (Index i = 0; i < 2; ++i) samples(i, s) = truth(i, 0) + q * (truth(i, 1) + q * (truth(i, 2) + q * truth(i, 3)));
  }
  const Matrix c = fit_cubic(grid, samples);
  CHECK((c - truth).cwiseAbs().maxCoeff() < 1e-10);
  // The fitted polynomial reproduces its samples.
  for (Index s = 0; s < grid.size(); ++s) {
    const double q = grid[s];
    CHECK(std::abs(c(0, 0) + q * (c(0, 1) + q * (c(0, 2) + q * c(0, 3))) - samples(0, s)) < 1e-12);
  }
  CHECK_THROWS_AS(fit_cubic(uniform_grid(0.0, 1.0, 7), Matrix::Zero(1, 7)), ConfigError);
  CHECK_THROWS_AS(fit_cubic(Vector::Constant(10, 0.3), Matrix::Zero(1, 10)), ConfigError);
  Vector two(10);
  two << 0, 0, 0, 0, 0, 1, 1, 1, 1, 1;
  CHECK_THROWS_AS(fit_cubic(two, Matrix::Zero(1, 10)), ConfigError);
}

TEST_CASE("cubic fit: plate samples over 22% of the gap") {
  const double g = 5.0, A = 100.0;
  PlateOracle oracle(1, {0}, {A}, g);
  ElectroManifold mf = sample_manifold(oracle, Matrix::Ones(1, 1), 0, uniform_grid(-0.11 * g, 0.11 * g));
  fit_cubic(mf);
  const double range = mf.samples.maxCoeff() - mf.samples.minCoeff();
  CHECK(mf.fit_residual[0] < 0.01 * range);
  CHECK_FALSE(mf.dropped[0]);
  // Taylor coefficients of eps0 A / (2 (g - q)^2) per eps0: A/(2g^2) (1, 2/g, 3/g^2, 4/g^3).
  CHECK(mf.alpha(0, 0) == doctest::Approx(A / (2 * g * g)).epsilon(1e-3));
  CHECK(mf.alpha(0, 1) == doctest::Approx(A / (g * g * g)).epsilon(1e-2));
  CHECK(mf.alpha(0, 1) > 0.0);

  // Refitting on the fitted polynomial returns the same coefficients.
  ElectroManifold again = mf;
  for (Index s = 0; s < mf.grid.size(); ++s) {
    const double q = mf.grid[s];
    again.samples(0, s) = kEpsilon0 * (mf.alpha(0, 0) + q * (mf.alpha(0, 1) + q * (mf.alpha(0, 2) + q * mf.alpha(0, 3))));
  }
  fit_cubic(again);
  CHECK((again.alpha - mf.alpha).cwiseAbs().maxCoeff() <= 1e-12 * mf.alpha.cwiseAbs().maxCoeff());
}

TEST_CASE("cubic fit: non-cubic secondary channels are dropped") {
  const Vector grid = uniform_grid(-1.0, 1.0);
  ElectroManifold mf;
  mf.grid = grid;
  mf.samples.resize(2, grid.size());
  for (Index s = 0; s < grid.size(); ++s) {
    mf.samples(0, s) = 1.0 + grid[s];
    mf.samples(1, s) = std::sin(6.0 * grid[s]);
  }
  fit_cubic(mf);
  CHECK(mf.dropped[1]);
  CHECK_FALSE(mf.dropped[0]);
  CHECK(mf.alpha.row(1).isZero(0.0));
  CHECK(mf.warnings.size() == 1);
  mf.samples.row(0).swap(mf.samples.row(1));
  CHECK_THROWS_AS(fit_cubic(mf), ConfigError);
}

TEST_CASE("eval_ef reductions") {
  Matrix alpha(2, 4);
  alpha << 6.8638, 0.0469, 2e-4, 1e-6, 1.0, -2.0, 0.5, 0.1;
  const ElectroManifold mf = manifold_with(alpha, -1.1, 1.1);
  const double w = 0.7;
  CHECK(eval_ef(mf, 0.4, 0.0, 0.0, w, 0.3).isZero(0.0));
  const double t0 = 0.5 * std::numbers::pi / w;  // cos(w t) = 0
  const Vector f0 = eval_ef(mf, 0.0, 3.0, 2.0, w, t0);
  CHECK(f0[0] == doctest::Approx(kEpsilon0 * 9.0 * 6.8638).epsilon(1e-14));
  CHECK(f0[1] == doctest::Approx(kEpsilon0 * 9.0).epsilon(1e-14));
  const Vector f1 = eval_ef(mf, 1.0, 1.0, 0.0, w, 0.0);
  CHECK(f1[0] == doctest::Approx(kEpsilon0 * (6.8638 + 0.0469 + 2e-4 + 1e-6)).epsilon(1e-14));
  // AC term doubles the DC weighting at cos = 1.
  const Vector f2 = eval_ef(mf, 0.2, 2.0, 0.5, w, 0.0);
  CHECK(f2[1] == doctest::Approx(kEpsilon0 * (4.0 + 2.0) * (1.0 - 0.4 + 0.02 + 0.0008)).epsilon(1e-13));
}

TEST_CASE("eval_ef derivative and range policy") {
  Matrix alpha(1, 4);
  alpha << 2.0, 0.7, 0.3, 0.05;
  const ElectroManifold mf = manifold_with(alpha, -1.0, 1.0);
  const double q = 0.3, w = 1.1, t = 0.2;
  double prev = 0.0;
  for (double h : {1e-2, 5e-3}) {
    const double fd = (eval_ef(mf, q + h, 2.0, 1.0, w, t)[0] - eval_ef(mf, q - h, 2.0, 1.0, w, t)[0]) / (2 * h);
    const double err = std::abs(fd - eval_ef_dq(mf, q, 2.0, 1.0, w, t)[0]);
    if (prev > 0.0) CHECK(err / prev == doctest::Approx(0.25).epsilon(1e-3));
    prev = err;
  }
  // Destabilizing towards the electrode.
  CHECK(eval_ef_dq(mf, 0.0, 1.0, 0.0, w, 0.0)[0] > 0.0);
  CHECK(check_range(mf, 0.9) == RangeCheck::Inside);
  CHECK(check_range(mf, 1.1) == RangeCheck::Inside);  // 5% of the range outside
  CHECK(check_range(mf, 1.3) == RangeCheck::Extrapolating);
  CHECK_THROWS_AS(check_range(mf, 1.6), ContractViolation);
  CHECK_THROWS_AS(eval_ef(mf, -1.6, 1.0, 0.0, w, 0.0), ContractViolation);
}

TEST_CASE("electro-coupled force: tangent and sample paths") {
  std::mt19937 rng(17);
  const auto fom = romforge::testing::random_model(6, rng, 0.2);
  const Matrix U = romforge::testing::random_orthonormal(6, 3, rng);
  const auto rom = project(fom, U);
  Matrix alpha(3, 4);
  alpha << 4.0, 1.0, 0.3, 0.05, -1.0, 0.5, 0.0, 0.02, 0.0, 0.0, 0.0, 0.0;
  ElectroManifold mf = manifold_with(alpha, -2.0, 2.0);
  mf.active = 0;
  const ElectroCoupledSystem sys(rom, mf, 30.0, 4.0);
  CHECK(sys.nonlinear().phase_dependent());
  CHECK(sys.forcing().beta == 4.0);
  CHECK((sys.forcing().F0 - 2.0 * kEpsilon0 * 30.0 * alpha.col(0)).norm() < 1e-18);

  const Vector Q = Vector::Random(3) * 0.5;
  const double theta = 0.8;
  // Pointwise force against eval_ef.
  Vector f = Vector::Zero(3);
  sys.nonlinear().add_force(Q, theta, f);
  Vector mech = Vector::Zero(3);
  rom.nonlinear().add_force(Q, theta, mech);
  const double w = 1.0, t = theta / w;
  const Vector ef = eval_ef(mf, Q[0], 30.0, 4.0, w, t);
  const Vector dc_alpha0 = 2.0 * kEpsilon0 * 30.0 * 4.0 * std::cos(theta) * alpha.col(0);
  CHECK((f - (mech - ef + dc_alpha0)).norm() <= 1e-12 * ef.norm());

  // Tangent vs central differences.
  const Matrix T = tangent_stiffness_dense(sys, Q, theta);
  for (Index j = 0; j < 3; ++j) {
    const double h = 1e-6;
    Vector e = Vector::Zero(3);
    e[j] = h;
    const Vector col = (internal_force(sys, Q + e, theta) - internal_force(sys, Q - e, theta)) / (2 * h);
    CHECK((col - T.col(j)).norm() <= 1e-6 * T.norm());
  }

  // Sample-batched paths agree with the pointwise ones.
  const Index N = 5;
  SampleMatrix D(3, N), out = SampleMatrix::Zero(3, N), slots;
  Vector th(N);
  for (Index s = 0; s < N; ++s) {
    D.col(s) = Vector::Random(3);
    th[s] = 0.4 * static_cast<double>(s);
  }
  sys.nonlinear().add_force_samples(D, th, out);
  sys.nonlinear().tangent_samples(D, th, slots);
  std::vector<double> point(sys.nonlinear().pattern().size());
  for (Index s = 0; s < N; ++s) {
    Vector fs = Vector::Zero(3);
    sys.nonlinear().add_force(D.col(s), th[s], fs);
    CHECK((fs - out.col(s)).norm() <= 1e-13 * (1.0 + fs.norm()));
    sys.nonlinear().tangent(D.col(s), th[s], point.data());
    for (std::size_t k = 0; k < point.size(); ++k) CHECK(point[k] == doctest::Approx(slots(static_cast<Index>(k), s)));
  }
}

TEST_CASE("electrostatic softening of the beam ROM") {
  zoo::BeamSpec spec;
  spec.elements = 16;
  spec.height = 2.0;
  const auto beam = zoo::make_vk_beam(spec);
  const auto modes = solve_eigs(beam, 1);
  Matrix X(beam.dofs(), 2);
  X.col(0) = modes[0].shape;
  X.col(1) = 0.5 * modes[0].shape;
  const PodBasis basis = compute_pod(X, 1);
  const auto rom = project(beam, basis);
  const auto oracle = PlateOracle::for_beam(spec, 2.0);
  const double qmax = 0.15 * 2.0 / basis.U.col(0).cwiseAbs().maxCoeff();
  ElectroManifold mf = sample_manifold(oracle, basis.U, 0, uniform_grid(-qmax, qmax));
  fit_cubic(mf);
  CHECK(mf.alpha(0, 0) > 0.0);
  CHECK(mf.alpha(0, 1) > 0.0);

  const double w0 = std::sqrt(rom.K()(0, 0) / rom.M()(0, 0));
  const ElectroCoupledSystem off(rom, mf, 0.0, 1.0);
  CHECK(off.linearized_frequency() == doctest::Approx(w0).epsilon(1e-12));
  CHECK(off.forcing().F0.isZero(0.0));
  double last = w0;
  for (double v : {0.5, 1.0, 1.5}) {
    const ElectroCoupledSystem on(rom, mf, v, 0.0);
    const double wl = on.linearized_frequency();
    CHECK(wl < last);
    CHECK(on.static_equilibrium()[0] > 0.0);  // pulled towards the electrode
    last = wl;
  }

  // Small AC drive: the FRF peak sits at the softened frequency.
  const double vdc = 1.0;
  const ElectroCoupledSystem sys(rom, mf, vdc, 1e-3);
  const double wl = sys.linearized_frequency();
  ContinuationConfig cfg;
  cfg.hb.harmonics = 3;
  cfg.stability = false;
  const FrfBranch br = coupled_frf(rom, mf, vdc, 1e-3, 0.95 * wl, 1.05 * wl, cfg);
  REQUIRE(br.complete);
  const FrfPeak pk = locate_peak(sys, sys.forcing().with(1e-3, wl), br, 0, cfg);
  CHECK(pk.omega == doctest::Approx(wl).epsilon(2e-3));
  CHECK(pk.omega < w0);
}
