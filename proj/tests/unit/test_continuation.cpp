#include <doctest.h>

#include "romforge/continuation.hpp"
#include "romforge/zoo.hpp"

#include <cmath>
#include <complex>
#include <numbers>

using namespace romforge;

TEST_CASE("Floquet multipliers of a damped linear oscillator") {
  const double w0 = 1.3, Q = 20.0;
  auto m = zoo::make_duffing(w0, 0.0, Q);
  const double zeta = 1.0 / (2.0 * Q), wd = w0 * std::sqrt(1 - zeta * zeta);
  const double w = 0.8;  // period of the (zero) periodic orbit
  const double T = 2 * std::numbers::pi / w;
  FourierSolution zero(w, 1, 3);
  auto mu = floquet_multipliers(m, m.forcing().with(0.0, w), zero, 600);
  REQUIRE(mu.size() == 2);
  const std::complex<double> expected = std::exp(std::complex<double>(-zeta * w0, wd) * T);
  for (const auto& x : mu) {
    const double d = std::min(std::abs(x - expected), std::abs(x - std::conj(expected)));
    CHECK(d < 1e-6);
    CHECK(std::abs(x) < 1.0);
  }
}

TEST_CASE("undamped linear oscillator multipliers lie on the unit circle") {
  auto m = zoo::make_duffing(1.0, 0.0, 50.0).with_damping(SparseMatrixSym(1, {}, true));
  FourierSolution zero(0.7, 1, 2);
  for (const auto& x : floquet_multipliers(m, m.forcing().with(0.0, 0.7), zero, 500)) {
    CHECK(std::abs(std::abs(x) - 1.0) < 1e-6);
  }
}

TEST_CASE("Floquet rejects non-converged orbits and too few steps") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  FourierSolution s(1.0, 1, 2);
  s.coeffs(0, 1) = 1.0;
  CHECK_THROWS_AS(floquet_multipliers(m, m.forcing().with(0.0, 1.0), s, 600), ContractViolation);
  FourierSolution zero(1.0, 1, 2);
  CHECK_THROWS_AS(floquet_multipliers(m, m.forcing().with(0.0, 1.0), zero, 100), ContractViolation);
}

TEST_CASE("linear branch matches the analytic FRF with no bifurcations") {
  const double Q = 30.0, beta = 0.01;
  auto m = zoo::make_duffing(1.0, 0.0, Q);
  ContinuationConfig cfg;
  cfg.hb.harmonics = 3;
  auto br = trace_frf(m, 0.8, 1.2, beta, cfg);
  CHECK(br.complete);
  CHECK(br.points.front().omega == doctest::Approx(0.8));
  CHECK(br.points.back().omega == doctest::Approx(1.2));
  for (const auto& p : br.points) {
    const double w = p.omega;
    const double exact = beta / std::sqrt(std::pow(1 - w * w, 2) + std::pow(w / Q, 2));
    CHECK(std::abs(p.amplitudes[0] - exact) <= 1e-8 * exact);
    CHECK(p.stable);
    CHECK(p.bif == Bifurcation::None);
  }
  for (std::size_t i = 1; i < br.points.size(); ++i) CHECK(br.points[i].omega > br.points[i - 1].omega);
  auto peak = locate_peak(m, m.forcing().with(beta, 1.0), br, 0, cfg);
  const double w_peak = std::sqrt(1 - 0.5 / (Q * Q));
  CHECK(peak.omega == doctest::Approx(w_peak).epsilon(1e-6));
  CHECK(peak.amplitude == doctest::Approx(beta / std::sqrt(std::pow(1 - w_peak * w_peak, 2) + std::pow(w_peak / Q, 2)))
                              .epsilon(1e-9));
}

TEST_CASE("Duffing overhang: two saddle-nodes around an unstable segment") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  ContinuationConfig cfg;
  cfg.hb.harmonics = 5;
  auto br = trace_frf(m, 0.8, 1.6, 0.05, cfg);
  CHECK(br.complete);
  CHECK(br.count(Bifurcation::SN) == 2);
  CHECK(br.count(Bifurcation::NS) == 0);
  std::vector<std::size_t> sn;
  for (std::size_t i = 0; i < br.points.size(); ++i)
    if (br.points[i].bif == Bifurcation::SN) sn.push_back(i);
  REQUIRE(sn.size() == 2);
  for (auto i : sn) {
    const auto& mu = br.points[i].multipliers;
    double best = 1e9;
    for (const auto& x : mu) best = std::min(best, std::abs(x - 1.0));
    CHECK(best < 1e-3);
  }
  // strictly between the folds the orbits are unstable, outside they are stable
  for (std::size_t i = sn[0] + 2; i + 1 < sn[1]; ++i) CHECK(!br.points[i].stable);
  for (std::size_t i = 0; i + 1 < sn[0]; ++i) CHECK(br.points[i].stable);
  // folds coincide with sign changes of d omega / ds
  int turns = 0;
  for (std::size_t i = 2; i < br.points.size(); ++i) {
    const double d1 = br.points[i - 1].omega - br.points[i - 2].omega, d2 = br.points[i].omega - br.points[i - 1].omega;
    if (d1 * d2 < 0) ++turns;
  }
  CHECK(turns == 2);
}

TEST_CASE("small forcing: no saddle-nodes") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  ContinuationConfig cfg;
  cfg.hb.harmonics = 5;
  auto br = trace_frf(m, 0.9, 1.1, 0.002, cfg);
  CHECK(br.count(Bifurcation::SN) == 0);
  CHECK(br.count(Bifurcation::NS) == 0);
}

TEST_CASE("1:2 internal resonance: double peak bounded by Neimark-Sacker points") {
  auto m = zoo::make_two_dof_1to2(1.0, 0.0, 1.0, 100.0);
  ContinuationConfig cfg;
  cfg.hb.harmonics = 4;
  auto br = trace_frf(m, 0.95, 1.05, 0.002, cfg);
  CHECK(br.count(Bifurcation::NS) >= 2);
  int peaks = 0;
  for (std::size_t i = 1; i + 1 < br.points.size(); ++i) {
    const double a = br.points[i].amplitudes[0];
    if (a > br.points[i - 1].amplitudes[0] && a >= br.points[i + 1].amplitudes[0]) ++peaks;
  }
  CHECK(peaks == 2);
}

TEST_CASE("continuation input validation") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  CHECK_THROWS_AS(trace_frf(m, 1.2, 1.1, 0.01), ConfigError);
  ContinuationConfig cfg;
  cfg.ds_min = 0.0;
  CHECK_THROWS_AS(trace_frf(m, 0.9, 1.1, 0.01, cfg), ConfigError);
}
