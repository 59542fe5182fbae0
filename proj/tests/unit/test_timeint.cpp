#include <doctest.h>

#include "romforge/timeint.hpp"
#include "romforge/zoo.hpp"

#include <cmath>
#include <numbers>

using namespace romforge;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("linear step matches the closed-form Newmark recurrence") {
  auto m = zoo::make_duffing(1.3, 0.0, 20.0);
  auto forced = m.with_forcing(m.forcing().with(0.4, 0.9));
  State s{Vector::Constant(1, 0.2), Vector::Constant(1, -0.1), Vector::Zero(1)};
  s = consistent_state(forced, forced.forcing(), s.D, s.V, 0.0);
  const double dt = 0.05, k = 1.69, c = 1.3 / 20.0;
  const double t = 0.3;
  // average acceleration: solve for A1 from the equation of motion at t + dt
  const double f1 = 0.4 * std::cos(0.9 * (t + dt));
  const double D0 = s.D[0], V0 = s.V[0], A0 = s.A[0];
  const double A1 = (f1 - c * (V0 + 0.5 * dt * A0) - k * (D0 + dt * V0 + 0.25 * dt * dt * A0)) /
                    (1.0 + 0.5 * dt * c + 0.25 * dt * dt * k);
  const double D1 = D0 + dt * V0 + 0.25 * dt * dt * (A0 + A1);
  const double V1 = V0 + 0.5 * dt * (A0 + A1);
  State n = newmark_step(forced, s, t, dt);
  CHECK(std::abs(n.D[0] - D1) < 1e-12);
  CHECK(std::abs(n.V[0] - V1) < 1e-12);
  CHECK(std::abs(n.A[0] - A1) < 1e-12);
}

TEST_CASE("undamped Duffing conserves energy over 100 periods") {
  auto base = zoo::make_duffing(1.0, 0.1, 50.0);
  auto m = base.with_damping(SparseMatrixSym(1, {}, true));
  const double T = 2 * kPi, dt = T / 200.0;
  auto energy = [](double x, double v) { return 0.5 * v * v + 0.5 * x * x + 0.025 * x * x * x * x; };
  Newmark nm(m, m.forcing());
  State s = consistent_state(m, m.forcing(), Vector::Constant(1, 0.3), Vector::Zero(1));
  // Energy interpolated at upward zero crossings of x, i.e. at the same orbit
  // phase each cycle, so the bounded within-period fluctuation cancels.
  std::vector<double> e_cross;
  for (int k = 0; k < 200 * 101 && e_cross.size() < 101; ++k) {
    State n = nm.step(s, k * dt, dt);
    if (s.D[0] < 0.0 && n.D[0] >= 0.0) {
      const double w = -s.D[0] / (n.D[0] - s.D[0]);
      e_cross.push_back((1 - w) * energy(s.D[0], s.V[0]) + w * energy(n.D[0], n.V[0]));
    }
    s = n;
  }
  REQUIRE(e_cross.size() == 101);
  CHECK(std::abs(e_cross.back() - e_cross.front()) / e_cross.front() < 1e-6);
}

TEST_CASE("second-order convergence on the linear oscillator") {
  auto m = zoo::make_duffing(1.0, 0.0, 10.0);
  auto f = m.with_forcing(m.forcing().with(1.0, 1.2));
  const State s0 = zero_state(1);
  auto end_state = [&](double dt) {
    SimulateOptions o;
    o.include_initial = false;
    auto tr = simulate(f, 5.0, dt, s0, o);
    return tr.D(0, tr.size() - 1);
  };
  const double ref = end_state(0.1 / 8.0);
  const double e1 = std::abs(end_state(0.1) - ref), e2 = std::abs(end_state(0.05) - ref);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("forced linear oscillator reaches the analytic steady amplitude") {
  const double Q = 50.0;
  auto m = zoo::make_duffing(1.0, 0.0, Q);
  for (double w : {0.9, 1.0, 1.05}) {
    ForcingSpec load = m.forcing().with(0.01, w);
    auto ss = steady_state(m, load, 0, 400, static_cast<Index>(6 * Q), zero_state(1), 0.0);
    const double exact = 0.01 / std::sqrt(std::pow(1 - w * w, 2) + std::pow(w / Q, 2));
    CHECK(std::abs(ss.amplitude - exact) / exact < 5e-3);
    CHECK(ss.periods == static_cast<Index>(6 * Q));
  }
}

TEST_CASE("simulate: zero input gives zero output; strides subsample exactly") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  auto z = simulate(m, 10.0, 0.1, zero_state(1));
  CHECK(z.D.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.size() == 101);

  auto f = m.with_forcing(m.forcing().with(0.2, 1.0));
  SimulateOptions o1, o5;
  o5.stride = 5;
  auto a = simulate(f, 20.0, 0.05, zero_state(1), o1);
  auto b = simulate(f, 20.0, 0.05, zero_state(1), o5);
  REQUIRE(b.size() == 81);
  for (Index c = 0; c < b.size(); ++c) {
    CHECK(b.D(0, c) == a.D(0, 5 * c));
    CHECK(b.times[static_cast<std::size_t>(c)] == a.times[static_cast<std::size_t>(5 * c)]);
  }
  // determinism
  auto a2 = simulate(f, 20.0, 0.05, zero_state(1), o1);
  CHECK((a.D - a2.D).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transient envelope decays with time constant 2Q/omega0") {
  const double Q = 20.0;
  auto m = zoo::make_duffing(1.0, 0.0, Q);
  auto f = m.with_forcing(m.forcing().with(0.01, 1.0));
  auto tr = simulate(f, 400.0, 2 * kPi / 200.0, zero_state(1));
  // at resonance x(t) ~ a_ss (1 - exp(-t / tau)) sin t; fit tau from the envelope deficit
  auto envelope = [&](double t0) {
    double hi = 0.0;
    for (Index c = 0; c < tr.size(); ++c) {
      const double t = tr.times[static_cast<std::size_t>(c)];
      if (t >= t0 && t < t0 + 2 * kPi) hi = std::max(hi, std::abs(tr.D(0, c)));
    }
    return hi;
  };
  const double ass = 0.01 * Q;
  const double d1 = ass - envelope(20 * kPi), d2 = ass - envelope(40 * kPi);
  const double tau = (20 * kPi) / std::log(d1 / d2);
  CHECK(std::abs(tau - 2 * Q) / (2 * Q) < 0.1);
}

TEST_CASE("sweep: layout, single-frequency identity and snapshot count") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  SweepPlan plan;
  plan.omegas = {1.1};
  plan.cycles = 3;
  plan.steps_per_cycle = 40;
  plan.beta = 0.1;
  plan.carry_state = false;
  auto sw = sweep(m, plan);
  SimulateOptions o;
  o.include_initial = false;
  auto sim = simulate(m, m.forcing().with(0.1, 1.1), 3 * 2 * kPi / 1.1, 2 * kPi / 1.1 / 40, zero_state(1), o);
  REQUIRE(sw.size() == sim.size());
  CHECK((sw.D - sim.D).cwiseAbs().maxCoeff() == 0.0);

  plan.omegas = {1.3, 1.2, 1.1, 1.0};
  plan.direction = SweepDirection::Down;
  plan.cycles = 100;
  plan.steps_per_cycle = 50;
  plan.carry_state = true;
  auto four = sweep(m, plan);
  CHECK(four.size() == 20000);
  CHECK(four.segments.size() == 4);
  for (std::size_t i = 1; i < four.times.size(); ++i) REQUIRE(four.times[i] > four.times[i - 1]);

  plan.direction = SweepDirection::Up;
  CHECK_THROWS_AS(sweep(m, plan), ConfigError);
}

TEST_CASE("carried upward sweep stays on the upper branch of a hardening Duffing") {
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  const double beta = 0.05;
  SweepPlan plan;
  plan.beta = beta;
  plan.cycles = 200;
  plan.steps_per_cycle = 40;
  plan.direction = SweepDirection::Up;
  for (double w = 1.0; w <= 1.15001; w += 0.01) plan.omegas.push_back(w);
  auto amp_last = [&](const Trajectory& tr) {
    const auto& seg = tr.segments.back();
    return tr.D.block(0, seg.first + seg.count - plan.steps_per_cycle, 1, plan.steps_per_cycle).cwiseAbs().maxCoeff();
  };
  plan.carry_state = true;
  const double carried = amp_last(sweep(m, plan));
  plan.carry_state = false;
  const double restart = amp_last(sweep(m, plan));
  CHECK(carried > 3.0 * restart);
}

TEST_CASE("Newton failure is reported as a convergence error") {
  auto m = zoo::make_duffing(1.0, 1e6, 50.0);
  NewmarkOptions o;
  o.max_iterations = 1;
  State s{Vector::Constant(1, 10.0), Vector::Zero(1), Vector::Zero(1)};
  CHECK_THROWS_AS(newmark_step(m, s, 0.0, 1.0, o), ConvergenceError);
}
