#include "romforge/timeint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace romforge {

State zero_state(Index n) { return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)}; }

State consistent_state(const DynamicSystem& sys, const ForcingSpec& load, const Vector& D0, const Vector& V0,
                       double t0) {
  const Index n = sys.dofs();
  require_size(D0.size(), n, "consistent_state displacement");
  require_size(V0.size(), n, "consistent_state velocity");
  require(D0.allFinite() && V0.allFinite(), "consistent_state: non-finite initial state");
  Vector rhs = -(sys.damping() * V0) - internal_force(sys, D0, load.theta(t0));
  if (load.F0.size() == n) rhs += load.scale(t0) * load.F0;
  LinearSolver solver;
  if (!solver.factorize(sys.mass())) throw ContractViolation("consistent_state: singular mass matrix");
  return {D0, V0, solver.solve(rhs)};
}

Newmark::Newmark(const DynamicSystem& sys, ForcingSpec load, NewmarkOptions opts)
    : sys_(sys), load_(std::move(load)), opts_(opts) {
  require(opts_.beta > 0.0 && opts_.gamma > 0.0, "Newmark: parameters must be positive");
  require(opts_.max_iterations >= 1, "Newmark: max_iterations must be at least 1");
  if (load_.F0.size() == 0) load_.F0 = Vector::Zero(sys.dofs());
  require_size(load_.F0.size(), sys.dofs(), "Newmark load");
  tol_abs_ = opts_.tol_abs_scale * sys.stiffness().norm();
  const auto& nl = sys.nonlinear();
  linear_ = nl.pattern().size() == 0 && !nl.phase_dependent();
  slots_.assign(nl.pattern().size(), 0.0);
}

State Newmark::step(const State& s, double t, double dt, StepReport* report) {
  require(dt > 0.0, "newmark_step: dt must be positive");
  const double b = opts_.beta, g = opts_.gamma;
  const double a0 = 1.0 / (b * dt * dt), a1 = g / (b * dt), a2 = 1.0 / (b * dt), a3 = 0.5 / b - 1.0;
  const double a4 = g / b - 1.0, a5 = dt * (0.5 * g / b - 1.0);

  if (dt != cached_dt_) {
    eff_base_ = sys_.stiffness() + a0 * sys_.mass() + a1 * sys_.damping();
    const auto& pat = sys_.nonlinear().pattern();
    if (cached_dt_ < 0.0) {
      assembler_ = PatternAssembler(eff_base_, pat.rows, pat.cols);
    } else {
      assembler_.set_base(eff_base_);
    }
    cached_dt_ = dt;
    factored_ = false;
  }

  const double t1 = t + dt;
  const double theta = load_.theta(t1);
  const Vector Fext = load_.scale(t1) * load_.F0;
  const double tol = tol_abs_ + opts_.tol_rel * Fext.norm();

  Vector D = s.D + dt * s.V + 0.5 * dt * dt * s.A;
  State out;
  double rn = 0.0;
  for (int it = 0; it <= opts_.max_iterations; ++it) {
    const Vector dD = D - s.D;
    out.A = a0 * dD - a2 * s.V - a3 * s.A;
    out.V = a1 * dD - a4 * s.V - a5 * s.A;
    Vector r = sys_.mass() * out.A + sys_.damping() * out.V + sys_.stiffness() * D - Fext;
    sys_.nonlinear().add_force(D, theta, r);
    rn = r.norm();
    if (!std::isfinite(rn)) break;
    if (rn <= tol) {
      out.D = std::move(D);
      if (report) *report = {it, rn};
      return out;
    }
    if (it == opts_.max_iterations) break;
    if (!linear_ || !factored_) {
      const SpMat* J = &eff_base_;
      if (!linear_) {
        sys_.nonlinear().tangent(D, theta, slots_.data());
        J = &assembler_.assemble(slots_.data());
      }
      if (!solver_.factorize(*J)) {
        throw ConvergenceError("newmark_step: singular effective stiffness at t=" + std::to_string(t1), rn, it);
      }
      factored_ = linear_;
    }
    D -= solver_.solve(r);
  }
  throw ConvergenceError("newmark_step: Newton did not converge at t=" + std::to_string(t1) +
                             " (residual " + std::to_string(rn) + ", tolerance " + std::to_string(tol) + ")",
                         rn, opts_.max_iterations);
}

State newmark_step(const DynamicSystem& sys, const State& s, double t, double dt, const NewmarkOptions& opts) {
  Newmark nm(sys, sys.forcing(), opts);
  return nm.step(s, t, dt);
}

namespace {

void check_state(const DynamicSystem& sys, const State& s) {
  require_size(s.D.size(), sys.dofs(), "initial displacement");
  require_size(s.V.size(), sys.dofs(), "initial velocity");
  require(s.D.allFinite() && s.V.allFinite(), "simulate: non-finite initial state");
}

// Appends the marched states to `traj`; returns the final state.
State march(const DynamicSystem& sys, const ForcingSpec& load, Index steps, double dt, const State& initial,
            Index stride, double time_offset, const NewmarkOptions& opts, Trajectory& traj, Index& column) {
  Newmark nm(sys, load, opts);
  State s = initial;
  for (Index k = 1; k <= steps; ++k) {
    s = nm.step(s, static_cast<double>(k - 1) * dt, dt);
    if (k % stride == 0) {
      traj.times.push_back(time_offset + static_cast<double>(k) * dt);
      traj.D.col(column) = s.D;
      traj.V.col(column) = s.V;
      ++column;
    }
  }
  return s;
}

}  // namespace

Trajectory simulate(const DynamicSystem& sys, const ForcingSpec& load, double t_end, double dt,
                    const State& initial, const SimulateOptions& opts) {
  require(dt > 0.0 && t_end >= 0.0, "simulate: need dt > 0 and t_end >= 0");
  require(opts.stride >= 1, "simulate: stride must be at least 1");
  check_state(sys, initial);
  const Index steps = static_cast<Index>(std::llround(t_end / dt));
  const Index cols = steps / opts.stride + (opts.include_initial ? 1 : 0);
  Trajectory traj;
  traj.n = sys.dofs();
  traj.stride = opts.stride;
  traj.D.resize(traj.n, cols);
  traj.V.resize(traj.n, cols);
  traj.times.reserve(static_cast<std::size_t>(cols));
  const State s0 = consistent_state(sys, load, initial.D, initial.V, 0.0);
  Index column = 0;
  if (opts.include_initial) {
    traj.times.push_back(0.0);
    traj.D.col(0) = s0.D;
    traj.V.col(0) = s0.V;
    column = 1;
  }
  march(sys, load, steps, dt, s0, opts.stride, 0.0, opts.newmark, traj, column);
  traj.segments.push_back({load.omega, load.beta, 0, cols});
  return traj;
}

Trajectory simulate(const DynamicSystem& sys, double t_end, double dt, const State& initial,
                    const SimulateOptions& opts) {
  return simulate(sys, sys.forcing(), t_end, dt, initial, opts);
}

void SweepPlan::validate() const {
  if (omegas.empty()) throw ConfigError("sweep plan: empty frequency list");
  if (cycles < 1 || steps_per_cycle < 1 || stride < 1) throw ConfigError("sweep plan: counts must be positive");
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    if (!(omegas[i] > 0.0) || !std::isfinite(omegas[i])) throw ConfigError("sweep plan: frequencies must be positive");
    if (i == 0) continue;
    const bool ordered = direction == SweepDirection::Up ? omegas[i] > omegas[i - 1] : omegas[i] < omegas[i - 1];
    if (!ordered) throw ConfigError("sweep plan: frequencies not sorted along the sweep direction");
  }
}

Trajectory sweep(const DynamicSystem& sys, const SweepPlan& plan, const NewmarkOptions& opts) {
  plan.validate();
  const Index steps = plan.cycles * plan.steps_per_cycle;
  const Index per_segment = steps / plan.stride;
  const Index total = per_segment * static_cast<Index>(plan.omegas.size());
  Trajectory traj;
  traj.n = sys.dofs();
  traj.stride = plan.stride;
  traj.D.resize(traj.n, total);
  traj.V.resize(traj.n, total);
  traj.times.reserve(static_cast<std::size_t>(total));

  State carried = zero_state(sys.dofs());
  double offset = 0.0;
  Index column = 0;
  for (std::size_t seg = 0; seg < plan.omegas.size(); ++seg) {
    const double omega = plan.omegas[seg];
    const ForcingSpec load = sys.forcing().with(plan.beta, omega);
    const double period = 2.0 * std::numbers::pi / omega;
    const double dt = period / static_cast<double>(plan.steps_per_cycle);
    const State start = plan.carry_state ? carried : zero_state(sys.dofs());
    const State s0 = consistent_state(sys, load, start.D, start.V, 0.0);
    const Index first = column;
    try {
      carried = march(sys, load, steps, dt, s0, plan.stride, offset, opts, traj, column);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("sweep segment " + std::to_string(seg) + ": " + e.what(), e.residual_norm(),
                             e.iterations());
    }
    traj.segments.push_back({omega, plan.beta, first, column - first});
    offset += static_cast<double>(steps) * dt;
  }
  return traj;
}

SteadyStateResult steady_state(const DynamicSystem& sys, const ForcingSpec& load, Index observable,
                               Index steps_per_period, Index max_periods, const State& initial, double rel_tol,
                               Index min_periods, const NewmarkOptions& opts) {
  require(steps_per_period >= 4 && max_periods >= 1, "steady_state: invalid period/step counts");
  require(observable >= 0 && observable < static_cast<Index>(sys.observables().size()),
          "steady_state: observable index out of range");
  require(load.omega > 0.0, "steady_state: forcing frequency must be positive");
  check_state(sys, initial);
  const Vector& o = sys.observables()[static_cast<std::size_t>(observable)].functional;
  const double dt = 2.0 * std::numbers::pi / load.omega / static_cast<double>(steps_per_period);

  Newmark nm(sys, load, opts);
  State s = consistent_state(sys, load, initial.D, initial.V, 0.0);
  SteadyStateResult res;
  double prev_pp = -1.0;
  Index k = 0;
  for (Index period = 1; period <= max_periods; ++period) {
    State start = s;
    double lo = o.dot(s.D), hi = lo;
    for (Index j = 0; j < steps_per_period; ++j, ++k) {
      s = nm.step(s, static_cast<double>(k) * dt, dt);
      const double y = o.dot(s.D);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double pp = hi - lo;
    res.state = std::move(start);
    res.amplitude = 0.5 * pp;
    res.periods = period;
    if (period >= min_periods && prev_pp >= 0.0 && std::abs(pp - prev_pp) <= rel_tol * std::max(pp, 1e-300)) {
      res.converged = true;
      break;
    }
    prev_pp = pp;
  }
  return res;
}

}  // namespace romforge
