#pragma once

#include "romforge/core/linsolve.hpp"
#include "romforge/core/system.hpp"

#include <optional>
#include <vector>

namespace romforge {

struct State {
  Vector D, V, A;
};

struct NewmarkOptions {
  double gamma = 0.5;
  double beta = 0.25;
  double tol_rel = 1e-8;
  double tol_abs_scale = 1e-10;  ///< tol_abs = tol_abs_scale * ||K||_F
  int max_iterations = 20;
};

struct StepReport {
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Solves M A0 = F(t0) - C V0 - f_int(D0).
State consistent_state(const DynamicSystem& sys, const ForcingSpec& load, const Vector& D0, const Vector& V0,
                       double t0 = 0.0);

/// Reusable implicit Newmark stepper for one system and load. Keeps the
/// factorization of the effective matrix for linear systems.
class Newmark {
 public:
  Newmark(const DynamicSystem& sys, ForcingSpec load, NewmarkOptions opts = {});

  /// Advance from t to t + dt. Throws ConvergenceError after max_iterations.
  State step(const State& s, double t, double dt, StepReport* report = nullptr);

  const ForcingSpec& load() const { return load_; }

 private:
  const DynamicSystem& sys_;
  ForcingSpec load_;
  NewmarkOptions opts_;
  double tol_abs_;
  bool linear_;
  double cached_dt_ = -1.0;
  SpMat eff_base_;
  PatternAssembler assembler_;
  LinearSolver solver_;
  bool factored_ = false;
  std::vector<double> slots_;
};

/// One average-acceleration step under the model's own forcing.
State newmark_step(const DynamicSystem& sys, const State& s, double t, double dt, const NewmarkOptions& opts = {});

struct TrajectorySegment {
  double omega = 0.0;
  double beta = 0.0;
  Index first = 0;  ///< first column
  Index count = 0;
};

struct Trajectory {
  Index n = 0;
  Index stride = 1;
  std::vector<double> times;
  Matrix D;  ///< n x n_t
  Matrix V;  ///< n x n_t
  std::vector<TrajectorySegment> segments;

  Index size() const { return static_cast<Index>(times.size()); }
};

struct SimulateOptions {
  Index stride = 1;
  bool include_initial = true;
  NewmarkOptions newmark;
};

/// Marches from `initial` (velocity used as given; acceleration made consistent)
/// over [0, t_end] with n = round(t_end / dt) steps under `load`.
Trajectory simulate(const DynamicSystem& sys, const ForcingSpec& load, double t_end, double dt,
                    const State& initial, const SimulateOptions& opts = {});
Trajectory simulate(const DynamicSystem& sys, double t_end, double dt, const State& initial,
                    const SimulateOptions& opts = {});

State zero_state(Index n);

enum class SweepDirection { Up, Down };

struct SweepPlan {
  std::vector<double> omegas;
  Index cycles = 100;
  Index steps_per_cycle = 50;
  SweepDirection direction = SweepDirection::Up;
  bool carry_state = true;
  double beta = 0.0;
  Index stride = 1;

  void validate() const;
};

/// Concatenated per-frequency runs. Each segment records every stride-th step
/// (initial state excluded); time is global while the forcing phase restarts
/// at every segment.
Trajectory sweep(const DynamicSystem& sys, const SweepPlan& plan, const NewmarkOptions& opts = {});

struct SteadyStateResult {
  State state;                 ///< at the start of the final period (phase 0)
  double amplitude = 0.0;      ///< half peak-to-peak of the observable over the last period
  Index periods = 0;
  bool converged = false;      ///< true if the per-cycle criterion triggered before the cap
};

/// Runs whole forcing periods until the observable's peak-to-peak changes by
/// less than `rel_tol` between cycles or `max_periods` elapse.
SteadyStateResult steady_state(const DynamicSystem& sys, const ForcingSpec& load, Index observable,
                               Index steps_per_period, Index max_periods, const State& initial,
                               double rel_tol = 1e-5, Index min_periods = 2, const NewmarkOptions& opts = {});

}  // namespace romforge
