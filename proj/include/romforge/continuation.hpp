#pragma once

#include "romforge/hb.hpp"

#include <complex>
#include <string>
#include <vector>

namespace romforge {

enum class Bifurcation { None, SN, NS, PD };

std::string_view to_string(Bifurcation b);

using Multipliers = std::vector<std::complex<double>>;

struct BranchPoint {
  FourierSolution sol;
  double omega = 0.0;
  double beta = 0.0;
  std::vector<double> amplitudes;  ///< half peak-to-peak, one per observable
  Multipliers multipliers;         ///< sorted by decreasing modulus
  bool stability_known = false;
  bool stable = true;
  Bifurcation bif = Bifurcation::None;
  double arclength = 0.0;          ///< cumulative, in scaled coordinates
  double residual_norm = 0.0;
  int iterations = 0;
};

struct FrfBranch {
  std::vector<std::string> observables;
  std::vector<BranchPoint> points;
  std::vector<double> step_sizes;
  bool complete = false;
  std::vector<std::string> diagnostics;
  double x_scale = 1.0;      ///< coefficient-norm scale used for the arclength metric
  double omega_scale = 1.0;  ///< omega_max - omega_min

  std::size_t count(Bifurcation b) const;
};

struct ContinuationConfig {
  HbConfig hb;
  double ds_initial = 0.01;   ///< scaled arclength units (omega range normalized to 1)
  double ds_min = 1e-7;
  double ds_max = 0.05;
  double grow = 1.5;
  double shrink = 0.5;
  int fast_iterations = 3;    ///< grow the step when the corrector needs at most this many
  int corrector_iterations = 12;
  int max_points = 20000;
  bool stability = true;
  double tol_floq = 1e-6;
  Index floquet_steps = 600;  ///< RK4 steps per period (raised automatically for stiff systems)
  double bisect_tol = 1e-4;   ///< relative omega tolerance of the bifurcation refinement
  double imag_tol = 1e-3;
};

/// Eigenvalues of the monodromy matrix of the linearized first-order system
/// along the periodic orbit, integrated with classical RK4.
Multipliers floquet_multipliers(const DynamicSystem& sys, const ForcingSpec& load, const FourierSolution& sol,
                                Index steps = 600);
Multipliers floquet_multipliers(const DynamicSystem& sys, const FourierSolution& sol, Index steps = 600);

/// Pseudo-arclength continuation in omega from omega_min to omega_max.
FrfBranch trace_frf(const DynamicSystem& sys, double omega_min, double omega_max, double beta,
                    const ContinuationConfig& cfg = {});
FrfBranch trace_frf(const DynamicSystem& sys, double omega_min, double omega_max, const ForcingSpec& load,
                    const ContinuationConfig& cfg);

/// Bisects every stability change in arclength and labels the refined point.
/// Needs multipliers on all points.
void classify_bifurcations(const DynamicSystem& sys, const ForcingSpec& load, FrfBranch& branch,
                           const ContinuationConfig& cfg = {});

struct FrfPeak {
  double omega = 0.0;
  double amplitude = 0.0;
  std::size_t index = 0;  ///< nearest branch point
};

/// Maximum of an observable amplitude along the branch, refined between the
/// neighbouring points by a golden-section search on re-corrected solutions.
FrfPeak locate_peak(const DynamicSystem& sys, const ForcingSpec& load, const FrfBranch& branch, Index observable,
                    const ContinuationConfig& cfg = {});

}  // namespace romforge
