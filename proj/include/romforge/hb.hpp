#pragma once

#include "romforge/core/linsolve.hpp"
#include "romforge/core/system.hpp"

#include <optional>
#include <vector>

namespace romforge {

/// D(t) = c0 + sum_h a_h cos(h w t) + b_h sin(h w t). Coefficients are kept as
/// an n x (2H+1) matrix with columns [c0, a_1, b_1, a_2, b_2, ...]; its
/// column-major storage is the unknown vector of the harmonic-balance system.
struct FourierSolution {
  double omega = 1.0;
  Matrix coeffs;

  FourierSolution() = default;
  FourierSolution(double omega_, Index n, Index harmonics);

  Index dofs() const { return coeffs.rows(); }
  Index harmonics() const { return (coeffs.cols() - 1) / 2; }
  Vector c0() const { return coeffs.col(0); }
  Vector a(Index h) const { return coeffs.col(2 * h - 1); }
  Vector b(Index h) const { return coeffs.col(2 * h); }

  Vector pack() const { return Eigen::Map<const Vector>(coeffs.data(), coeffs.size()); }
  static FourierSolution unpack(const Vector& x, Index n, double omega);

  Vector displacement(double t) const;
  Vector velocity(double t) const;
  Vector acceleration(double t) const;
  /// Same orbit with H' harmonics (truncated or zero-padded).
  FourierSolution resized(Index harmonics) const;
};

struct HbConfig {
  Index harmonics = 9;
  Index samples = 0;          ///< AFT samples per period; 0 picks the smallest power of two >= 8H (and alias-safe)
  double tol_rel = 1e-10;     ///< relative to the forcing norm
  double tol_abs = 1e-14;     ///< relative to ||K||_F ||x||
  int max_iterations = 40;
  double rcond_min = 1e-13;   ///< dense Jacobians below this are reported as singular
};

/// Alias guard: at least 2 (3H) + 2 samples, one more when the nonlinear terms
/// carry their own forcing-phase harmonic.
Index hb_min_samples(Index harmonics, bool phase_dependent);
Index hb_default_samples(Index harmonics, bool phase_dependent);

/// Frequency-domain operator of one system for a fixed harmonic count.
class HarmonicBalance {
 public:
  HarmonicBalance(const DynamicSystem& sys, const HbConfig& cfg);

  const DynamicSystem& system() const { return sys_; }
  Index harmonics() const { return H_; }
  Index samples() const { return N_; }
  Index dofs() const { return n_; }
  Index unknowns() const { return n_ * (2 * H_ + 1); }
  const HbConfig& config() const { return cfg_; }

  /// Fourier-coefficient residual of M D'' + C D' + K D + f_nl - F, for the
  /// load's beta, F0 and phase at angular frequency `omega`.
  Vector residual(const Vector& x, double omega, const ForcingSpec& load) const;

  /// Jacobian triplets (row/col offsets added) and optionally dR/domega.
  void jacobian(const Vector& x, double omega, const ForcingSpec& load, std::vector<Triplet>& out,
                Vector* d_omega = nullptr) const;
  SpMat jacobian_matrix(const Vector& x, double omega, const ForcingSpec& load, Vector* d_omega = nullptr) const;

  /// n x N time samples over one period (theta = 2 pi s / N).
  SampleMatrix to_samples(const Vector& x) const;
  /// Norm scale used by the convergence test.
  double tolerance(const Vector& x, const ForcingSpec& load) const;

 private:
  const DynamicSystem& sys_;
  HbConfig cfg_;
  Index n_, H_, N_;
  double k_norm_;
  Matrix synth_;    ///< N x (2H+1): sample = coeffs * synth^T
  Matrix analyze_;  ///< N x (2H+1): coeffs = samples * analyze (1/N mean, 2/N harmonics)
  Matrix cos_m_, sin_m_;  ///< N x (2H+1): cos(m theta)/N, sin(m theta)/N for m = 0..2H
  Vector theta_;
  // per block pair (p, q): list of (sign, is_sine, m)
  struct Term {
    double sign;
    bool sine;
    Index m;
  };
  std::vector<std::vector<Term>> block_terms_;
};

struct HbReport {
  int iterations = 0;
  double residual_norm = 0.0;
};

Vector hb_residual(const DynamicSystem& sys, const FourierSolution& sol, const HbConfig& cfg = {});
Vector hb_residual(const DynamicSystem& sys, const ForcingSpec& load, const FourierSolution& sol,
                   const HbConfig& cfg = {});

/// Newton with backtracking. The default guess is one Newton step from rest,
/// i.e. the linear response at omega. Throws ConvergenceError on failure.
FourierSolution hb_solve(const DynamicSystem& sys, double omega, double beta,
                         const std::optional<FourierSolution>& guess = std::nullopt, const HbConfig& cfg = {},
                         HbReport* report = nullptr);
FourierSolution hb_solve(const HarmonicBalance& hb, const ForcingSpec& load,
                         const std::optional<FourierSolution>& guess = std::nullopt, HbReport* report = nullptr);

/// m equispaced displacement states over [0, 2 pi / omega).
Matrix sample_period(const FourierSolution& sol, Index m);

/// Half peak-to-peak of o . D(t) over a period (sampled then Newton-refined).
double observable_amplitude(const FourierSolution& sol, const Vector& functional);

/// max_t || M D'' + C D' + f_int(D) - F(t) || over `samples` equispaced times.
double time_domain_residual(const DynamicSystem& sys, const ForcingSpec& load, const FourierSolution& sol,
                            Index samples);

}  // namespace romforge

namespace romforge {

struct SweepPoint {
  double omega = 0.0;
  FourierSolution sol;
  std::vector<double> amplitudes;  ///< half peak-to-peak, one per observable
};

struct HbSweepOptions {
  int max_bisections = 6;  ///< intermediate frequencies inserted when a warm start fails
  unsigned threads = 1;    ///< >1 splits the grid into contiguous chunks solved concurrently
  bool amplitudes = true;  ///< skip the amplitude refinement when only timings matter
};

/// Sequential warm-started hb_solve over a frequency grid (forcing level and
/// F0 from `load`). A failed step is retried from the last converged point
/// through bisected intermediate frequencies before giving up.
std::vector<SweepPoint> hb_sweep(const DynamicSystem& sys, const std::vector<double>& omegas, const ForcingSpec& load,
                                 const HbConfig& cfg = {}, const HbSweepOptions& opts = {});

}  // namespace romforge
