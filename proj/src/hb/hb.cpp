#include "romforge/hb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace romforge {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

FourierSolution::FourierSolution(double omega_, Index n, Index harmonics)
    : omega(omega_), coeffs(Matrix::Zero(n, 2 * harmonics + 1)) {
  require(harmonics >= 0 && n >= 0, "FourierSolution: negative size");
}

FourierSolution FourierSolution::unpack(const Vector& x, Index n, double omega) {
  require(n > 0 && x.size() % n == 0 && (x.size() / n) % 2 == 1, "FourierSolution::unpack: bad vector length");
  FourierSolution s;
  s.omega = omega;
  s.coeffs = Eigen::Map<const Matrix>(x.data(), n, x.size() / n);
  return s;
}

Vector FourierSolution::displacement(double t) const {
  Vector d = coeffs.col(0);
  for (Index h = 1; h <= harmonics(); ++h) {
    const double th = static_cast<double>(h) * omega * t;
    d += std::cos(th) * coeffs.col(2 * h - 1) + std::sin(th) * coeffs.col(2 * h);
  }
  return d;
}

Vector FourierSolution::velocity(double t) const {
  Vector v = Vector::Zero(dofs());
  for (Index h = 1; h <= harmonics(); ++h) {
    const double hw = static_cast<double>(h) * omega, th = hw * t;
    v += hw * (-std::sin(th) * coeffs.col(2 * h - 1) + std::cos(th) * coeffs.col(2 * h));
  }
  return v;
}

Vector FourierSolution::acceleration(double t) const {
  Vector acc = Vector::Zero(dofs());
  for (Index h = 1; h <= harmonics(); ++h) {
    const double hw = static_cast<double>(h) * omega, th = hw * t;
    acc -= hw * hw * (std::cos(th) * coeffs.col(2 * h - 1) + std::sin(th) * coeffs.col(2 * h));
  }
  return acc;
}

FourierSolution FourierSolution::resized(Index harmonics_new) const {
  FourierSolution s(omega, dofs(), harmonics_new);
  const Index cols = std::min(coeffs.cols(), s.coeffs.cols());
  s.coeffs.leftCols(cols) = coeffs.leftCols(cols);
  return s;
}

Index hb_min_samples(Index harmonics, bool phase_dependent) {
  return 2 * (3 * harmonics) + 2 + (phase_dependent ? 1 : 0);
}

Index hb_default_samples(Index harmonics, bool phase_dependent) {
  const Index need = std::max<Index>(8 * harmonics, hb_min_samples(harmonics, phase_dependent));
  Index n = 1;
  while (n < need) n *= 2;
  return std::max<Index>(n, 4);
}

HarmonicBalance::HarmonicBalance(const DynamicSystem& sys, const HbConfig& cfg)
    : sys_(sys), cfg_(cfg), n_(sys.dofs()), H_(cfg.harmonics) {
  if (H_ < 1) throw ConfigError("harmonic balance: at least one harmonic is required");
  const bool phased = sys.nonlinear().phase_dependent();
  N_ = cfg.samples > 0 ? cfg.samples : hb_default_samples(H_, phased);
  if (N_ < hb_min_samples(H_, phased)) {
    throw ConfigError("harmonic balance: " + std::to_string(N_) + " samples alias the nonlinear terms; need at least " +
                      std::to_string(hb_min_samples(H_, phased)) + " for H=" + std::to_string(H_));
  }
  k_norm_ = sys.stiffness().norm();

  const Index B = 2 * H_ + 1;
  theta_.resize(N_);
  synth_.resize(N_, B);
  analyze_.resize(N_, B);
  cos_m_.resize(N_, B);
  sin_m_.resize(N_, B);
  const double inv = 1.0 / static_cast<double>(N_);
  for (Index s = 0; s < N_; ++s) {
    const double th = kTwoPi * static_cast<double>(s) * inv;
    theta_[s] = th;
    synth_(s, 0) = 1.0;
    analyze_(s, 0) = inv;
    for (Index h = 1; h <= H_; ++h) {
      const double c = std::cos(static_cast<double>(h) * th), sn = std::sin(static_cast<double>(h) * th);
      synth_(s, 2 * h - 1) = c;
      synth_(s, 2 * h) = sn;
      analyze_(s, 2 * h - 1) = 2.0 * inv * c;
      analyze_(s, 2 * h) = 2.0 * inv * sn;
    }
    for (Index m = 0; m < B; ++m) {
      cos_m_(s, m) = inv * std::cos(static_cast<double>(m) * th);
      sin_m_(s, m) = inv * std::sin(static_cast<double>(m) * th);
    }
  }

  // Product-to-sum rules for the Galerkin projection of J(theta) * basis_q onto basis_p.
  auto harmonic = [](Index p) { return (p + 1) / 2; };
  auto is_sin = [](Index p) { return p > 0 && p % 2 == 0; };
  block_terms_.assign(static_cast<std::size_t>(B * B), {});
  for (Index p = 0; p < B; ++p) {
    for (Index q = 0; q < B; ++q) {
      auto& t = block_terms_[static_cast<std::size_t>(p * B + q)];
      const Index k = harmonic(p), h = harmonic(q);
      if (p == 0) {
        t.push_back({1.0, is_sin(q), h});
      } else if (q == 0) {
        t.push_back({2.0, is_sin(p), k});
      } else if (!is_sin(p) && !is_sin(q)) {
        t.push_back({1.0, false, std::abs(k - h)});
        t.push_back({1.0, false, k + h});
      } else if (!is_sin(p) && is_sin(q)) {
        t.push_back({1.0, true, k + h});
        if (h != k) t.push_back({h > k ? 1.0 : -1.0, true, std::abs(h - k)});
      } else if (is_sin(p) && !is_sin(q)) {
        t.push_back({1.0, true, k + h});
        if (h != k) t.push_back({k > h ? 1.0 : -1.0, true, std::abs(k - h)});
      } else {
        t.push_back({1.0, false, std::abs(k - h)});
        t.push_back({-1.0, false, k + h});
      }
    }
  }
}

SampleMatrix HarmonicBalance::to_samples(const Vector& x) const {
  require_size(x.size(), unknowns(), "harmonic balance unknowns");
  const Eigen::Map<const Matrix> C(x.data(), n_, 2 * H_ + 1);
  SampleMatrix S = C * synth_.transpose();
  return S;
}

Vector HarmonicBalance::residual(const Vector& x, double omega, const ForcingSpec& load) const {
  require_size(x.size(), unknowns(), "harmonic balance unknowns");
  require(x.allFinite(), "harmonic balance: non-finite coefficients");
  const Eigen::Map<const Matrix> C(x.data(), n_, 2 * H_ + 1);
  const SpMat& M = sys_.mass();
  const SpMat& Cd = sys_.damping();
  const SpMat& K = sys_.stiffness();

  Matrix R(n_, 2 * H_ + 1);
  R.col(0) = K * C.col(0);
  for (Index h = 1; h <= H_; ++h) {
    const double hw = static_cast<double>(h) * omega;
    const Vector a = C.col(2 * h - 1), b = C.col(2 * h);
    const Vector Ka = K * a, Kb = K * b, Ma = M * a, Mb = M * b, Ca = Cd * a, Cb = Cd * b;
    R.col(2 * h - 1) = Ka - hw * hw * Ma + hw * Cb;
    R.col(2 * h) = Kb - hw * hw * Mb - hw * Ca;
  }

  const auto& nl = sys_.nonlinear();
  if (nl.pattern().size() > 0 || nl.phase_dependent()) {
    const SampleMatrix D = C * synth_.transpose();
    SampleMatrix F = SampleMatrix::Zero(n_, N_);
    const Vector th = theta_.array() + load.phase;
    nl.add_force_samples(D, th, F);
    R.noalias() += F * analyze_;
  }

  if (load.F0.size() == n_ && load.beta != 0.0) {
    R.col(1) -= load.beta * std::cos(load.phase) * load.F0;
    R.col(2) += load.beta * std::sin(load.phase) * load.F0;
  }
  return Eigen::Map<const Vector>(R.data(), R.size());
}

void HarmonicBalance::jacobian(const Vector& x, double omega, const ForcingSpec& load, std::vector<Triplet>& out,
                               Vector* d_omega) const {
  require_size(x.size(), unknowns(), "harmonic balance unknowns");
  const Index B = 2 * H_ + 1;
  const SpMat& M = sys_.mass();
  const SpMat& Cd = sys_.damping();
  const SpMat& K = sys_.stiffness();

  // Linear blocks.
  for (Index c = 0; c < K.outerSize(); ++c) {
    for (SpMat::InnerIterator it(K, c); it; ++it) {
      for (Index p = 0; p < B; ++p) out.emplace_back(p * n_ + it.row(), p * n_ + it.col(), it.value());
    }
  }
  for (Index c = 0; c < M.outerSize(); ++c) {
    for (SpMat::InnerIterator it(M, c); it; ++it) {
      for (Index h = 1; h <= H_; ++h) {
        const double v = -static_cast<double>(h * h) * omega * omega * it.value();
        out.emplace_back((2 * h - 1) * n_ + it.row(), (2 * h - 1) * n_ + it.col(), v);
        out.emplace_back(2 * h * n_ + it.row(), 2 * h * n_ + it.col(), v);
      }
    }
  }
  for (Index c = 0; c < Cd.outerSize(); ++c) {
    for (SpMat::InnerIterator it(Cd, c); it; ++it) {
      for (Index h = 1; h <= H_; ++h) {
        const double v = static_cast<double>(h) * omega * it.value();
        out.emplace_back((2 * h - 1) * n_ + it.row(), 2 * h * n_ + it.col(), v);
        out.emplace_back(2 * h * n_ + it.row(), (2 * h - 1) * n_ + it.col(), -v);
      }
    }
  }

  const auto& nl = sys_.nonlinear();
  const auto& pat = nl.pattern();
  if (pat.size() > 0) {
    const Eigen::Map<const Matrix> C(x.data(), n_, B);
    const SampleMatrix D = C * synth_.transpose();
    SampleMatrix S;
    const Vector th = theta_.array() + load.phase;
    nl.tangent_samples(D, th, S);
    const Matrix cm = S * cos_m_;  // slots x (2H+1)
    const Matrix sm = S * sin_m_;
    const Index ns = static_cast<Index>(pat.size());
    out.reserve(out.size() + static_cast<std::size_t>(ns * B * B));
    for (Index p = 0; p < B; ++p) {
      for (Index q = 0; q < B; ++q) {
        const auto& terms = block_terms_[static_cast<std::size_t>(p * B + q)];
        for (Index s = 0; s < ns; ++s) {
          double v = 0.0;
          for (const auto& t : terms) {
            if (t.m >= B) continue;  // beyond 2H: cannot appear for m <= 2H, kept for safety
            v += t.sign * (t.sine ? sm(s, t.m) : cm(s, t.m));
          }
          if (v != 0.0) {
            out.emplace_back(p * n_ + pat.rows[static_cast<std::size_t>(s)],
                             q * n_ + pat.cols[static_cast<std::size_t>(s)], v);
          }
        }
      }
    }
  }

  if (d_omega) {
    const Eigen::Map<const Matrix> C(x.data(), n_, B);
    Matrix R = Matrix::Zero(n_, B);
    for (Index h = 1; h <= H_; ++h) {
      const double hd = static_cast<double>(h);
      const Vector a = C.col(2 * h - 1), b = C.col(2 * h);
      R.col(2 * h - 1) = -2.0 * hd * hd * omega * (M * a) + hd * (Cd * b);
      R.col(2 * h) = -2.0 * hd * hd * omega * (M * b) - hd * (Cd * a);
    }
    *d_omega = Eigen::Map<const Vector>(R.data(), R.size());
  }
}

SpMat HarmonicBalance::jacobian_matrix(const Vector& x, double omega, const ForcingSpec& load, Vector* d_omega) const {
  std::vector<Triplet> trips;
  jacobian(x, omega, load, trips, d_omega);
  SpMat J(unknowns(), unknowns());
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

double HarmonicBalance::tolerance(const Vector& x, const ForcingSpec& load) const {
  const double f = load.F0.size() == n_ ? std::abs(load.beta) * load.F0.norm() : 0.0;
  return cfg_.tol_rel * f + cfg_.tol_abs * k_norm_ * x.norm();
}

Vector hb_residual(const DynamicSystem& sys, const ForcingSpec& load, const FourierSolution& sol, const HbConfig& cfg) {
  HbConfig c = cfg;
  c.harmonics = sol.harmonics();
  require_size(sol.dofs(), sys.dofs(), "hb_residual solution");
  HarmonicBalance hb(sys, c);
  return hb.residual(sol.pack(), sol.omega, load);
}

Vector hb_residual(const DynamicSystem& sys, const FourierSolution& sol, const HbConfig& cfg) {
  return hb_residual(sys, sys.forcing(), sol, cfg);
}

FourierSolution hb_solve(const HarmonicBalance& hb, const ForcingSpec& load, const std::optional<FourierSolution>& guess,
                         HbReport* report) {
  const double omega = load.omega;
  require(omega > 0.0 && std::isfinite(omega), "hb_solve: omega must be positive");
  const Index n = hb.dofs();
  const auto& cfg = hb.config();
  Vector x;
  if (guess) {
    require_size(guess->dofs(), n, "hb_solve guess");
    x = guess->resized(hb.harmonics()).pack();
    require(x.allFinite(), "hb_solve: non-finite guess");
  } else {
    x = Vector::Zero(hb.unknowns());
  }

  LinearSolver solver;
  Vector r = hb.residual(x, omega, load);
  double rn = r.norm();
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const double tol = hb.tolerance(x, load);
    if (rn <= tol && (guess || it > 0)) {
      if (report) *report = {it, rn};
      return FourierSolution::unpack(x, n, omega);
    }
    if (it == cfg.max_iterations) break;
    const SpMat J = hb.jacobian_matrix(x, omega, load);
    if (!solver.factorize(J) || solver.rcond() < cfg.rcond_min) {
      throw ConvergenceError("hb_solve: near-singular Jacobian at omega=" + std::to_string(omega) +
                                 " (likely a fold); trace the branch with continuation instead",
                             rn, it);
    }
    const Vector dx = solver.solve(r);
    if (!dx.allFinite()) throw ConvergenceError("hb_solve: non-finite Newton step", rn, it);
    // Natural monotonicity test: the simplified Newton correction J^-1 r(x_new)
    // must shrink. Unlike ||r|| it is insensitive to badly scaled equations.
    const double dxn = dx.norm();
    double lambda = 1.0;
    Vector xn, rnew;
    double rnn = 0.0;
    for (int ls = 0; ls < 12; ++ls) {
      xn = x - lambda * dx;
      rnew = hb.residual(xn, omega, load);
      rnn = rnew.norm();
      if (rnn <= hb.tolerance(xn, load) || lambda < 1e-3) break;
      const Vector dbar = solver.solve(rnew);
      if (dbar.allFinite() && dbar.norm() <= (1.0 - 0.25 * lambda) * dxn) break;
      lambda *= 0.5;
    }
    const bool stalled = (xn - x).norm() <= 1e-14 * std::max(1.0, x.norm());
    x = std::move(xn);
    r = std::move(rnew);
    rn = rnn;
    if (stalled && rn <= 1e3 * hb.tolerance(x, load)) {
      if (report) *report = {it + 1, rn};
      return FourierSolution::unpack(x, n, omega);
    }
  }
  throw ConvergenceError("hb_solve: no convergence at omega=" + std::to_string(omega) + " after " +
                             std::to_string(cfg.max_iterations) + " iterations (residual " + std::to_string(rn) + ")",
                         rn, cfg.max_iterations);
}

FourierSolution hb_solve(const DynamicSystem& sys, double omega, double beta, const std::optional<FourierSolution>& guess,
                         const HbConfig& cfg, HbReport* report) {
  HarmonicBalance hb(sys, cfg);
  return hb_solve(hb, sys.forcing().with(beta, omega), guess, report);
}

Matrix sample_period(const FourierSolution& sol, Index m) {
  require(m >= 1, "sample_period: m must be at least 1");
  require(sol.omega > 0.0, "sample_period: omega must be positive");
  Matrix out(sol.dofs(), m);
  const double T = kTwoPi / sol.omega;
  for (Index j = 0; j < m; ++j) out.col(j) = sol.displacement(T * static_cast<double>(j) / static_cast<double>(m));
  return out;
}

double observable_amplitude(const FourierSolution& sol, const Vector& functional) {
  require_size(functional.size(), sol.dofs(), "observable_amplitude functional");
  const Index H = sol.harmonics();
  const Vector y = sol.coeffs.transpose() * functional;  // [y0, ya1, yb1, ...]
  auto eval = [&](double th, int deriv) {
    double v = deriv == 0 ? y[0] : 0.0;
    for (Index h = 1; h <= H; ++h) {
      const double hd = static_cast<double>(h), c = std::cos(hd * th), s = std::sin(hd * th);
      const double a = y[2 * h - 1], b = y[2 * h];
      if (deriv == 0) v += a * c + b * s;
      if (deriv == 1) v += hd * (-a * s + b * c);
      if (deriv == 2) v -= hd * hd * (a * c + b * s);
    }
    return v;
  };
  const Index grid = std::max<Index>(64, 32 * H);
  Index imax = 0, imin = 0;
  std::vector<double> vals(static_cast<std::size_t>(grid));
  for (Index i = 0; i < grid; ++i) {
    vals[static_cast<std::size_t>(i)] = eval(kTwoPi * static_cast<double>(i) / static_cast<double>(grid), 0);
    if (vals[static_cast<std::size_t>(i)] > vals[static_cast<std::size_t>(imax)]) imax = i;
    if (vals[static_cast<std::size_t>(i)] < vals[static_cast<std::size_t>(imin)]) imin = i;
  }
  auto refine = [&](Index i0) {
    const double step = kTwoPi / static_cast<double>(grid);
    double th = step * static_cast<double>(i0);
    double best = eval(th, 0);
    for (int it = 0; it < 30; ++it) {
      const double d2 = eval(th, 2);
      if (d2 == 0.0) break;
      const double dth = -eval(th, 1) / d2;
      if (!std::isfinite(dth) || std::abs(dth) > step) break;
      th += dth;
      if (std::abs(dth) < 1e-15) break;
    }
    const double v = eval(th, 0);
    return std::abs(th - step * static_cast<double>(i0)) <= step ? v : best;
  };
  const double hi = std::max(refine(imax), vals[static_cast<std::size_t>(imax)]);
  const double lo = std::min(refine(imin), vals[static_cast<std::size_t>(imin)]);
  return 0.5 * (hi - lo);
}

double time_domain_residual(const DynamicSystem& sys, const ForcingSpec& load, const FourierSolution& sol,
                            Index samples) {
  require(samples >= 1, "time_domain_residual: samples must be positive");
  const double T = kTwoPi / sol.omega;
  ForcingSpec f = load;
  f.omega = sol.omega;
  double worst = 0.0;
  for (Index j = 0; j < samples; ++j) {
    const double t = T * static_cast<double>(j) / static_cast<double>(samples);
    const Vector r = residual(sys, f, sol.displacement(t), sol.velocity(t), sol.acceleration(t), t);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

}  // namespace romforge

namespace romforge {

namespace {

void sweep_chunk(const DynamicSystem& sys, const std::vector<double>& omegas, std::size_t lo, std::size_t hi,
                 const ForcingSpec& load, const HbConfig& cfg, const HbSweepOptions& opts,
                 std::vector<SweepPoint>& out) {
  const HarmonicBalance hb(sys, cfg);
  std::optional<FourierSolution> last;
  for (std::size_t k = lo; k < hi; ++k) {
    const double target = omegas[k];
    // Walk from the last converged frequency towards the target, halving the
    // remaining gap whenever the warm start fails.
    double from = last ? last->omega : target;
    double step = target - from;
    int bisections = 0;
    while (true) {
      const double w = (std::abs(target - from) <= std::abs(step)) ? target : from + step;
      try {
        FourierSolution s = hb_solve(hb, load.with(load.beta, w), last);
        last = std::move(s);
        from = w;
        if (w == target) break;
      } catch (const ConvergenceError&) {
        if (++bisections > opts.max_bisections) throw;
        if (!last) throw;
        step = 0.5 * (w - from);
      }
    }
    SweepPoint p;
    p.omega = target;
    p.sol = *last;
    if (opts.amplitudes) {
      for (const auto& o : sys.observables()) p.amplitudes.push_back(observable_amplitude(p.sol, o.functional));
    }
    out[k] = std::move(p);
  }
}

}  // namespace

std::vector<SweepPoint> hb_sweep(const DynamicSystem& sys, const std::vector<double>& omegas, const ForcingSpec& load,
                                 const HbConfig& cfg, const HbSweepOptions& opts) {
  require(!omegas.empty(), "hb_sweep: empty frequency grid");
  for (double w : omegas) require(std::isfinite(w) && w > 0.0, "hb_sweep: frequencies must be positive");
  std::vector<SweepPoint> out(omegas.size());
  const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, omegas.size());
  if (threads == 1) {
    sweep_chunk(sys, omegas, 0, omegas.size(), load, cfg, opts, out);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (omegas.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(omegas.size(), lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, t, lo, hi] {
      try {
        sweep_chunk(sys, omegas, lo, hi, load, cfg, opts, out);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace romforge
