#include "romforge/continuation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace romforge {

std::string_view to_string(Bifurcation b) {
  switch (b) {
    case Bifurcation::SN: return "SN";
    case Bifurcation::NS: return "NS";
    case Bifurcation::PD: return "PD";
    default: return "NONE";
  }
}

std::size_t FrfBranch::count(Bifurcation b) const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [b](const BranchPoint& p) { return p.bif == b; }));
}

Multipliers floquet_multipliers(const DynamicSystem& sys, const ForcingSpec& load, const FourierSolution& sol,
                                Index steps) {
  require(steps >= 500, "floquet_multipliers: at least 500 steps per period are required");
  require(sol.omega > 0.0, "floquet_multipliers: omega must be positive");
  const Index n = sys.dofs();
  require_size(sol.dofs(), n, "floquet_multipliers solution");
  {
    HbConfig cfg;
    cfg.harmonics = std::max<Index>(sol.harmonics(), 1);
    HarmonicBalance hb(sys, cfg);
    const Vector x = sol.resized(cfg.harmonics).pack();
    const double rn = hb.residual(x, sol.omega, load).norm();
    if (!(rn <= 1e4 * hb.tolerance(x, load) + 1e-14)) {
      throw ContractViolation("floquet_multipliers: input is not a converged periodic solution (residual " +
                              std::to_string(rn) + ")");
    }
  }

  const Matrix M = Matrix(sys.mass());
  const Matrix Minv = M.llt().solve(Matrix::Identity(n, n));
  const Matrix MinvC = Minv * Matrix(sys.damping());
  const Matrix K = Matrix(sys.stiffness());
  const auto& nl = sys.nonlinear();
  const auto& pat = nl.pattern();

  const double T = 2.0 * std::numbers::pi / sol.omega;
  // RK4 is only stable for h * omega_max below ~2.8; stiff reduced bases
  // (axial content) need more steps than the slow dynamics suggest.
  {
    const Matrix KT0 = tangent_stiffness_dense(sys, sol.displacement(0.0), load.phase);
    const double w2 = (Minv * KT0).eigenvalues().cwiseAbs().maxCoeff();
    if (std::isfinite(w2)) steps = std::max<Index>(steps, static_cast<Index>(std::ceil(T * std::sqrt(w2) / 2.0)));
  }
  const double h = T / static_cast<double>(steps);
  const Index ns = 2 * steps + 1;
  SampleMatrix D(n, ns);
  Vector theta(ns);
  for (Index j = 0; j < ns; ++j) {
    const double t = 0.5 * h * static_cast<double>(j);
    D.col(j) = sol.displacement(t);
    theta[j] = sol.omega * t + load.phase;
  }
  SampleMatrix slots;
  if (pat.size() > 0) nl.tangent_samples(D, theta, slots);

  auto stiffness_at = [&](Index j) {
    Matrix KT = K;
    for (std::size_t s = 0; s < pat.size(); ++s) KT(pat.rows[s], pat.cols[s]) += slots(static_cast<Index>(s), j);
    return Matrix(Minv * KT);
  };
  auto rhs = [&](const Matrix& A, const Matrix& P) {
    Matrix out(2 * n, 2 * n);
    out.topRows(n) = P.bottomRows(n);
    out.bottomRows(n) = -A * P.topRows(n) - MinvC * P.bottomRows(n);
    return out;
  };

  Matrix P = Matrix::Identity(2 * n, 2 * n);
  Matrix A0 = stiffness_at(0);
  for (Index k = 0; k < steps; ++k) {
    const Matrix Am = stiffness_at(2 * k + 1);
    const Matrix A1 = stiffness_at(2 * k + 2);
    const Matrix k1 = rhs(A0, P);
    const Matrix k2 = rhs(Am, P + 0.5 * h * k1);
    const Matrix k3 = rhs(Am, P + 0.5 * h * k2);
    const Matrix k4 = rhs(A1, P + h * k3);
    P += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    A0 = A1;
  }
  Eigen::EigenSolver<Matrix> es(P, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("floquet_multipliers: eigenvalue solve failed", 0.0, 0);
  Multipliers mu(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(mu.begin(), mu.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
  return mu;
}

Multipliers floquet_multipliers(const DynamicSystem& sys, const FourierSolution& sol, Index steps) {
  return floquet_multipliers(sys, sys.forcing(), sol, steps);
}

namespace {

class Tracer {
 public:
  Tracer(const DynamicSystem& sys, const ForcingSpec& load, const ContinuationConfig& cfg, double sx, double sw)
      : sys_(sys), hb_(sys, cfg.hb), load_(load), cfg_(cfg), sx_(sx), sw_(sw), solver_(200) {}

  HarmonicBalance& hb() { return hb_; }
  double& sx() { return sx_; }
  double sw() const { return sw_; }

  // Scaled coordinates.
  Vector scaled(const Vector& x, double w) const {
    Vector y(x.size() + 1);
    y.head(x.size()) = x / sx_;
    y[x.size()] = w / sw_;
    return y;
  }
  void unscale(const Vector& y, Vector& x, double& w) const {
    const Index N = y.size() - 1;
    x = y.head(N) * sx_;
    w = y[N] * sw_;
  }

  // Newton on {R(x, w) = 0, normal . (y - y0) = 0}; y0 and normal in scaled coordinates.
  bool correct(Vector& x, double& w, const Vector& normal, const Vector& y0, int& iterations, double& rn) {
    const Index N = hb_.unknowns();
    double r0 = -1.0;
    for (int it = 0; it <= cfg_.corrector_iterations; ++it) {
      ForcingSpec ld = load_;
      ld.omega = w;
      const Vector R = hb_.residual(x, w, ld);
      const double g = normal.dot(scaled(x, w) - y0);
      rn = R.norm();
      if (!std::isfinite(rn)) return false;
      if (r0 < 0.0) r0 = std::max(rn, 1e-300);
      const double tol = hb_.tolerance(x, ld);
      if (rn <= tol && std::abs(g) <= 1e-9) {
        iterations = it;
        return true;
      }
      if (it == cfg_.corrector_iterations || rn > 1e6 * r0 + 1e6 * tol) return false;
      Vector Rw;
      trips_.clear();
      hb_.jacobian(x, w, ld, trips_, &Rw);
      for (Index i = 0; i < N; ++i) {
        if (Rw[i] != 0.0) trips_.emplace_back(i, N, Rw[i]);
        if (normal[i] != 0.0) trips_.emplace_back(N, i, normal[i] / sx_);
      }
      trips_.emplace_back(N, N, normal[N] / sw_);
      SpMat A(N + 1, N + 1);
      A.setFromTriplets(trips_.begin(), trips_.end());
      if (!solver_.factorize(A)) return false;
      Vector rhs(N + 1);
      rhs.head(N) = R;
      rhs[N] = g;
      const Vector d = solver_.solve(rhs);
      if (!d.allFinite()) return false;
      x -= d.head(N);
      w -= d[N];
      if (!(w > 0.0)) return false;
      if (d.head(N).norm() <= 1e-14 * std::max(1.0, x.norm()) && std::abs(d[N]) <= 1e-14 * w &&
          rn <= 1e3 * tol && std::abs(g) <= 1e-9) {
        iterations = it + 1;
        return true;
      }
    }
    return false;
  }

  // Unit tangent in scaled coordinates, oriented along `prev`.
  Vector tangent(const Vector& x, double w, const Vector& prev) {
    const Index N = hb_.unknowns();
    ForcingSpec ld = load_;
    ld.omega = w;
    Vector Rw;
    trips_.clear();
    hb_.jacobian(x, w, ld, trips_, &Rw);
    for (Index i = 0; i < N; ++i) {
      if (Rw[i] != 0.0) trips_.emplace_back(i, N, Rw[i]);
      if (prev[i] != 0.0) trips_.emplace_back(N, i, prev[i] / sx_);
    }
    trips_.emplace_back(N, N, prev[N] / sw_);
    SpMat A(N + 1, N + 1);
    A.setFromTriplets(trips_.begin(), trips_.end());
    if (!solver_.factorize(A)) throw ConvergenceError("trace_frf: singular bordered Jacobian in tangent", 0.0, 0);
    Vector rhs = Vector::Zero(N + 1);
    rhs[N] = 1.0;
    Vector d = solver_.solve(rhs);
    Vector t(N + 1);
    t.head(N) = d.head(N) / sx_;
    t[N] = d[N] / sw_;
    t.normalize();
    if (t.dot(prev) < 0.0) t = -t;
    return t;
  }

  BranchPoint make_point(const Vector& x, double w, int iterations, double rn) const {
    BranchPoint p;
    p.sol = FourierSolution::unpack(x, sys_.dofs(), w);
    p.omega = w;
    p.beta = load_.beta;
    for (const auto& o : sys_.observables()) p.amplitudes.push_back(observable_amplitude(p.sol, o.functional));
    p.iterations = iterations;
    p.residual_norm = rn;
    return p;
  }

  void stability(BranchPoint& p) const {
    ForcingSpec ld = load_;
    ld.omega = p.omega;
    p.multipliers = floquet_multipliers(sys_, ld, p.sol, cfg_.floquet_steps);
    p.stability_known = true;
    p.stable = std::abs(p.multipliers.front()) <= 1.0 + cfg_.tol_floq;
  }

  const ForcingSpec& load() const { return load_; }

 private:
  const DynamicSystem& sys_;
  HarmonicBalance hb_;
  ForcingSpec load_;
  const ContinuationConfig& cfg_;
  double sx_, sw_;
  LinearSolver solver_;
  std::vector<Triplet> trips_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

FrfBranch trace_frf(const DynamicSystem& sys, double omega_min, double omega_max, const ForcingSpec& load_in,
                    const ContinuationConfig& cfg) {
  if (!(omega_min > 0.0 && omega_max > omega_min)) throw ConfigError("trace_frf: need 0 < omega_min < omega_max");
  if (!(cfg.ds_min > 0.0 && cfg.ds_initial >= cfg.ds_min && cfg.ds_max >= cfg.ds_initial)) {
    throw ConfigError("trace_frf: inconsistent step sizes");
  }
  FrfBranch branch;
  for (const auto& o : sys.observables()) branch.observables.push_back(o.name);
  const double sw = omega_max - omega_min;

  ForcingSpec load = load_in;
  load.omega = omega_min;
  HarmonicBalance hb0(sys, cfg.hb);
  const FourierSolution start = hb_solve(hb0, load);
  Vector x = start.pack();
  double w = omega_min;
  double sx = x.norm() > 0.0 ? x.norm() : 1.0;
  Tracer tr(sys, load, cfg, sx, sw);

  {
    ForcingSpec ld = load;
    branch.points.push_back(tr.make_point(x, w, 0, tr.hb().residual(x, w, ld).norm()));
  }
  Vector e = Vector::Zero(x.size() + 1);
  e[x.size()] = 1.0;
  Vector t = tr.tangent(x, w, e);
  double ds = cfg.ds_initial;
  double s_total = 0.0;

  while (static_cast<int>(branch.points.size()) < cfg.max_points) {
    Vector yp = tr.scaled(x, w) + ds * t;
    Vector xn;
    double wn;
    tr.unscale(yp, xn, wn);
    int its = 0;
    double rn = 0.0;
    bool ok = tr.correct(xn, wn, t, yp, its, rn);
    Vector tn;
    if (ok) {
      const double old_sx = tr.sx();
      tr.sx() = std::max(old_sx, xn.norm());
      try {
        tn = tr.tangent(xn, wn, t);
      } catch (const ConvergenceError&) {
        ok = false;
      }
      if (ok && tn.dot(t) < 0.9 && ds > 4.0 * cfg.ds_min) ok = false;  // turning too sharply: refine
      if (!ok) tr.sx() = old_sx;
    }
    if (!ok) {
      ds *= cfg.shrink;
      if (ds < cfg.ds_min) {
        branch.diagnostics.push_back("step size underflow at omega=" + fmt(w) + "; branch is partial");
        break;
      }
      continue;
    }

    const bool past_max = wn > omega_max;
    const bool past_min = wn < omega_min;
    if (past_max || past_min) {
      const double edge = past_max ? omega_max : omega_min;
      const double f = (edge - w) / (wn - w);
      FourierSolution guess = FourierSolution::unpack(x + f * (xn - x), sys.dofs(), edge);
      ForcingSpec ld = load;
      ld.omega = edge;
      HbReport rep;
      try {
        const FourierSolution end = hb_solve(tr.hb(), ld, guess, &rep);
        Vector xe = end.pack();
        s_total += (tr.scaled(xe, edge) - tr.scaled(x, w)).norm();
        branch.points.push_back(tr.make_point(xe, edge, rep.iterations, rep.residual_norm));
        branch.points.back().arclength = s_total;
        branch.step_sizes.push_back(ds);
      } catch (const ConvergenceError& err) {
        branch.diagnostics.push_back(std::string("could not close the range at the boundary: ") + err.what());
      }
      branch.complete = true;
      if (past_min) branch.diagnostics.push_back("branch returned to omega_min");
      break;
    }

    s_total += (tr.scaled(xn, wn) - tr.scaled(x, w)).norm();
    branch.points.push_back(tr.make_point(xn, wn, its, rn));
    branch.points.back().arclength = s_total;
    branch.step_sizes.push_back(ds);
    x = std::move(xn);
    w = wn;
    t = std::move(tn);
    if (its <= cfg.fast_iterations) ds = std::min(ds * cfg.grow, cfg.ds_max);
  }
  if (!branch.complete && static_cast<int>(branch.points.size()) >= cfg.max_points) {
    branch.diagnostics.push_back("maximum number of points reached at omega=" + fmt(w) + "; branch is partial");
  }
  branch.x_scale = tr.sx();
  branch.omega_scale = sw;

  // Verification pass: every stored point must satisfy the residual tolerance.
  for (const auto& p : branch.points) {
    ForcingSpec ld = load;
    ld.omega = p.omega;
    const Vector xp = p.sol.pack();
    const double rn = tr.hb().residual(xp, p.omega, ld).norm();
    if (!(rn <= 1e3 * tr.hb().tolerance(xp, ld) + 1e-14)) {
      throw ConvergenceError("trace_frf: verification failed at omega=" + fmt(p.omega), rn, 0);
    }
  }

  if (cfg.stability) {
    for (auto& p : branch.points) tr.stability(p);
    classify_bifurcations(sys, load, branch, cfg);
  }
  return branch;
}

FrfBranch trace_frf(const DynamicSystem& sys, double omega_min, double omega_max, double beta,
                    const ContinuationConfig& cfg) {
  return trace_frf(sys, omega_min, omega_max, sys.forcing().with(beta, omega_min), cfg);
}

namespace {

Bifurcation label(const Multipliers& mu, double imag_tol) {
  // crossing multiplier: the one closest to the unit circle among the largest ones
  std::complex<double> c = mu.front();
  double best = 1e300;
  for (const auto& m : mu) {
    const double d = std::abs(std::abs(m) - 1.0);
    if (d < best) {
      best = d;
      c = m;
    }
  }
  if (std::abs(c.imag()) > imag_tol) return Bifurcation::NS;
  return c.real() > 0.0 ? Bifurcation::SN : Bifurcation::PD;
}

int unstable_count(const Multipliers& mu, double tol) {
  return static_cast<int>(std::count_if(mu.begin(), mu.end(), [tol](auto m) { return std::abs(m) > 1.0 + tol; }));
}

}  // namespace

void classify_bifurcations(const DynamicSystem& sys, const ForcingSpec& load, FrfBranch& branch,
                           const ContinuationConfig& cfg) {
  for (const auto& p : branch.points) {
    require(p.stability_known, "classify_bifurcations: multipliers missing on a branch point");
  }
  Tracer tr(sys, load, cfg, branch.x_scale, branch.omega_scale);
  std::vector<BranchPoint> out;
  out.reserve(branch.points.size() + 8);
  for (std::size_t i = 0; i < branch.points.size(); ++i) {
    if (i > 0 && branch.points[i].stable != branch.points[i - 1].stable) {
      BranchPoint a = branch.points[i - 1], b = branch.points[i];
      const int jump = std::abs(unstable_count(a.multipliers, cfg.tol_floq) - unstable_count(b.multipliers, cfg.tol_floq));
      bool refined = true;
      for (int k = 0; k < 60; ++k) {
        const Vector ya = tr.scaled(a.sol.pack(), a.omega), yb = tr.scaled(b.sol.pack(), b.omega);
        const double gap = (yb - ya).norm();
        if (std::abs(a.omega - b.omega) <= cfg.bisect_tol * a.omega && gap <= 1e-6) break;
        const Vector ym = 0.5 * (ya + yb);
        const Vector normal = (yb - ya) / gap;
        Vector xm;
        double wm;
        tr.unscale(ym, xm, wm);
        int its = 0;
        double rn = 0.0;
        if (!tr.correct(xm, wm, normal, ym, its, rn)) {
          refined = false;
          break;
        }
        BranchPoint m = tr.make_point(xm, wm, its, rn);
        m.arclength = 0.5 * (a.arclength + b.arclength);
        tr.stability(m);
        (m.stable == a.stable ? a : b) = std::move(m);
      }
      const double da = std::abs(std::abs(a.multipliers.front()) - 1.0);
      const double db = std::abs(std::abs(b.multipliers.front()) - 1.0);
      // the crossing multiplier is read on the unstable side, where it sits just outside the circle
      BranchPoint crit = a.stable ? b : a;
      crit.bif = label(crit.multipliers, cfg.imag_tol);
      BranchPoint refined_point = da <= db ? a : b;
      refined_point.bif = crit.bif;
      if (!refined) {
        branch.diagnostics.push_back("bifurcation near omega=" + fmt(crit.omega) + " could not be refined");
      }
      const int expected = refined_point.bif == Bifurcation::NS ? 2 : 1;
      if (jump != expected) {
        branch.diagnostics.push_back("ambiguous crossing near omega=" + fmt(crit.omega) +
                                     " (several multipliers cross); refine the step");
      }
      out.push_back(std::move(refined_point));
    }
    out.push_back(branch.points[i]);
  }
  branch.points = std::move(out);
}

FrfPeak locate_peak(const DynamicSystem& sys, const ForcingSpec& load, const FrfBranch& branch, Index observable,
                    const ContinuationConfig& cfg) {
  require(!branch.points.empty(), "locate_peak: empty branch");
  require(observable >= 0 && observable < static_cast<Index>(branch.observables.size()),
          "locate_peak: observable index out of range");
  const auto o = static_cast<std::size_t>(observable);
  std::size_t imax = 0;
  for (std::size_t i = 1; i < branch.points.size(); ++i) {
    if (branch.points[i].amplitudes[o] > branch.points[imax].amplitudes[o]) imax = i;
  }
  FrfPeak peak{branch.points[imax].omega, branch.points[imax].amplitudes[o], imax};
  if (imax == 0 || imax + 1 >= branch.points.size()) return peak;

  Tracer tr(sys, load, cfg, branch.x_scale, branch.omega_scale);
  const auto& P0 = branch.points[imax - 1];
  const auto& P1 = branch.points[imax];
  const auto& P2 = branch.points[imax + 1];
  const Vector y0 = tr.scaled(P0.sol.pack(), P0.omega), y1 = tr.scaled(P1.sol.pack(), P1.omega),
               y2 = tr.scaled(P2.sol.pack(), P2.omega);
  const Vector& fo = sys.observables()[o].functional;
  auto eval = [&](double tau, double& w_out) {
    const Vector& ya = tau < 0.0 ? y0 : y1;
    const Vector& yb = tau < 0.0 ? y1 : y2;
    const double f = tau < 0.0 ? 1.0 + tau : tau;
    const Vector y = ya + f * (yb - ya);
    const Vector normal = (yb - ya).normalized();
    Vector x;
    double w;
    tr.unscale(y, x, w);
    int its = 0;
    double rn = 0.0;
    if (!tr.correct(x, w, normal, y, its, rn)) return -1.0;
    w_out = w;
    return observable_amplitude(FourierSolution::unpack(x, sys.dofs(), w), fo);
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = -1.0, hi = 1.0;
  double w1 = 0.0, w2 = 0.0;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = eval(c, w1), fd = eval(d, w2);
  for (int it = 0; it < 40 && hi - lo > 1e-7; ++it) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      w2 = w1;
      c = hi - g * (hi - lo);
      fc = eval(c, w1);
    } else {
      lo = c;
      c = d;
      fc = fd;
      w1 = w2;
      d = lo + g * (hi - lo);
      fd = eval(d, w2);
    }
  }
  if (fc > peak.amplitude) {
    peak.amplitude = fc;
    peak.omega = w1;
  }
  if (fd > peak.amplitude) {
    peak.amplitude = fd;
    peak.omega = w2;
  }
  return peak;
}

}  // namespace romforge
