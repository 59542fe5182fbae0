#include "romforge/pod.hpp"

#include "romforge/modal.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace romforge {

std::string_view to_string(SnapshotSource s) {
  switch (s) {
    case SnapshotSource::HB: return "HB";
    case SnapshotSource::TM_SS: return "TM-SS";
    case SnapshotSource::TM_TR: return "TM-TR";
  }
  return "?";
}

SnapshotMatrix assemble_snapshots(const std::vector<SnapshotInput>& sources) {
  if (sources.empty()) throw ContractViolation("assemble_snapshots: no snapshot sources");
  Index n = -1, m = 0;
  auto check_n = [&](Index k) {
    if (n < 0) n = k;
    if (k != n) {
      throw ContractViolation("assemble_snapshots: inconsistent dof count (" + std::to_string(k) + " vs " +
                              std::to_string(n) + ")");
    }
  };
  for (const auto& src : sources) {
    if (const auto* tr = std::get_if<TrajectorySnapshots>(&src)) {
      require(tr->trajectory != nullptr, "assemble_snapshots: null trajectory");
      check_n(tr->trajectory->D.rows());
      m += tr->trajectory->D.cols();
    } else {
      const auto& hb = std::get<HbSnapshots>(src);
      require(hb.samples >= 1, "assemble_snapshots: at least one sample per period");
      check_n(hb.solution.dofs());
      m += hb.samples;
    }
  }
  if (m < 1) throw ContractViolation("assemble_snapshots: sources contain no states");

  SnapshotMatrix S;
  S.X.resize(n, m);
  Index col = 0;
  for (const auto& src : sources) {
    if (const auto* tr = std::get_if<TrajectorySnapshots>(&src)) {
      const Trajectory& T = *tr->trajectory;
      S.X.middleCols(col, T.D.cols()) = T.D;
      if (T.segments.empty()) {
        S.provenance.push_back({tr->source, 0.0, 0.0, col, T.D.cols()});
      } else {
        for (const auto& seg : T.segments) S.provenance.push_back({tr->source, seg.omega, seg.beta, col + seg.first, seg.count});
      }
      col += T.D.cols();
    } else {
      const auto& hb = std::get<HbSnapshots>(src);
      S.X.middleCols(col, hb.samples) = sample_period(hb.solution, hb.samples);
      S.provenance.push_back({SnapshotSource::HB, hb.solution.omega, hb.beta, col, hb.samples});
      col += hb.samples;
    }
  }
  if (!S.X.allFinite()) throw ContractViolation("assemble_snapshots: non-finite snapshot entries");
  return S;
}

namespace {

// One-sided Jacobi on the columns of A (square or tall). On return the columns
// of A are mutually orthogonal; their norms are the singular values.
void hestenes(Matrix& A) {
  const Index k = A.cols();
  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Index i = 0; i + 1 < k; ++i) {
      for (Index j = i + 1; j < k; ++j) {
        const double alpha = A.col(i).squaredNorm();
        const double beta = A.col(j).squaredNorm();
        const double gamma = A.col(i).dot(A.col(j));
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index r = 0; r < A.rows(); ++r) {
          const double ai = A(r, i), aj = A(r, j);
          A(r, i) = c * ai - s * aj;
          A(r, j) = s * ai + c * aj;
        }
      }
    }
    if (!rotated) return;
  }
  throw ConvergenceError("thin_svd: Jacobi sweeps did not converge", 0.0, 60);
}

// Normalized columns sorted by norm; zero columns get an arbitrary orthonormal completion.
ThinSvd sorted_columns(const Matrix& W, const Matrix* left) {
  const Index k = W.cols();
  Vector norms(k);
  for (Index j = 0; j < k; ++j) norms[j] = W.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms[a] > norms[b]; });
  ThinSvd out;
  out.sigma.resize(k);
  Matrix U(W.rows(), k);
  for (Index j = 0; j < k; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.sigma[j] = norms[src];
    if (norms[src] > 0.0) {
      U.col(j) = W.col(src) / norms[src];
    } else {
      U.col(j).setZero();
    }
  }
  out.U = left ? Matrix(*left * U) : U;
  return out;
}

}  // namespace

ThinSvd thin_svd(const Matrix& X, SvdMethod method) {
  require(X.rows() > 0 && X.cols() > 0, "thin_svd: empty matrix");
  require(X.allFinite(), "thin_svd: non-finite entries");
  const Index n = X.rows(), m = X.cols();

  if (method == SvdMethod::Snapshots) {
    // Gram matrix of the smaller side.
    if (n >= m) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(X.transpose() * X);
      ThinSvd out;
      out.sigma.resize(m);
      out.U.resize(n, m);
      for (Index j = 0; j < m; ++j) {
        const Index src = m - 1 - j;
        const double s = std::sqrt(std::max(es.eigenvalues()[src], 0.0));
        out.sigma[j] = s;
        if (s > 0.0) {
          out.U.col(j) = X * es.eigenvectors().col(src) / s;
        } else {
          out.U.col(j).setZero();
        }
      }
      return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(X * X.transpose());
    ThinSvd out;
    out.sigma.resize(n);
    out.U.resize(n, n);
    for (Index j = 0; j < n; ++j) {
      const Index src = n - 1 - j;
      out.sigma[j] = std::sqrt(std::max(es.eigenvalues()[src], 0.0));
      out.U.col(j) = es.eigenvectors().col(src);
    }
    return out;
  }

  // Rank-revealing QR first: the Jacobi sweeps then only see the numerically
  // nonzero block, which keeps long snapshot sets cheap.
  constexpr double kDrop = 1e-15;
  auto revealed_rank = [&](const Matrix& R) {
    const double r00 = std::abs(R(0, 0));
    Index r = 0;
    while (r < std::min(R.rows(), R.cols()) && std::abs(R(r, r)) > kDrop * r00) ++r;
    return std::max<Index>(r, 1);
  };
  const Index k = std::min(n, m);
  ThinSvd out;
  if (n >= m) {
    // X P = Q R; the left singular vectors of X are Q times those of R.
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    const Matrix R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    const Index r = revealed_rank(R);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, r);
    ThinSvd inner;
    if (r == m) {
      Matrix W = R;
      hestenes(W);
      inner = sorted_columns(W, nullptr);
    } else {
      inner = thin_svd(R.topRows(r), method);  // wide: handled below
    }
    out.U = Q * inner.U;
    out.sigma = inner.sigma;
  } else {
    // X^T P = Q R, so X = P R^T Q^T shares its left singular vectors with P R^T.
    Eigen::ColPivHouseholderQR<Matrix> qr(X.transpose());
    const Matrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const Index r = revealed_rank(R);
    Matrix W = R.topRows(r).transpose();  // n x r
    hestenes(W);
    out = sorted_columns(W, nullptr);
    out.U = qr.colsPermutation() * out.U;
  }
  if (out.sigma.size() < k) {
    const Index r = out.sigma.size();
    out.sigma.conservativeResize(k);
    out.sigma.tail(k - r).setZero();
    out.U.conservativeResize(n, k);
    out.U.rightCols(k - r).setZero();
  }
  return out;
}

Index numerical_rank(const Vector& sigma) {
  if (sigma.size() == 0 || !(sigma[0] > 0.0)) return 0;
  Index r = 0;
  while (r < sigma.size() && sigma[r] / sigma[0] >= kRankTolerance) ++r;
  return r;
}

PodBasis compute_pod(const Matrix& X, Index p, SvdMethod method) {
  require(p >= 1, "compute_pod: p must be at least 1");
  ThinSvd svd = thin_svd(X, method);
  const Index rank = numerical_rank(svd.sigma);
  if (p > rank) {
    throw ContractViolation("compute_pod: requested p = " + std::to_string(p) + " exceeds the numerical rank " +
                            std::to_string(rank) + " of the snapshot matrix");
  }
  PodBasis b;
  b.U = svd.U.leftCols(p);
  // Deterministic signs: the largest-magnitude entry of each mode is positive.
  for (Index k = 0; k < p; ++k) {
    Index imax = 0;
    b.U.col(k).cwiseAbs().maxCoeff(&imax);
    if (b.U(imax, k) < 0.0) b.U.col(k) *= -1.0;
  }
  b.sigma = std::move(svd.sigma);
  b.energy = b.sigma.squaredNorm();
  return b;
}

PodBasis compute_pod(const SnapshotMatrix& X, Index p, SvdMethod method) { return compute_pod(X.X, p, method); }

Vector energy_spectrum(const PodBasis& basis) {
  const double total = basis.sigma.squaredNorm();
  require(total > 0.0, "energy_spectrum: zero snapshot energy");
  return basis.sigma.array().square() / total;
}

// ---------------------------------------------------------------------------

namespace {

SpMat dense_to_sparse(const Matrix& A) { return A.sparseView(0.0, 0.0); }

Index ipow(Index b, int e) {
  Index r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

ReducedOrderModel::ReducedOrderModel(Matrix M, Matrix C, Matrix K, CubicTensor g, QuarticTensor h, ForcingSpec forcing,
                                     std::vector<Observable> observables, Matrix basis)
    : p_(M.rows()),
      M_(std::move(M)),
      C_(std::move(C)),
      K_(std::move(K)),
      force_(std::move(g), std::move(h)),
      forcing_(std::move(forcing)),
      observables_(std::move(observables)),
      U_(std::move(basis)) {
  require(p_ >= 1, "ReducedOrderModel: empty system");
  require(M_.cols() == p_ && C_.rows() == p_ && C_.cols() == p_ && K_.rows() == p_ && K_.cols() == p_,
          "ReducedOrderModel: matrix dimensions disagree");
  require(force_.quadratic().n() == p_ || force_.quadratic().n() == 0, "ReducedOrderModel: g dimension");
  require(force_.cubic().n() == p_ || force_.cubic().n() == 0, "ReducedOrderModel: h dimension");
  require(forcing_.F0.size() == p_, "ReducedOrderModel: forcing dimension");
  for (const auto& o : observables_) require_size(o.functional.size(), p_, "ReducedOrderModel observable");
  if (U_.size() != 0) require(U_.cols() == p_, "ReducedOrderModel: basis column count");
  Eigen::LLT<Matrix> llt(0.5 * (M_ + M_.transpose()));
  if (llt.info() != Eigen::Success) throw ContractViolation("ReducedOrderModel: reduced mass is not positive definite");
  Ms_ = dense_to_sparse(M_);
  Cs_ = dense_to_sparse(C_);
  Ks_ = dense_to_sparse(K_);
}

std::vector<double> ReducedOrderModel::g_dense() const {
  std::vector<double> out(static_cast<std::size_t>(ipow(p_, 3)), 0.0);
  for (const auto& e : g().entries()) out[static_cast<std::size_t>((e.i * p_ + e.j) * p_ + e.k)] = e.value;
  return out;
}

std::vector<double> ReducedOrderModel::h_dense() const {
  std::vector<double> out(static_cast<std::size_t>(ipow(p_, 4)), 0.0);
  for (const auto& e : h().entries()) out[static_cast<std::size_t>(((e.i * p_ + e.j) * p_ + e.k) * p_ + e.l)] = e.value;
  return out;
}

ReducedOrderModel ReducedOrderModel::with_forcing(ForcingSpec forcing) const {
  return ReducedOrderModel(M_, C_, K_, g(), h(), std::move(forcing), observables_, U_);
}

namespace {

void check_orthonormal(const Matrix& U, Index n) {
  require(U.rows() == n, "project: basis has " + std::to_string(U.rows()) + " rows, model has " +
                             std::to_string(n) + " dofs");
  require(U.cols() >= 1 && U.cols() <= n, "project: basis must have between 1 and n columns");
  const double dev = (U.transpose() * U - Matrix::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff();
  if (dev > 1e-8) {
    throw ContractViolation("project: basis is not orthonormal (Gram deviation " + std::to_string(dev) + ")");
  }
}

// r(i, j, k) = sum_e v U(a,i) U(b,j) U(c,k), folded onto canonical j <= k.
CubicTensor project_quadratic(const CubicTensor& G, const Matrix& U) {
  const Index n = U.rows(), p = U.cols();
  if (G.empty()) return CubicTensor(p);
  Matrix W = Matrix::Zero(n, p * p);  // W(a, j*p + k)
  for (const auto& e : G.entries()) {
    for (Index j = 0; j < p; ++j) {
      const double vj = e.value * U(e.j, j);
      if (vj == 0.0) continue;
      for (Index k = 0; k < p; ++k) W(e.i, j * p + k) += vj * U(e.k, k);
    }
  }
  const Matrix R = U.transpose() * W;  // p x p^2
  std::vector<CubicEntry> out;
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      for (Index k = j; k < p; ++k) {
        const double v = (j == k) ? R(i, j * p + k) : R(i, j * p + k) + R(i, k * p + j);
        if (v != 0.0) out.push_back({i, j, k, v});
      }
    }
  }
  return CubicTensor(p, std::move(out));
}

QuarticTensor project_cubic(const QuarticTensor& H, const Matrix& U) {
  const Index n = U.rows(), p = U.cols();
  if (H.empty()) return QuarticTensor(p);
  const Index p2 = p * p;
  Matrix W = Matrix::Zero(n, p2 * p);
  Vector jk(p2);
  for (const auto& e : H.entries()) {
    for (Index j = 0; j < p; ++j) {
      const double vj = e.value * U(e.j, j);
      for (Index k = 0; k < p; ++k) jk[j * p + k] = vj * U(e.k, k);
    }
    for (Index jk_i = 0; jk_i < p2; ++jk_i) {
      const double v = jk[jk_i];
      if (v == 0.0) continue;
      for (Index l = 0; l < p; ++l) W(e.i, jk_i * p + l) += v * U(e.l, l);
    }
  }
  const Matrix R = U.transpose() * W;  // p x p^3
  std::vector<QuarticEntry> out;
  auto at = [&](Index i, Index a, Index b, Index c) { return R(i, (a * p + b) * p + c); };
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      for (Index k = j; k < p; ++k) {
        for (Index l = k; l < p; ++l) {
          // Sum over the distinct permutations of (j, k, l).
          double v;
          if (j == k && k == l) {
            v = at(i, j, j, j);
          } else if (j == k) {
            v = at(i, j, j, l) + at(i, j, l, j) + at(i, l, j, j);
          } else if (k == l) {
            v = at(i, j, k, k) + at(i, k, j, k) + at(i, k, k, j);
          } else {
            v = at(i, j, k, l) + at(i, j, l, k) + at(i, k, j, l) + at(i, k, l, j) + at(i, l, j, k) + at(i, l, k, j);
          }
          if (v != 0.0) out.push_back({i, j, k, l, v});
        }
      }
    }
  }
  return QuarticTensor(p, std::move(out));
}

}  // namespace

ReducedOrderModel project(const FullOrderModel& model, const Matrix& U) {
  check_orthonormal(U, model.dofs());
  const Matrix Mr = U.transpose() * (model.mass() * U);
  const Matrix Cr = U.transpose() * (model.damping() * U);
  const Matrix Kr = U.transpose() * (model.stiffness() * U);
  // Exact symmetry for the symmetric operators.
  auto sym = [](const Matrix& A) { return Matrix(0.5 * (A + A.transpose())); };
  ForcingSpec f = model.forcing();
  f.F0 = U.transpose() * f.F0;
  std::vector<Observable> obs;
  for (const auto& o : model.observables()) obs.push_back({o.name, U.transpose() * o.functional});
  return ReducedOrderModel(sym(Mr), model.C().symmetric() ? sym(Cr) : Cr, model.K().symmetric() ? sym(Kr) : Kr,
                           project_quadratic(model.G(), U), project_cubic(model.H(), U), std::move(f), std::move(obs),
                           U);
}

ReducedOrderModel project(const FullOrderModel& model, const PodBasis& basis) { return project(model, basis.U); }

Trajectory lift(const Matrix& U, const Trajectory& reduced) {
  require(reduced.D.rows() == U.cols(), "lift: trajectory dimension does not match the basis");
  Trajectory out = reduced;
  out.n = U.rows();
  out.D = U * reduced.D;
  out.V = reduced.V.size() ? Matrix(U * reduced.V) : Matrix();
  return out;
}

Vector lift(const Matrix& U, const Vector& q) {
  require_size(q.size(), U.cols(), "lift");
  return U * q;
}

Vector project_state(const Matrix& U, const Vector& D) {
  require_size(D.size(), U.rows(), "project_state");
  return U.transpose() * D;
}

ModalCurves eigenmode_coordinates(const FullOrderModel& model, const Trajectory& traj,
                                  const std::vector<Index>& modes) {
  require(traj.D.rows() == model.dofs(), "eigenmode_coordinates: trajectory dimension");
  Index kmax = 0;
  for (Index m : modes) {
    require(m >= 0 && m < model.dofs(), "eigenmode_coordinates: mode index out of range");
    kmax = std::max(kmax, m + 1);
  }
  ModalCurves out;
  out.modes = modes;
  const Index nt = traj.D.cols();
  out.q.resize(static_cast<Index>(modes.size()), nt);
  out.qdot.resize(static_cast<Index>(modes.size()), nt);
  if (modes.empty()) return out;
  const auto pairs = solve_eigs(model, kmax);
  Matrix Phi(model.dofs(), static_cast<Index>(modes.size()));
  for (std::size_t i = 0; i < modes.size(); ++i) Phi.col(static_cast<Index>(i)) = pairs[static_cast<std::size_t>(modes[i])].shape;
  const Matrix PhiM = Phi.transpose() * model.mass();
  out.q = PhiM * traj.D;
  out.qdot = traj.V.size() ? Matrix(PhiM * traj.V) : Matrix::Zero(out.q.rows(), nt);
  return out;
}

}  // namespace romforge
