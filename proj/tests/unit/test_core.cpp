#include <doctest.h>

#include "romforge/core/model.hpp"
#include "romforge/kernels.hpp"

#include <random>

using namespace romforge;

namespace {

FullOrderModel scalar_model() {
  SparseMatrixSym M(1, {{0, 0, 1.0}}, true);
  SparseMatrixSym K(1, {{0, 0, 2.0}}, true);
  SparseMatrixSym C(1, {}, true);
  return FullOrderModel(M, C, K, CubicTensor(1, {{0, 0, 0, 0.5}}), QuarticTensor(1, {{0, 0, 0, 0, 0.1}}),
                        ForcingSpec{Vector::Ones(1), 0.0, 1.0, 0.0});
}

struct Dense {
  Matrix K;
  std::vector<double> G, H;  // raw dense arrays, n^3 and n^4
  Index n;
  double g(Index i, Index j, Index k) const { return G[static_cast<std::size_t>((i * n + j) * n + k)]; }
  double h(Index i, Index j, Index k, Index l) const {
    return H[static_cast<std::size_t>(((i * n + j) * n + k) * n + l)];
  }
};

// Random model whose tensors come from raw (non-canonical) entries; the dense
// arrays accumulate exactly the same raw terms for a brute-force oracle.
std::pair<FullOrderModel, Dense> random_model(Index n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<Index> idx(0, n - 1);
  Dense d{Matrix::Zero(n, n), std::vector<double>(static_cast<std::size_t>(n * n * n), 0.0),
          std::vector<double>(static_cast<std::size_t>(n * n * n * n), 0.0), n};
  Matrix A = Matrix::Random(n, n);
  Matrix K = A * A.transpose() + Matrix::Identity(n, n) * static_cast<double>(n);
  d.K = K;
  std::vector<CubicEntry> ge;
  std::vector<QuarticEntry> he;
  for (Index i = 0; i < n; ++i) {  // pure cubic terms so finite differences see a third derivative
    QuarticEntry q{i, i, i, i, u(rng)};
    he.push_back(q);
    d.H[static_cast<std::size_t>(((q.i * n + q.j) * n + q.k) * n + q.l)] += q.value;
  }
  for (int e = 0; e < 4 * n; ++e) {
    CubicEntry c{idx(rng), idx(rng), idx(rng), u(rng)};
    ge.push_back(c);
    d.G[static_cast<std::size_t>((c.i * n + c.j) * n + c.k)] += c.value;
    QuarticEntry q{idx(rng), idx(rng), idx(rng), idx(rng), u(rng)};
    he.push_back(q);
    d.H[static_cast<std::size_t>(((q.i * n + q.j) * n + q.k) * n + q.l)] += q.value;
  }
  FullOrderModel m(SparseMatrixSym::from_dense(Matrix::Identity(n, n), true), SparseMatrixSym(n, {}, true),
                   SparseMatrixSym::from_dense(K, true), CubicTensor(n, ge), QuarticTensor(n, he),
                   ForcingSpec{Vector::Random(n), 0.3, 1.1, 0.2});
  return {std::move(m), std::move(d)};
}

Vector brute_force(const Dense& d, const Vector& D) {
  const Index n = d.n;
  Vector f = d.K * D;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k) {
        f[i] += d.g(i, j, k) * D[j] * D[k];
        for (Index l = 0; l < n; ++l) f[i] += d.h(i, j, k, l) * D[j] * D[k] * D[l];
      }
  return f;
}

}  // namespace

TEST_CASE("internal force: zero state and scalar example") {
  auto m = scalar_model();
  CHECK(eval_internal_force(m, Vector::Zero(1)).norm() == 0.0);
  Vector D(1);
  D << 2.0;
  CHECK(eval_internal_force(m, D)[0] == doctest::Approx(6.8).epsilon(1e-14));
}

TEST_CASE("tangent stiffness: origin and scalar example") {
  auto m = scalar_model();
  CHECK(eval_tangent_stiffness(m, Vector::Zero(1)).to_dense()(0, 0) == doctest::Approx(2.0));
  Vector D(1);
  D << 2.0;
  CHECK(eval_tangent_stiffness(m, D).to_dense()(0, 0) == doctest::Approx(5.2).epsilon(1e-14));
}

TEST_CASE("internal force matches dense brute-force contraction") {
  std::mt19937 rng(7);
  for (Index n : {1, 3, 8, 20}) {
    auto [m, d] = random_model(n, rng);
    for (int trial = 0; trial < 5; ++trial) {
      Vector D = Vector::Random(n);
      const Vector f = eval_internal_force(m, D);
      const Vector ref = brute_force(d, D);
      CHECK((f - ref).norm() <= 1e-12 * ref.norm());
      // energy-type scalar D . G(D,D)
      Vector gd = Vector::Zero(n);
      m.G().apply(D, gd);
      double dense = 0.0;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          for (Index k = 0; k < n; ++k) dense += D[i] * d.g(i, j, k) * D[j] * D[k];
      CHECK(std::abs(D.dot(gd) - dense) <= 1e-12 * std::max(1.0, std::abs(dense)));
    }
  }
}

TEST_CASE("tangent stiffness matches central differences with O(h^2) error") {
  std::mt19937 rng(11);
  auto [m, d] = random_model(10, rng);
  Vector D = Vector::Random(10);
  const Matrix T = eval_tangent_stiffness(m, D).to_dense();
  auto fd = [&](double h) {
    Matrix J(10, 10);
    for (Index c = 0; c < 10; ++c) {
      Vector dp = D, dm = D;
      dp[c] += h;
      dm[c] -= h;
      J.col(c) = (eval_internal_force(m, dp) - eval_internal_force(m, dm)) / (2 * h);
    }
    return J;
  };
  const double e1 = (fd(1e-3) - T).cwiseAbs().maxCoeff();
  const double e2 = (fd(5e-4) - T).cwiseAbs().maxCoeff();
  CHECK((fd(1e-6) - T).norm() <= 1e-6 * T.norm());
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("residual is the sum of its terms") {
  std::mt19937 rng(3);
  auto [m, d] = random_model(6, rng);
  Vector D = Vector::Random(6), V = Vector::Random(6), A = Vector::Random(6);
  const double t = 0.7;
  const auto& f = m.forcing();
  Vector ref = A + brute_force(d, D) - f.beta * std::cos(f.omega * t + f.phase) * f.F0;  // M = I, C = 0
  CHECK((eval_residual(m, D, V, A, t) - ref).norm() <= 1e-12 * ref.norm());
  auto zero = m.with_forcing(f.with(0.0, 1.0));
  CHECK(eval_residual(zero, Vector::Zero(6), Vector::Zero(6), Vector::Zero(6), 0.0).norm() == 0.0);
}

TEST_CASE("static equilibrium residual vanishes at a Newton fixed point") {
  std::mt19937 rng(5);
  auto [m, d] = random_model(5, rng);
  Vector load = Vector::Random(5) * 0.1;
  Vector D = Vector::Zero(5);
  for (int it = 0; it < 30; ++it) {
    Vector r = eval_internal_force(m, D) - load;
    if (r.norm() < 1e-14) break;
    D -= eval_tangent_stiffness(m, D).to_dense().lu().solve(r);
  }
  ForcingSpec f{load, 1.0, 1.0, 0.0};
  auto s = m.with_forcing(f);
  // cos(0) = 1 gives the constant load
  CHECK(eval_residual(s, D, Vector::Zero(5), Vector::Zero(5), 0.0).norm() < 1e-12);
}

TEST_CASE("contract violations") {
  auto m = scalar_model();
  CHECK_THROWS_AS(eval_internal_force(m, Vector::Zero(2)), ContractViolation);
  Vector bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eval_internal_force(m, bad), ContractViolation);
  CHECK_THROWS_AS(CubicTensor(2, {{0, 2, 0, 1.0}}), ContractViolation);
  // indefinite mass
  CHECK_THROWS_AS(FullOrderModel(SparseMatrixSym(1, {{0, 0, -1.0}}, true), SparseMatrixSym(1, {}, true),
                                 SparseMatrixSym(1, {{0, 0, 1.0}}, true), CubicTensor(1), QuarticTensor(1),
                                 ForcingSpec{}),
                  ContractViolation);
}

TEST_CASE("tensor canonicalization folds duplicates and trailing order") {
  CubicTensor g(3, {{0, 2, 1, 1.0}, {0, 1, 2, 2.0}, {1, 0, 0, 1.0}, {1, 0, 0, -1.0}});
  REQUIRE(g.nnz() == 1);
  CHECK(g.entries()[0].j == 1);
  CHECK(g.entries()[0].k == 2);
  CHECK(g.entries()[0].value == 3.0);
  QuarticTensor h(2, {{1, 1, 0, 1, 1.0}, {1, 0, 1, 1, 1.0}});
  REQUIRE(h.nnz() == 1);
  CHECK(h.entries()[0].value == 2.0);
}

TEST_CASE("sparse symmetric storage keeps the upper triangle") {
  SparseMatrixSym A(3, {{1, 0, 2.0}, {0, 1, 1.0}, {2, 2, 4.0}}, true);
  CHECK(A.nnz() == 2);
  for (const auto& e : A.entries()) CHECK(e.row <= e.col);
  CHECK(A.to_dense()(1, 0) == 3.0);
  CHECK(A.to_dense()(0, 1) == 3.0);
  CHECK_THROWS_AS(SparseMatrixSym(2, {{0, 2, 1.0}}, true), ContractViolation);
}

TEST_CASE("sample-batched force and tangent agree with pointwise evaluation on both kernel paths") {
  std::mt19937 rng(19);
  auto [m, d] = random_model(7, rng);
  const auto& nl = m.nonlinear();
  const Index ns = 37;
  SampleMatrix D = SampleMatrix::Random(7, ns);
  Vector theta = Vector::Zero(ns);
  for (auto isa : {kernels::Isa::Scalar, kernels::Isa::Avx2}) {
    kernels::select(isa);
    SampleMatrix F = SampleMatrix::Zero(7, ns), S;
    nl.add_force_samples(D, theta, F);
    nl.tangent_samples(D, theta, S);
    for (Index s = 0; s < ns; ++s) {
      Vector x = D.col(s);
      Vector f = Vector::Zero(7);
      nl.add_force(x, 0.0, f);
      CHECK((F.col(s) - f).norm() <= 1e-13 * (1.0 + f.norm()));
      std::vector<double> slots(nl.pattern().size());
      nl.tangent(x, 0.0, slots.data());
      for (std::size_t k = 0; k < slots.size(); ++k) CHECK(S(static_cast<Index>(k), s) == doctest::Approx(slots[k]).epsilon(1e-13));
    }
  }
  kernels::select(kernels::cpu_has_avx2() ? kernels::Isa::Avx2 : kernels::Isa::Scalar);
}
