#include "romforge/zoo.hpp"

#include "romforge/modal.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace romforge::zoo {

FullOrderModel make_duffing(double omega0, double gamma, double Q) {
  if (!(omega0 > 0.0)) throw ContractViolation("make_duffing: omega0 must be positive");
  if (!(Q > 0.0)) throw ContractViolation("make_duffing: Q must be positive");
  SparseMatrixSym M(1, {{0, 0, 1.0}}, true);
  SparseMatrixSym K(1, {{0, 0, omega0 * omega0}}, true);
  SparseMatrixSym C(1, {{0, 0, omega0 / Q}}, true);
  std::vector<QuarticEntry> h;
  if (gamma != 0.0) h.push_back({0, 0, 0, 0, gamma});
  ForcingSpec f{Vector::Ones(1), 0.0, omega0, 0.0};
  return FullOrderModel(std::move(M), std::move(C), std::move(K), CubicTensor(1), QuarticTensor(1, std::move(h)),
                        std::move(f), {{"x", Vector::Ones(1)}});
}

FullOrderModel make_two_dof_1to2(double omega1, double detuning, double g_c, double Q) {
  if (!(omega1 > 0.0)) throw ContractViolation("make_two_dof_1to2: omega1 must be positive");
  if (!(Q > 0.0)) throw ContractViolation("make_two_dof_1to2: Q must be positive");
  const double omega2 = 2.0 * omega1 * (1.0 + detuning);
  if (!(omega2 > 0.0)) throw ContractViolation("make_two_dof_1to2: detuning makes omega2 nonpositive");
  SparseMatrixSym M = SparseMatrixSym::diagonal(Vector::Ones(2));
  Vector k(2);
  k << omega1 * omega1, omega2 * omega2;
  SparseMatrixSym K = SparseMatrixSym::diagonal(k);
  SparseMatrixSym C = M.scaled(omega1 / Q);
  std::vector<CubicEntry> g;
  if (g_c != 0.0) {
    g.push_back({0, 0, 1, g_c});  // g_c q1 q2
    g.push_back({1, 0, 0, g_c});  // g_c q1^2
  }
  Vector F0(2);
  F0 << 1.0, 0.0;
  Vector o1(2), o2(2);
  o1 << 1.0, 0.0;
  o2 << 0.0, 1.0;
  return FullOrderModel(std::move(M), std::move(C), std::move(K), CubicTensor(2, std::move(g)), QuarticTensor(2),
                        ForcingSpec{F0, 0.0, omega1, 0.0}, {{"q1", o1}, {"q2", o2}});
}

double two_dof_energy(double omega1, double detuning, double g_c, const Vector& q, const Vector& v) {
  const double omega2 = 2.0 * omega1 * (1.0 + detuning);
  const double e1 = 0.5 * v[0] * v[0] + 0.5 * omega1 * omega1 * q[0] * q[0];
  const double e2 = 0.5 * v[1] * v[1] + 0.5 * omega2 * omega2 * q[1] * q[1];
  return e1 + 0.5 * e2 + 0.5 * g_c * q[0] * q[0] * q[1];
}

BeamLayout beam_layout(const BeamSpec& spec) {
  if (spec.elements < 2) throw ContractViolation("beam: at least two elements are required");
  BeamLayout layout;
  layout.nodes = spec.elements - 1;
  layout.element_length = spec.length / static_cast<double>(spec.elements);
  for (Index a = 0; a < layout.nodes; ++a) {
    layout.x.push_back(static_cast<double>(a + 1) * layout.element_length);
    layout.axial_dofs.push_back(3 * a);
    layout.transverse_dofs.push_back(3 * a + 1);
    layout.rotation_dofs.push_back(3 * a + 2);
  }
  return layout;
}

double clamped_clamped_omega1(const BeamSpec& spec) {
  const double A = spec.width * spec.height;
  const double I = spec.width * std::pow(spec.height, 3) / 12.0;
  const double beta_l = 4.730040744862704;
  return beta_l * beta_l * std::sqrt(spec.young * I / (spec.density * A * std::pow(spec.length, 4)));
}

namespace {

// Five-point Gauss-Legendre on [0, 1]; exact for the degree-8 products of the
// quartic energy term.
constexpr std::array<double, 5> kGaussX{0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842,
                                        0.953089922969332};
constexpr std::array<double, 5> kGaussW{0.118463442528095, 0.239314335249683, 0.284444444444444, 0.239314335249683,
                                        0.118463442528095};

using Local = std::array<double, 6>;  // [u1, w1, t1, u2, w2, t2]

struct ElementOps {
  Local u{};   // u
  Local w{};   // w
  Local du{};  // u'
  Local dw{};  // w'
  Local d2w{}; // w''
};

ElementOps shape_ops(double xi, double h) {
  ElementOps op;
  op.u = {1.0 - xi, 0, 0, xi, 0, 0};
  op.du = {-1.0 / h, 0, 0, 1.0 / h, 0, 0};
  const double xi2 = xi * xi, xi3 = xi2 * xi;
  op.w = {0, 1 - 3 * xi2 + 2 * xi3, h * (xi - 2 * xi2 + xi3), 0, 3 * xi2 - 2 * xi3, h * (-xi2 + xi3)};
  op.dw = {0, (-6 * xi + 6 * xi2) / h, 1 - 4 * xi + 3 * xi2, 0, (6 * xi - 6 * xi2) / h, -2 * xi + 3 * xi2};
  op.d2w = {0, (-6 + 12 * xi) / (h * h), (-4 + 6 * xi) / h, 0, (6 - 12 * xi) / (h * h), (-2 + 6 * xi) / h};
  return op;
}

}  // namespace

FullOrderModel make_vk_beam(const BeamSpec& spec) {
  if (!(spec.length > 0 && spec.width > 0 && spec.height > 0 && spec.young > 0 && spec.density > 0)) {
    throw ContractViolation("make_vk_beam: dimensions and material constants must be positive");
  }
  if (!(spec.quality_factor > 0)) throw ContractViolation("make_vk_beam: quality factor must be positive");
  const BeamLayout layout = beam_layout(spec);
  const Index n = 3 * layout.nodes;
  const double h = layout.element_length;
  const double A = spec.width * spec.height;
  const double I = spec.width * std::pow(spec.height, 3) / 12.0;
  const double EA = spec.young * A, EI = spec.young * I, rhoA = spec.density * A;
  const double pi = std::numbers::pi;

  std::vector<MatrixEntry> m_entries, k_entries;
  std::vector<CubicEntry> g_entries;
  std::vector<QuarticEntry> h_entries;

  for (Index e = 0; e < spec.elements; ++e) {
    // Global dof of each local dof, -1 when clamped.
    std::array<Index, 6> dof{};
    for (int a = 0; a < 2; ++a) {
      const Index node = e + a;  // 0 .. elements
      for (int c = 0; c < 3; ++c) dof[3 * a + c] = (node == 0 || node == spec.elements) ? -1 : 3 * (node - 1) + c;
    }
    double Me[6][6] = {}, Ke[6][6] = {};
    double Ge[6][6][6] = {};
    double He[6][6][6][6] = {};
    for (std::size_t g = 0; g < kGaussX.size(); ++g) {
      const double xi = kGaussX[g];
      const double wgt = kGaussW[g] * h;
      const double x = (static_cast<double>(e) + xi) * h;
      const double dw0 = spec.rise * pi / spec.length * std::sin(2.0 * pi * x / spec.length);
      const ElementOps op = shape_ops(xi, h);
      Local a{};  // linear membrane strain operator u' + w0' w'
      for (int i = 0; i < 6; ++i) a[i] = op.du[i] + dw0 * op.dw[i];
      const Local& b = op.dw;
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          Me[i][j] += wgt * rhoA * (op.u[i] * op.u[j] + op.w[i] * op.w[j]);
          Ke[i][j] += wgt * (EA * a[i] * a[j] + EI * op.d2w[i] * op.d2w[j]);
          for (int k = 0; k < 6; ++k) {
            Ge[i][j][k] += wgt * 0.5 * EA * (a[i] * b[j] * b[k] + b[i] * a[j] * b[k] + b[i] * b[j] * a[k]);
            if (b[i] == 0.0 || b[j] == 0.0 || b[k] == 0.0) continue;
            for (int l = 0; l < 6; ++l) He[i][j][k][l] += wgt * 0.5 * EA * b[i] * b[j] * b[k] * b[l];
          }
        }
      }
    }
    for (int i = 0; i < 6; ++i) {
      if (dof[i] < 0) continue;
      for (int j = 0; j < 6; ++j) {
        if (dof[j] < 0) continue;
        if (dof[i] <= dof[j]) {
          m_entries.push_back({dof[i], dof[j], Me[i][j]});
          k_entries.push_back({dof[i], dof[j], Ke[i][j]});
        }
        for (int k = 0; k < 6; ++k) {
          if (dof[k] < 0) continue;
          if (Ge[i][j][k] != 0.0) g_entries.push_back({dof[i], dof[j], dof[k], Ge[i][j][k]});
          for (int l = 0; l < 6; ++l) {
            if (dof[l] < 0 || He[i][j][k][l] == 0.0) continue;
            h_entries.push_back({dof[i], dof[j], dof[k], dof[l], He[i][j][k][l]});
          }
        }
      }
    }
  }

  // Midspan deflection via the Hermite interpolant of the element containing L/2.
  Vector w_mid = Vector::Zero(n);
  {
    const double xm = 0.5 * spec.length;
    Index e = std::min<Index>(static_cast<Index>(std::floor(xm / h)), spec.elements - 1);
    const double xi = xm / h - static_cast<double>(e);
    const ElementOps op = shape_ops(xi, h);
    for (int a = 0; a < 2; ++a) {
      const Index node = e + a;
      if (node == 0 || node == spec.elements) continue;
      for (int c = 0; c < 3; ++c) w_mid[3 * (node - 1) + c] += op.w[3 * a + c];
    }
  }

  SparseMatrixSym M(n, std::move(m_entries), true);
  SparseMatrixSym K(n, std::move(k_entries), true);
  CubicTensor G(n, std::move(g_entries));
  QuarticTensor H(n, std::move(h_entries));
  FullOrderModel undamped(M, SparseMatrixSym(n, {}, true), K, G, H, ForcingSpec{Vector::Zero(n), 0.0, 1.0, 0.0},
                          {{"w_mid", w_mid}});
  const auto modes = solve_eigs(undamped, 1);
  const EigenPair& first = modes.front();
  if (!(first.omega > 0.0)) throw ContractViolation("make_vk_beam: singular stiffness (degenerate geometry)");
  Vector F0 = M.multiply(first.shape);
  return FullOrderModel(M, M.scaled(first.omega / spec.quality_factor), K, G, H,
                        ForcingSpec{std::move(F0), 0.0, first.omega, 0.0}, {{"w_mid", w_mid}});
}

}  // namespace romforge::zoo
