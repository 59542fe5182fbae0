#pragma once

// Desk-scale model generators. Unit system for the beam: micrometre, microsecond,
// micronewton, nanogram (so pressures are MPa and densities ng/um^3).

#include "romforge/core/model.hpp"

#include <vector>

namespace romforge::zoo {

/// x'' + (w0/Q) x' + w0^2 x + gamma x^3 = beta cos(omega t)
FullOrderModel make_duffing(double omega0, double gamma, double Q);

/// Two modes with w2 = 2 w1 (1 + detuning) and quadratic coupling forces
/// (g_c q1 q2, g_c q1^2); mass-proportional damping referenced to w1; load on mode 1.
FullOrderModel make_two_dof_1to2(double omega1, double detuning, double g_c, double Q);

/// Weighted energy conserved by the undamped, unforced two-DOF model:
/// q1'^2/2 + w1^2 q1^2/2 + (q2'^2/2 + w2^2 q2^2/2)/2 + g_c q1^2 q2 / 2.
double two_dof_energy(double omega1, double detuning, double g_c, const Vector& q, const Vector& v);

struct BeamSpec {
  double length = 1000.0;        ///< um
  double width = 24.0;           ///< out-of-plane dimension B, um
  double height = 10.0;          ///< in-plane (bending) dimension, um
  Index elements = 40;           ///< n_e >= 2
  double young = 167000.0;       ///< MPa
  double density = 2.33e-3;      ///< ng/um^3 (2330 kg/m^3)
  double rise = 0.0;             ///< arch rise, um; 0 gives the straight beam
  double quality_factor = 50.0;  ///< Q of the mass-proportional damping (omega0 = first eigenfrequency)
};

/// Node-level description of the assembled beam (clamped end nodes removed).
struct BeamLayout {
  Index nodes = 0;                    ///< interior nodes
  std::vector<double> x;              ///< interior node abscissae
  std::vector<Index> axial_dofs;      ///< u dof per interior node
  std::vector<Index> transverse_dofs; ///< w dof per interior node
  std::vector<Index> rotation_dofs;   ///< w' dof per interior node
  double element_length = 0.0;
};

BeamLayout beam_layout(const BeamSpec& spec);

/// Planar beam with von Karman axial-transverse coupling on a shallow initial
/// shape w0(x) = rise (1 - cos(2 pi x / L)) / 2. Linear u, cubic Hermite w,
/// consistent mass, clamped ends. Forcing defaults to F0 = M phi_1 with beta = 0,
/// damping is (omega_1 / Q) M and the midspan deflection is registered as "w_mid".
FullOrderModel make_vk_beam(const BeamSpec& spec);

/// Analytic first eigenfrequency (rad/time) of the straight clamped-clamped
/// Euler-Bernoulli beam.
double clamped_clamped_omega1(const BeamSpec& spec);

}  // namespace romforge::zoo
