#pragma once

#include "romforge/common.hpp"
#include "romforge/core/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace romforge {

/// F(t) = beta * F0 * cos(omega * t + phase)
struct ForcingSpec {
  Vector F0;
  double beta = 0.0;
  double omega = 1.0;
  double phase = 0.0;

  double theta(double t) const { return omega * t + phase; }
  double scale(double t) const { return beta * std::cos(theta(t)); }
  Vector at(double t) const { return scale(t) * F0; }
  ForcingSpec with(double new_beta, double new_omega) const {
    ForcingSpec f = *this;
    f.beta = new_beta;
    f.omega = new_omega;
    return f;
  }
};

struct Observable {
  std::string name;
  Vector functional;
};

/// M A + C V + K D + f_nl(D, theta) = F(t): the common view the solvers work on.
/// Implemented by the full-order model, the reduced model and the electrostatically
/// coupled reduced model.
class DynamicSystem {
 public:
  virtual ~DynamicSystem() = default;

  virtual Index dofs() const = 0;
  virtual const SpMat& mass() const = 0;
  virtual const SpMat& damping() const = 0;
  virtual const SpMat& stiffness() const = 0;
  virtual const NonlinearTerms& nonlinear() const = 0;
  virtual const ForcingSpec& forcing() const = 0;
  virtual const std::vector<Observable>& observables() const = 0;
};

/// K D + f_nl(D, theta)
Vector internal_force(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D, double theta = 0.0);

/// Full tangent K + d f_nl / dD as a sparse matrix.
SpMat tangent_stiffness(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D, double theta = 0.0);

Matrix tangent_stiffness_dense(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D, double theta = 0.0);

/// M A + C V + internal_force(D) - F(t) for the given load.
Vector residual(const DynamicSystem& sys, const ForcingSpec& load, const Eigen::Ref<const Vector>& D,
                const Eigen::Ref<const Vector>& V, const Eigen::Ref<const Vector>& A, double t);

/// Observable values o . D for every registered observable.
Vector observe(const DynamicSystem& sys, const Eigen::Ref<const Vector>& D);

}  // namespace romforge
