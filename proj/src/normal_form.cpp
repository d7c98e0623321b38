#include "thermal/normal_form.hpp"

#include <cmath>

#include "thermal/error.hpp"

namespace thermal {

namespace {

double half_square(const HamiltonianModel& model, const PhasePoint& midpoint) {
  if (!model.has_normal_form()) throw ConfigError("model is not in normal form");
  if (midpoint.dim() != 2) throw DimensionError("normal-form operations are defined for N = 1");
  return 0.5 * midpoint.coords().squaredNorm();
}

}  // namespace

PhasePoint nf_midpoint_image(const HamiltonianModel& model, const PhasePoint& midpoint, double theta) {
  const double u = half_square(model, midpoint);
  return PhasePoint(std::cosh(0.5 * theta * model.nf_d1(u)) * midpoint.coords());
}

double nf_real_action(const HamiltonianModel& model, const PhasePoint& midpoint, double t) {
  const double u = half_square(model, midpoint);
  const double angle = t * model.nf_d1(u);
  return (angle - std::sin(angle)) * u - t * model.nf_value(u);
}

double nf_thermal_action(const HamiltonianModel& model, const PhasePoint& midpoint, double theta) {
  const double u = half_square(model, midpoint);
  const double angle = theta * model.nf_d1(u);
  return (angle - std::sinh(angle)) * u - theta * model.nf_value(u);
}

double nf_jacobian(const HamiltonianModel& model, const PhasePoint& midpoint, double theta) {
  const double u = half_square(model, midpoint);
  const double half_angle = 0.5 * theta * model.nf_d1(u);
  const double c = std::cosh(half_angle);
  // X⊗X has the single nonzero eigenvalue |X|² = 2u.
  return c * (c + 0.5 * theta * model.nf_d2(u) * std::sinh(half_angle) * 2.0 * u);
}

NormalFormTrajectory nf_trajectory(const HamiltonianModel& model, const PhasePoint& midpoint, double theta) {
  return {midpoint, theta, nf_midpoint_image(model, midpoint, theta), nf_thermal_action(model, midpoint, theta),
          nf_jacobian(model, midpoint, theta)};
}

WeylSample nf_thermal_weyl(const HamiltonianModel& model, const PhasePoint& midpoint, double theta, double hbar) {
  const NormalFormTrajectory t = nf_trajectory(model, midpoint, theta);
  return {t.centre, std::exp(t.action / hbar) / std::sqrt(t.jacobian_det)};
}

}  // namespace thermal
