#pragma once

#include "thermal/hamiltonian.hpp"

namespace thermal {

// Thermal pair of half-trajectories of a normal-form Hamiltonian
// H = F(X²/2), parametrised by the midpoint X.
struct NormalFormTrajectory {
  PhasePoint midpoint;
  double theta;
  PhasePoint centre;    // x(X) = cosh(θF'/2) X
  double action;        // Sⁱ_θ
  double jacobian_det;  // det ∂x/∂X
};

// cosh(θ F'(X²/2) / 2) · X
PhasePoint nf_midpoint_image(const HamiltonianModel& model, const PhasePoint& midpoint, double theta);

// Real-time centre action: [tF' - sin(tF')] X²/2 - t F(X²/2).
double nf_real_action(const HamiltonianModel& model, const PhasePoint& midpoint, double t);

// Thermal action: [θF' - sinh(θF')] X²/2 - θ F(X²/2).
double nf_thermal_action(const HamiltonianModel& model, const PhasePoint& midpoint, double theta);

// det[c I + (θF''/2) sinh(θF'/2) X⊗X], c = cosh(θF'/2).
double nf_jacobian(const HamiltonianModel& model, const PhasePoint& midpoint, double theta);

NormalFormTrajectory nf_trajectory(const HamiltonianModel& model, const PhasePoint& midpoint, double theta);

struct WeylSample {
  PhasePoint centre;
  double value;
};

// Thermal Weyl function reported at the image centre:
// value = jacobian^{-1/2} exp(Sⁱ/ħ).
WeylSample nf_thermal_weyl(const HamiltonianModel& model, const PhasePoint& midpoint, double theta, double hbar);

}  // namespace thermal
