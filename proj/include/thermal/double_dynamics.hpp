#pragma once

#include <iosfwd>
#include <vector>

#include "thermal/hamiltonian.hpp"
#include "thermal/phase_space.hpp"

namespace thermal {

enum class DoubleMode { Thermal, RealTime };

struct DoubleOptions {
  DoubleMode mode = DoubleMode::Thermal;
  double rtol = 1e-10;
  double atol = 1e-10;
  // |x|∞ or |y|∞ beyond this aborts with DivergenceError.
  double escape_radius = 1e6;
  // Number of evenly spaced checkpoints recorded when a sample buffer is
  // passed to integrate_double (0: only the end point).
  int checkpoints = 0;
};

struct DoubleState {
  PhasePoint x = PhasePoint::origin(1);
  Vec y;
  double s = 0.0;  // ∫ y·ẋ
  Mat T;           // ∂x/∂X
};

struct DoubleTrajectory {
  PhasePoint initial = PhasePoint::origin(1);
  double theta = 0.0;
  DoubleState final_state;
  double action = 0.0;        // s - θ H(X)
  double jacobian_det = 1.0;  // det T at θ/2
  double energy_drift = 0.0;  // max |IH(x, y) - 2H(X)|
  bool caustic_flag = false;
  int sign_crossings = 0;
};

struct TrajectorySample {
  double theta_prime;
  Vec x;
  Vec y;
  double s;
  double det_t;
};

// Integrates ẋ = ∂IH/∂y, ẏ = -∂IH/∂x from (X, 0) over [0, θ/2] together with
// the action integral and the tangent block ∂(x, y)/∂X. Thermal mode uses
// IH = 2 Re H(x + iJy/2); real-time mode uses IH = H(x - Jy/2) + H(x + Jy/2)
// and accepts negative θ. When `samples` is non-null it receives the state
// at θ' = 0 and at `checkpoints` evenly spaced points up to θ/2.
DoubleTrajectory integrate_double(const HamiltonianModel& model, const PhasePoint& midpoint, double theta,
                                  const DoubleOptions& opts = {}, std::vector<TrajectorySample>* samples = nullptr);

// Value of the double Hamiltonian for the selected mode.
double double_energy(const HamiltonianModel& model, const Vec& x, const Vec& y, DoubleMode mode);

struct ScWeylSample {
  PhasePoint centre;
  double value;         // sign · |det T|^{-1/2} exp(Sⁱ/ħ)
  double jacobian_det;  // det T
  double action;
  int sign;             // (-1)^{sign crossings}
};

ScWeylSample sc_weyl_thermal(const HamiltonianModel& model, const PhasePoint& midpoint, double theta, double hbar,
                             const DoubleOptions& opts = {});

// Integrates ż = -iJ∇H(z), z(0) = X, and returns the maximum over
// checkpoints of |Re z - x| + |-2J Im z - y| against the real thermal
// double trajectory.
double complex_consistency_check(const HamiltonianModel& model, const PhasePoint& midpoint, double theta,
                                 const DoubleOptions& opts = {}, int checkpoints = 16);

// CSV `theta_prime,p,q,y_p,y_q,s,det_T` (indexed columns for N > 1).
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& samples);

}  // namespace thermal
