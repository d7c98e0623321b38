#pragma once

#include "thermal/hamiltonian.hpp"
#include "thermal/phase_space.hpp"

namespace thermal {

// Inverse temperature β and ħ; θ = ħβ is the thermal time.
class ThermalParams {
 public:
  ThermalParams(double beta, double hbar);
  static ThermalParams from_theta(double theta, double hbar);

  double beta() const { return beta_; }
  double hbar() const { return hbar_; }
  double theta() const { return theta_; }

 private:
  double beta_;
  double hbar_;
  double theta_;
};

// exp(-βH(x))
double classical_weight(const HamiltonianModel& model, const PhasePoint& x, const ThermalParams& params);

// Exact Weyl symbol of exp(-βĤ) for H = (ω/2)(p² + q²).
double ho_thermal(const PhasePoint& x, const ThermalParams& params, double omega);

// Exact Weyl symbol of exp(-βĤ) for H = ½ x·Hx with H positive (semi)definite:
//   (1/cosh(Ωθ/2)) exp(-tanh(Ωθ/2) x·Hx / (ħΩ)),  Ω² = det H.
// N > 1 is accepted when H is block-diagonal in the (p_k, q_k) planes; the
// result is then the product of the per-plane forms. Throws HyperbolicError
// when Ω² < 0.
double metaplectic_thermal(const PhasePoint& x, const ThermalParams& params, const Mat& h);

// Short-time approximation built on the local quadratic expansion of H:
//   exp[-βH + (ħ²β³/24) ẋ·H_x ẋ] / (1 + ħ²β² det H_x / 8),  ẋ = J∇H.
// Valid for elliptic and hyperbolic local Hessians while the prefactor
// denominator stays positive; otherwise throws ValidityError.
double short_time_thermal(const HamiltonianModel& model, const PhasePoint& x, const ThermalParams& params);

// Metaplectic form displaced to the local centre of curvature and attenuated
// by exp(-β[H(x) - ½(x-γ)·H_x(x-γ)]). Requires an elliptic local Hessian.
double local_metaplectic_thermal(const HamiltonianModel& model, const PhasePoint& x,
                                 const ThermalParams& params);

// L_j(t) by the three-term recurrence, j <= 200.
double laguerre(int j, double t);

// Wigner function of the j-th Fock state of (p² + q²)/2.
double fock_wigner(int j, const PhasePoint& x, double hbar);

// O(x) = 2^N exp(-(x - X)²/ħ); its thermal average is the probability of
// the coherent state centred on X.
double coherent_observable(const PhasePoint& centre, const PhasePoint& x, double hbar);

}  // namespace thermal
