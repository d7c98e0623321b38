#include "thermal/closed_form.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "thermal/error.hpp"

namespace thermal {

ThermalParams::ThermalParams(double beta, double hbar) : beta_(beta), hbar_(hbar), theta_(hbar * beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive and finite");
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ConfigError("hbar must be positive and finite");
}

ThermalParams ThermalParams::from_theta(double theta, double hbar) { return ThermalParams(theta / hbar, hbar); }

double classical_weight(const HamiltonianModel& model, const PhasePoint& x, const ThermalParams& params) {
  return std::exp(-params.beta() * eval(model, x));
}

double ho_thermal(const PhasePoint& x, const ThermalParams& params, double omega) {
  if (x.dof() != 1) throw DimensionError("ho_thermal is defined for N = 1");
  const double a = 0.5 * omega * params.theta();
  const double r2 = x.coords().squaredNorm();
  return std::exp(-std::tanh(a) * r2 / params.hbar()) / std::cosh(a);
}

namespace {

// tanh(Ωθ/2)/Ω, continued smoothly through Ω → 0.
double tanh_over_omega(double omega, double theta) {
  const double a = 0.5 * omega * theta;
  if (std::abs(a) < 1e-6) {
    const double a2 = a * a;
    return 0.5 * theta * (1.0 - a2 / 3.0 + 2.0 * a2 * a2 / 15.0);
  }
  return std::tanh(a) / omega;
}

double metaplectic_plane(double p, double q, double hpp, double hpq, double hqq, const ThermalParams& params) {
  const double det = hpp * hqq - hpq * hpq;
  if (det < 0.0) {
    throw HyperbolicError("metaplectic thermal form needs Ω² = det H > 0 (hyperbolic quadratic)", det);
  }
  if (hpp + hqq < 0.0) {
    throw HyperbolicError("metaplectic thermal form needs a positive quadratic form", det);
  }
  const double omega = std::sqrt(det);
  const double form = hpp * p * p + 2.0 * hpq * p * q + hqq * q * q;
  return std::exp(-tanh_over_omega(omega, params.theta()) * form / params.hbar()) /
         std::cosh(0.5 * omega * params.theta());
}

}  // namespace

double metaplectic_thermal(const PhasePoint& x, const ThermalParams& params, const Mat& h) {
  const int n = x.dof();
  if (h.rows() != 2 * n || h.cols() != 2 * n) throw DimensionError("metaplectic_thermal: matrix dimension mismatch");
  for (int r = 0; r < 2 * n; ++r) {
    for (int c = 0; c < 2 * n; ++c) {
      if (r % n != c % n && h(r, c) != 0.0) {
        throw ConfigError("metaplectic_thermal for N > 1 needs H block-diagonal in the (p_k, q_k) planes");
      }
    }
  }
  double value = 1.0;
  for (int k = 0; k < n; ++k) {
    value *= metaplectic_plane(x.p(k), x.q(k), h(k, k), h(k, n + k), h(n + k, n + k), params);
  }
  return value;
}

double short_time_thermal(const HamiltonianModel& model, const PhasePoint& x, const ThermalParams& params) {
  if (model.dof() != 1) throw ConfigError("short_time_thermal supports N = 1 only");
  const Vec g = gradient(model, x);
  const Mat h = hessian(model, x);
  const double det = h.determinant();
  const double theta = params.theta();
  const double denom = 1.0 + theta * theta * det / 8.0;
  if (!(denom > 0.0)) {
    const double param = det >= 0.0 ? 0.5 * theta * std::sqrt(det) : -0.5 * theta * std::sqrt(-det);
    throw ValidityError("short-time approximation exceeded its validity (ħβΩ_x/2 = " + std::to_string(param) + ")",
                        param);
  }
  const Vec xdot = apply_j(g);
  const double beta = params.beta();
  const double correction = params.hbar() * params.hbar() * beta * beta * beta / 24.0 * xdot.dot(h * xdot);
  return std::exp(-beta * eval(model, x) + correction) / denom;
}

double local_metaplectic_thermal(const HamiltonianModel& model, const PhasePoint& x,
                                 const ThermalParams& params) {
  if (model.dof() != 1) throw ConfigError("local_metaplectic_thermal supports N = 1 only");
  const LocalQuadraticData local = local_quadratic_data(model, x);
  if (local.frequency.hyperbolic) {
    throw HyperbolicError("local metaplectic form needs an elliptic local Hessian", local.frequency.det);
  }
  // A vanishing Hessian leaves no quadratic part: the form reduces to e^{-βH}.
  if (local.hessian.isZero(0.0)) return classical_weight(model, x, params);
  if (local.gamma.size() == 0 || local.frequency.det <= 0.0) {
    throw SingularHessianError("local metaplectic form needs an invertible local Hessian", local.frequency.det);
  }
  const Vec shifted = x.coords() - local.gamma;
  const double quad = 0.5 * shifted.dot(local.hessian * shifted);
  const double attenuation = params.beta() * (eval(model, x) - quad);
  return std::exp(-attenuation) * metaplectic_thermal(PhasePoint(shifted), params, local.hessian);
}

double laguerre(int j, double t) {
  if (j < 0 || j > 200) throw ConfigError("Laguerre index must be in [0, 200], got " + std::to_string(j));
  double prev = 1.0;
  if (j == 0) return prev;
  double cur = 1.0 - t;
  for (int k = 1; k < j; ++k) {
    const double next = ((2.0 * k + 1.0 - t) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double fock_wigner(int j, const PhasePoint& x, double hbar) {
  if (x.dof() != 1) throw DimensionError("fock_wigner is defined for N = 1");
  const double r2 = x.coords().squaredNorm();
  const double sign = j % 2 == 0 ? 1.0 : -1.0;
  return sign / (std::numbers::pi * hbar) * std::exp(-r2 / hbar) * laguerre(j, 2.0 * r2 / hbar);
}

double coherent_observable(const PhasePoint& centre, const PhasePoint& x, double hbar) {
  if (centre.dim() != x.dim()) throw DimensionError("coherent_observable: dimension mismatch");
  return std::pow(2.0, x.dof()) * std::exp(-(x.coords() - centre.coords()).squaredNorm() / hbar);
}

}  // namespace thermal
