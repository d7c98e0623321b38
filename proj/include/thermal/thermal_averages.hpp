#pragma once

#include <string>
#include <utility>
#include <vector>

#include "thermal/closed_form.hpp"
#include "thermal/double_dynamics.hpp"
#include "thermal/hamiltonian.hpp"
#include "thermal/quadrature.hpp"
#include "thermal/thermal_field.hpp"

namespace thermal {

enum class Method { Classical, Closed, ShortTime, MetaplecticLocal, NormalForm, DoubleSc };

Method parse_method(const std::string& name);
std::string method_name(Method method);
// Normal-form and double-sc produce values at image centres x(X) of a
// midpoint X; the others evaluate a thermal Weyl function at x directly.
bool is_midpoint_method(Method method);
// Throws ConfigError when the method does not apply to the model.
void check_method(const HamiltonianModel& model, Method method);

class Observable {
 public:
  enum class Kind {
    Identity,
    Hamiltonian,
    HamiltonianSquared,           // Weyl symbol of Ĥ² (Moyal square)
    HamiltonianSquaredClassical,  // (H(x))²
    Coherent,
    PolynomialPQ,
    MomentumPower,
    PositionPower,
    Combination,
  };

  static Observable identity();
  static Observable hamiltonian();
  static Observable hamiltonian_squared();
  static Observable hamiltonian_squared_classical();
  static Observable coherent(const PhasePoint& centre);
  static Observable polynomial(std::vector<Monomial> terms);
  static Observable momentum_power(int k, int component = 0);
  static Observable position_power(int k, int component = 0);
  static Observable linear_combination(std::vector<std::pair<double, Observable>> parts);

  // identity | H | H2 | H2_classical | coherent:p,q | p^k | q^k
  static Observable parse(const std::string& text);

  Kind kind() const { return kind_; }
  std::string name() const;
  double operator()(const HamiltonianModel& model, const PhasePoint& x, double hbar) const;

 private:
  Kind kind_ = Kind::Identity;
  PhasePoint centre_ = PhasePoint::origin(1);
  PolynomialPQ poly_;
  int power_ = 0;
  int component_ = 0;
  std::vector<std::pair<double, Observable>> parts_;
};

struct ComputeOptions {
  DoubleOptions dynamics;
  QuadratureOptions quadrature;
  double window = 40.0;  // βH ≤ βH_min + window
  int workers = 0;       // overrides quadrature.workers when > 0
  int field_mesh = 0;    // midpoint mesh per axis for field resampling (0: auto)
};

// Thermal Weyl function e^{-βH}(x) of a grid method (not normalized).
double thermal_weyl(const HamiltonianModel& model, const PhasePoint& x, const ThermalParams& params, Method method);

// Image centre and amplitude data of a midpoint method.
struct MidpointSample {
  PhasePoint centre;
  double jacobian_det;
  double action;
  int sign;
  double taper = 1.0;  // principal-branch window factor
  // taper · sign · |det|^{1/2} e^{S/ħ}: the integrand weight over X
  double weight(double hbar) const;
  // sign · |det|^{-1/2} e^{S/ħ}: the Weyl function at the centre
  double value(double hbar) const;
};

// Star-shaped region around the minimum on which the thermal double-sc map
// stays on its principal branch: along each direction, up to the first
// radius where the trajectory meets a caustic, escapes, or where the action
// stops decreasing. Unbounded for quadratic models. Weights are tapered
// smoothly to zero over the outer tenth of each radius.
class PrincipalBranch {
 public:
  PrincipalBranch(const HamiltonianModel& model, const ThermalParams& params, const DoubleOptions& opts = {},
                  int workers = 0, int directions = 128);

  bool unbounded() const { return radii_.empty(); }
  // Boundary radius in direction `angle`, interpolated between samples.
  double radius(double angle) const;
  // Window factor in [0, 1]; zero outside the branch.
  double taper(const PhasePoint& midpoint) const;
  bool contains(const PhasePoint& midpoint) const;
  const PhasePoint& origin() const { return origin_; }

 private:
  PhasePoint origin_ = PhasePoint::origin(1);
  std::vector<double> radii_;
};

MidpointSample midpoint_sample(const HamiltonianModel& model, const PhasePoint& midpoint, const ThermalParams& params,
                               Method method, const DoubleOptions& opts = {});

// As above, rejecting midpoints outside `branch` with DivergenceError.
MidpointSample midpoint_sample(const HamiltonianModel& model, const PhasePoint& midpoint, const ThermalParams& params,
                               Method method, const DoubleOptions& opts, const PrincipalBranch* branch);

struct PartitionResult {
  double z_tilde = 0.0;  // ∫ dx e^{-βH}(x)
  double z = 0.0;        // (2πħ)^{-N} z_tilde
  double error = 0.0;    // quadrature error estimate of z_tilde
  std::size_t n_diverged = 0;
  std::size_t n_points = 0;
};

PartitionResult partition_weyl(const HamiltonianModel& model, const ThermalParams& params, Method method,
                               const ComputeOptions& opts = {});

ThermalField thermal_wigner_field(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                  const GridSpec& grid, const ComputeOptions& opts = {});

struct AverageResult {
  double value = 0.0;
  double error = 0.0;
  double z_tilde = 0.0;
  std::size_t n_diverged = 0;
};

AverageResult thermal_average(const HamiltonianModel& model, const ThermalParams& params, Method method,
                              const Observable& observable, const ComputeOptions& opts = {});

// Several averages from one quadrature pass.
std::vector<AverageResult> thermal_averages(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                            const std::vector<Observable>& observables,
                                            const ComputeOptions& opts = {});

struct EnergyStats {
  double mean = 0.0;
  double variance = 0.0;
  double heat_capacity = 0.0;  // variance / (k_B T²)
  double error = 0.0;          // quadrature error estimate of the variance
  std::size_t n_diverged = 0;
};

// ⟨H²⟩ uses the Weyl symbol of Ĥ² unless `classical_square` is set or the
// method is classical.
EnergyStats energy_variance_and_heat_capacity(const HamiltonianModel& model, const ThermalParams& params,
                                              Method method, const ComputeOptions& opts = {}, double k_b = 1.0,
                                              bool classical_square = false);

// -d ln Z̃/dβ by central differences (step 1e-5 β) on a shared grid; exact
// for quadratic models, a diagnostic elsewhere.
AverageResult energy_from_partition(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                    const ComputeOptions& opts = {});

enum class DoubleBetaForm { ShortTime, Metaplectic };

DoubleBetaForm parse_double_beta_form(const std::string& name);

// Integrand of the double-β partition function at x.
double double_beta_weight(const HamiltonianModel& model, const PhasePoint& x, double hbar, double beta1,
                          double beta2, DoubleBetaForm form);

PartitionResult double_beta_partition(const HamiltonianModel& model, double hbar, double beta1, double beta2,
                                      DoubleBetaForm form, const ComputeOptions& opts = {});

// -∂ ln Z(β₁, β) / ∂β₁ at β₁ = β, central difference with step 1e-5 β.
AverageResult lopsided_energy(const HamiltonianModel& model, const ThermalParams& params, DoubleBetaForm form,
                              const ComputeOptions& opts = {});

}  // namespace thermal
