#include "thermal/thermal_averages.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "thermal/error.hpp"
#include "thermal/normal_form.hpp"
#include "thermal/parallel.hpp"

namespace thermal {

// ---- methods ---------------------------------------------------------------

Method parse_method(const std::string& name) {
  if (name == "classical") return Method::Classical;
  if (name == "closed") return Method::Closed;
  if (name == "short-time") return Method::ShortTime;
  if (name == "metaplectic-local") return Method::MetaplecticLocal;
  if (name == "normal-form") return Method::NormalForm;
  if (name == "double-sc") return Method::DoubleSc;
  throw ConfigError("unknown method '" + name +
                    "' (expected classical, closed, short-time, metaplectic-local, normal-form, double-sc)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Classical: return "classical";
    case Method::Closed: return "closed";
    case Method::ShortTime: return "short-time";
    case Method::MetaplecticLocal: return "metaplectic-local";
    case Method::NormalForm: return "normal-form";
    case Method::DoubleSc: return "double-sc";
  }
  return "?";
}

bool is_midpoint_method(Method method) { return method == Method::NormalForm || method == Method::DoubleSc; }

void check_method(const HamiltonianModel& model, Method method) {
  switch (method) {
    case Method::Closed:
      if (!model.is_quadratic()) {
        throw ConfigError("method 'closed' needs a quadratic model, got '" + model.type_name() + "'");
      }
      break;
    case Method::NormalForm:
      if (!model.has_normal_form()) {
        throw ConfigError("method 'normal-form' needs a normal_form or kerr model, got '" + model.type_name() + "'");
      }
      break;
    case Method::ShortTime:
    case Method::MetaplecticLocal:
      if (model.dof() != 1) throw ConfigError("method '" + method_name(method) + "' supports N = 1 only");
      break;
    case Method::Classical:
    case Method::DoubleSc:
      break;
  }
}

// ---- observables -----------------------------------------------------------

Observable Observable::identity() { return Observable(); }

Observable Observable::hamiltonian() {
  Observable o;
  o.kind_ = Kind::Hamiltonian;
  return o;
}

Observable Observable::hamiltonian_squared() {
  Observable o;
  o.kind_ = Kind::HamiltonianSquared;
  return o;
}

Observable Observable::hamiltonian_squared_classical() {
  Observable o;
  o.kind_ = Kind::HamiltonianSquaredClassical;
  return o;
}

Observable Observable::coherent(const PhasePoint& centre) {
  Observable o;
  o.kind_ = Kind::Coherent;
  o.centre_ = centre;
  return o;
}

Observable Observable::polynomial(std::vector<Monomial> terms) {
  Observable o;
  o.kind_ = Kind::PolynomialPQ;
  o.poly_ = PolynomialPQ(std::move(terms));
  return o;
}

Observable Observable::momentum_power(int k, int component) {
  if (k < 0 || component < 0) throw ConfigError("momentum_power needs k >= 0 and a valid component");
  Observable o;
  o.kind_ = Kind::MomentumPower;
  o.power_ = k;
  o.component_ = component;
  return o;
}

Observable Observable::position_power(int k, int component) {
  if (k < 0 || component < 0) throw ConfigError("position_power needs k >= 0 and a valid component");
  Observable o;
  o.kind_ = Kind::PositionPower;
  o.power_ = k;
  o.component_ = component;
  return o;
}

Observable Observable::linear_combination(std::vector<std::pair<double, Observable>> parts) {
  Observable o;
  o.kind_ = Kind::Combination;
  o.parts_ = std::move(parts);
  return o;
}

Observable Observable::parse(const std::string& text) {
  if (text == "identity" || text == "1") return identity();
  if (text == "H") return hamiltonian();
  if (text == "H2") return hamiltonian_squared();
  if (text == "H2_classical") return hamiltonian_squared_classical();
  auto power = [&](const std::string& rest) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(rest, &used);
      if (used == rest.size()) return k;
    } catch (const std::logic_error&) {
    }
    throw ConfigError("malformed observable power in '" + text + "'");
  };
  if (text.rfind("p^", 0) == 0) return momentum_power(power(text.substr(2)));
  if (text.rfind("q^", 0) == 0) return position_power(power(text.substr(2)));
  if (text.rfind("coherent:", 0) == 0) {
    std::stringstream ss(text.substr(9));
    std::string item;
    std::vector<double> coords;
    try {
      while (std::getline(ss, item, ',')) coords.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError("malformed coherent centre in '" + text + "'");
    }
    if (coords.empty() || coords.size() % 2 != 0) throw ConfigError("coherent centre needs 2N coordinates");
    return coherent(PhasePoint(Vec::Map(coords.data(), static_cast<Eigen::Index>(coords.size()))));
  }
  throw ConfigError("unknown observable '" + text + "' (expected identity, H, H2, H2_classical, p^k, q^k, coherent:p,q)");
}

std::string Observable::name() const {
  switch (kind_) {
    case Kind::Identity: return "identity";
    case Kind::Hamiltonian: return "H";
    case Kind::HamiltonianSquared: return "H2";
    case Kind::HamiltonianSquaredClassical: return "H2_classical";
    case Kind::Coherent: {
      std::string s = "coherent:";
      for (int k = 0; k < centre_.dim(); ++k) s += (k ? "," : "") + std::to_string(centre_[k]);
      return s;
    }
    case Kind::PolynomialPQ: return "polynomial";
    case Kind::MomentumPower: return "p^" + std::to_string(power_);
    case Kind::PositionPower: return "q^" + std::to_string(power_);
    case Kind::Combination: return "combination";
  }
  return "?";
}

double Observable::operator()(const HamiltonianModel& model, const PhasePoint& x, double hbar) const {
  switch (kind_) {
    case Kind::Identity: return 1.0;
    case Kind::Hamiltonian: return eval(model, x);
    case Kind::HamiltonianSquared: return moyal_square(model, x, hbar);
    case Kind::HamiltonianSquaredClassical: {
      const double h = eval(model, x);
      return h * h;
    }
    case Kind::Coherent: return coherent_observable(centre_, x, hbar);
    case Kind::PolynomialPQ:
      if (x.dof() != 1) throw DimensionError("polynomial observables are defined for N = 1");
      return poly_.eval(x.p(0), x.q(0));
    case Kind::MomentumPower:
      if (component_ >= x.dof()) throw DimensionError("momentum component out of range");
      return std::pow(x.p(component_), power_);
    case Kind::PositionPower:
      if (component_ >= x.dof()) throw DimensionError("position component out of range");
      return std::pow(x.q(component_), power_);
    case Kind::Combination: {
      double sum = 0.0;
      for (const auto& [c, o] : parts_) sum += c * o(model, x, hbar);
      return sum;
    }
  }
  return 0.0;
}

// ---- pointwise thermal functions ---------------------------------------------

double thermal_weyl(const HamiltonianModel& model, const PhasePoint& x, const ThermalParams& params, Method method) {
  switch (method) {
    case Method::Classical: return classical_weight(model, x, params);
    case Method::Closed: {
      if (model.kind() == ModelKind::Quadratic) return metaplectic_thermal(x, params, model.matrix());
      return metaplectic_thermal(x, params, hessian(model, PhasePoint::origin(model.dof())));
    }
    case Method::ShortTime: return short_time_thermal(model, x, params);
    case Method::MetaplecticLocal: return local_metaplectic_thermal(model, x, params);
    case Method::NormalForm:
    case Method::DoubleSc:
      break;
  }
  throw ConfigError("method '" + method_name(method) + "' is evaluated at midpoints, not at fixed centres");
}

namespace {

double finite_or_diverged(double v) {
  if (!std::isfinite(v)) throw DivergenceError("midpoint amplitude overflows");
  return v;
}

}  // namespace

double MidpointSample::weight(double hbar) const {
  return finite_or_diverged(taper * sign * std::sqrt(std::abs(jacobian_det)) * std::exp(action / hbar));
}

double MidpointSample::value(double hbar) const {
  return finite_or_diverged(sign * std::exp(action / hbar) / std::sqrt(std::abs(jacobian_det)));
}

namespace {

bool trajectory_ok(const HamiltonianModel& model, double r, double c, double s, const PhasePoint& origin,
                   const ThermalParams& params, const DoubleOptions& opts, double& action) {
  const Vec x = origin.coords() + r * Vec{{c, s}};
  try {
    const DoubleTrajectory t = integrate_double(model, PhasePoint(x), params.theta(), opts);
    action = t.action;
    return !t.caustic_flag;
  } catch (const DivergenceError&) {
    return false;
  } catch (const StiffnessError&) {
    return false;
  }
}

}  // namespace

PrincipalBranch::PrincipalBranch(const HamiltonianModel& model, const ThermalParams& params,
                                 const DoubleOptions& opts, int workers, int directions) {
  origin_ = find_minimum(model).x;
  if (model.is_quadratic()) return;
  if (model.dof() != 1) throw ConfigError("principal branch search is defined for N = 1");
  if (directions < 8) throw ConfigError("principal branch needs at least 8 directions");
  DoubleOptions thermal_opts = opts;
  thermal_opts.mode = DoubleMode::Thermal;
  const Box window = energy_window(model, params.beta(), 40.0);
  double reach = 0.0;
  for (int k = 0; k < 2; ++k) reach = std::max(reach, 0.5 * (window.hi[k] - window.lo[k]));
  const double r_min = 1e-6 * reach;
  // Weights are below e^{-βH} along the branch, so nothing beyond a few
  // window widths matters.
  const double r_max = 4.0 * reach;
  constexpr double ratio = 1.1;
  constexpr double slope_step = 1e-4;
  radii_.assign(static_cast<std::size_t>(directions), 0.0);
  parallel_for(radii_.size(), workers, [&](std::size_t a) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(a) / directions;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    // good(r): regular trajectory with the action still decreasing outward
    auto good = [&](double r) {
      double outer = 0.0, inner = 0.0;
      return trajectory_ok(model, r, c, s, origin_, params, thermal_opts, outer) &&
             trajectory_ok(model, r * (1.0 - slope_step), c, s, origin_, params, thermal_opts, inner) &&
             outer < inner;
    };
    double lo = 0.0;
    double hi = r_min;
    double prev_action = 0.0;
    bool found = false;
    for (double r = r_min; r <= r_max; r *= ratio) {
      double action = 0.0;
      const bool ok = trajectory_ok(model, r, c, s, origin_, params, thermal_opts, action);
      if (!ok || (r > r_min && action >= prev_action)) {
        hi = r;
        found = true;
        break;
      }
      prev_action = action;
      lo = r;
    }
    if (!found) {
      radii_[a] = r_max;
      return;
    }
    for (int it = 0; it < 24 && hi - lo > 1e-6 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (good(mid) ? lo : hi) = mid;
    }
    radii_[a] = lo;
  });
}

double PrincipalBranch::radius(double angle) const {
  if (radii_.empty()) return std::numeric_limits<double>::infinity();
  // Periodic Catmull-Rom interpolation.
  const int n = static_cast<int>(radii_.size());
  double u = angle / (2.0 * std::numbers::pi) * n;
  u -= n * std::floor(u / n);
  const int i = static_cast<int>(u) % n;
  const double t = u - std::floor(u);
  auto r = [&](int k) { return radii_[static_cast<std::size_t>(((k % n) + n) % n)]; };
  const double p0 = r(i - 1), p1 = r(i), p2 = r(i + 1), p3 = r(i + 2);
  const double v = p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
  return std::max(v, 0.0);
}

double PrincipalBranch::taper(const PhasePoint& midpoint) const {
  if (radii_.empty()) return 1.0;
  const double dp = midpoint.p(0) - origin_.p(0);
  const double dq = midpoint.q(0) - origin_.q(0);
  const double rho = std::hypot(dp, dq) / radius(std::atan2(dq, dp));
  constexpr double start = 0.9;
  if (!(rho > start)) return 1.0;
  if (rho >= 1.0) return 0.0;
  // C-infinity step from 1 at rho = start to 0 at rho = 1.
  const double s = (rho - start) / (1.0 - start);
  const double a = std::exp(-1.0 / (1.0 - s));
  const double b = std::exp(-1.0 / s);
  return a / (a + b);
}

bool PrincipalBranch::contains(const PhasePoint& midpoint) const { return taper(midpoint) > 0.0; }

MidpointSample midpoint_sample(const HamiltonianModel& model, const PhasePoint& midpoint, const ThermalParams& params,
                               Method method, const DoubleOptions& opts, const PrincipalBranch* branch) {
  if (method == Method::NormalForm) {
    const NormalFormTrajectory t = nf_trajectory(model, midpoint, params.theta());
    return {t.centre, t.jacobian_det, t.action, t.jacobian_det < 0.0 ? -1 : 1};
  }
  if (method == Method::DoubleSc) {
    const double taper = branch ? branch->taper(midpoint) : 1.0;
    if (taper == 0.0) throw DivergenceError("midpoint outside the principal branch");
    DoubleOptions thermal_opts = opts;
    thermal_opts.mode = DoubleMode::Thermal;
    const DoubleTrajectory t = integrate_double(model, midpoint, params.theta(), thermal_opts);
    return {t.final_state.x, t.jacobian_det, t.action, t.sign_crossings % 2 == 0 ? 1 : -1, taper};
  }
  // Grid methods: identity map.
  return {midpoint, 1.0, params.hbar() * std::log(thermal_weyl(model, midpoint, params, method)), 1};
}

MidpointSample midpoint_sample(const HamiltonianModel& model, const PhasePoint& midpoint, const ThermalParams& params,
                               Method method, const DoubleOptions& opts) {
  return midpoint_sample(model, midpoint, params, method, opts, nullptr);
}

// ---- quadrature drivers ------------------------------------------------------

namespace {

QuadratureOptions quadrature_options(const ComputeOptions& opts) {
  QuadratureOptions q = opts.quadrature;
  if (opts.workers > 0) q.workers = opts.workers;
  return q;
}

// Four-dimensional grids start coarser so that one refinement fits the
// evaluation budget.
QuadratureOptions quadrature_options(const ComputeOptions& opts, int dim) {
  QuadratureOptions q = quadrature_options(opts);
  if (dim >= 4) q.initial_points = std::min(q.initial_points, 21);
  return q;
}

// The short-time exponent grows faster than βH for non-quadratic models, so
// its integrals are confined to the thermal window.
QuadratureOptions quadrature_options(const ComputeOptions& opts, const HamiltonianModel& model, Method method) {
  QuadratureOptions q = quadrature_options(opts, model.dim());
  if (method == Method::ShortTime && !model.is_quadratic()) {
    q.expand = false;
    q.boundary_tol = 1e-6;
  }
  return q;
}

std::unique_ptr<PrincipalBranch> make_branch(const HamiltonianModel& model, const ThermalParams& params,
                                             Method method, const ComputeOptions& opts) {
  if (method != Method::DoubleSc || model.is_quadratic()) return nullptr;
  return std::make_unique<PrincipalBranch>(model, params, opts.dynamics, quadrature_options(opts).workers);
}

// Integrates [w, w·f_1(x), ..., w·f_m(x)] over the thermal window, where w
// is the thermal Weyl function (grid methods) or the midpoint weight.
QuadratureResult integrate_thermal(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                   const std::vector<std::function<double(const PhasePoint&)>>& factors,
                                   const ComputeOptions& opts) {
  check_method(model, method);
  const int d = model.dim();
  const int k = static_cast<int>(factors.size()) + 1;
  const double hbar = params.hbar();
  const auto branch = make_branch(model, params, method, opts);
  Integrand f = [&](const double* xs, double* out) {
    const PhasePoint point(Vec(Vec::Map(xs, d)));
    double w;
    PhasePoint centre = point;
    if (is_midpoint_method(method)) {
      const MidpointSample s = midpoint_sample(model, point, params, method, opts.dynamics, branch.get());
      w = s.weight(hbar);
      centre = s.centre;
    } else {
      w = thermal_weyl(model, point, params, method);
    }
    out[0] = w;
    for (int c = 1; c < k; ++c) out[c] = w == 0.0 ? 0.0 : w * factors[c - 1](centre);
  };
  return integrate_box(f, k, energy_window(model, params.beta(), opts.window), quadrature_options(opts, model, method));
}

double trace_normalisation(const HamiltonianModel& model, double hbar) {
  return std::pow(2.0 * std::numbers::pi * hbar, model.dof());
}

AverageResult ratio(const QuadratureResult& r, int component) {
  AverageResult a;
  const double z = r.values[0];
  if (z == 0.0) throw NumericalError("partition integral vanished");
  a.value = r.values[component] / z;
  a.error = (r.errors[component] + std::abs(a.value) * r.errors[0]) / std::abs(z);
  a.z_tilde = z;
  a.n_diverged = r.n_diverged;
  return a;
}

}  // namespace

PartitionResult partition_weyl(const HamiltonianModel& model, const ThermalParams& params, Method method,
                               const ComputeOptions& opts) {
  const QuadratureResult r = integrate_thermal(model, params, method, {}, opts);
  PartitionResult p;
  p.z_tilde = r.values[0];
  p.z = p.z_tilde / trace_normalisation(model, params.hbar());
  p.error = r.errors[0];
  p.n_diverged = r.n_diverged;
  p.n_points = r.n_points;
  return p;
}

std::vector<AverageResult> thermal_averages(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                            const std::vector<Observable>& observables, const ComputeOptions& opts) {
  std::vector<std::function<double(const PhasePoint&)>> factors;
  for (const auto& o : observables) {
    factors.emplace_back([&model, &o, hbar = params.hbar()](const PhasePoint& x) { return o(model, x, hbar); });
  }
  const QuadratureResult r = integrate_thermal(model, params, method, factors, opts);
  std::vector<AverageResult> out;
  for (std::size_t c = 0; c < observables.size(); ++c) out.push_back(ratio(r, static_cast<int>(c) + 1));
  return out;
}

AverageResult thermal_average(const HamiltonianModel& model, const ThermalParams& params, Method method,
                              const Observable& observable, const ComputeOptions& opts) {
  return thermal_averages(model, params, method, {observable}, opts).front();
}

EnergyStats energy_variance_and_heat_capacity(const HamiltonianModel& model, const ThermalParams& params,
                                              Method method, const ComputeOptions& opts, double k_b,
                                              bool classical_square) {
  if (!(k_b > 0.0)) throw ConfigError("k_B must be positive");
  const Observable square = classical_square || method == Method::Classical
                                ? Observable::hamiltonian_squared_classical()
                                : Observable::hamiltonian_squared();
  const auto r = thermal_averages(model, params, method, {Observable::hamiltonian(), square}, opts);
  EnergyStats s;
  s.mean = r[0].value;
  s.variance = r[1].value - r[0].value * r[0].value;
  const double beta = params.beta();
  s.heat_capacity = k_b * beta * beta * s.variance;
  s.error = r[1].error + 2.0 * std::abs(r[0].value) * r[0].error;
  s.n_diverged = r[0].n_diverged;
  return s;
}

AverageResult energy_from_partition(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                    const ComputeOptions& opts) {
  check_method(model, method);
  const double beta = params.beta();
  const double h = 1e-5 * beta;
  const ThermalParams up(beta + h, params.hbar());
  const ThermalParams down(beta - h, params.hbar());
  const int d = model.dim();
  const double hbar = params.hbar();
  const auto branch = make_branch(model, params, method, opts);
  const auto branch_up = make_branch(model, up, method, opts);
  const auto branch_down = make_branch(model, down, method, opts);
  auto weight = [&](const PhasePoint& x, const ThermalParams& p, const PrincipalBranch* b) {
    if (is_midpoint_method(method)) return midpoint_sample(model, x, p, method, opts.dynamics, b).weight(hbar);
    return thermal_weyl(model, x, p, method);
  };
  Integrand f = [&](const double* xs, double* out) {
    const PhasePoint x(Vec(Vec::Map(xs, d)));
    out[0] = weight(x, params, branch.get());
    out[1] = weight(x, up, branch_up.get());
    out[2] = weight(x, down, branch_down.get());
  };
  const QuadratureResult r =
      integrate_box(f, 3, energy_window(model, beta, opts.window), quadrature_options(opts, model, method));
  AverageResult a;
  a.value = -(std::log(r.values[1]) - std::log(r.values[2])) / (2.0 * h);
  a.error = (r.errors[1] / r.values[1] + r.errors[2] / r.values[2]) / (2.0 * h);
  a.z_tilde = r.values[0];
  a.n_diverged = r.n_diverged;
  return a;
}

// ---- double-β partition functions --------------------------------------------

DoubleBetaForm parse_double_beta_form(const std::string& name) {
  if (name == "short-time") return DoubleBetaForm::ShortTime;
  if (name == "metaplectic") return DoubleBetaForm::Metaplectic;
  throw ConfigError("unknown double-beta form '" + name + "' (expected short-time or metaplectic)");
}

double double_beta_weight(const HamiltonianModel& model, const PhasePoint& x, double hbar, double beta1,
                          double beta2, DoubleBetaForm form) {
  if (model.dof() != 1) throw ConfigError("double-beta partition functions support N = 1 only");
  const ThermalParams p2(beta2, hbar);
  if (form == DoubleBetaForm::ShortTime) {
    const Vec g = gradient(model, x);
    const Mat h = hessian(model, x);
    const double det = h.determinant();
    const double theta = p2.theta();
    const double denom = 1.0 + theta * theta * det / 8.0;
    if (!(denom > 0.0)) {
      const double param = det >= 0.0 ? 0.5 * theta * std::sqrt(det) : -0.5 * theta * std::sqrt(-det);
      throw ValidityError("short-time double-beta weight exceeded its validity", param);
    }
    const Vec xdot = apply_j(g);
    const double correction = hbar * hbar * beta2 * beta2 * beta2 / 24.0 * xdot.dot(h * xdot);
    return std::exp(-beta1 * eval(model, x) + correction) / denom;
  }
  const LocalQuadraticData local = local_quadratic_data(model, x);
  if (local.frequency.hyperbolic) {
    throw HyperbolicError("metaplectic double-beta weight needs an elliptic local Hessian", local.frequency.det);
  }
  if (local.gamma.size() == 0) {
    if (local.hessian.isZero(0.0)) return std::exp(-beta1 * eval(model, x));
    throw SingularHessianError("metaplectic double-beta weight needs an invertible Hessian", local.frequency.det);
  }
  const Vec shifted = x.coords() - local.gamma;
  const double quad = 0.5 * shifted.dot(local.hessian * shifted);
  return std::exp(-beta1 * eval(model, x) + beta2 * quad) * metaplectic_thermal(PhasePoint(shifted), p2, local.hessian);
}

namespace {

QuadratureResult integrate_double_beta(const HamiltonianModel& model, double hbar,
                                       const std::vector<std::pair<double, double>>& betas, DoubleBetaForm form,
                                       double window_beta, const ComputeOptions& opts) {
  for (const auto& [b1, b2] : betas) {
    if (!(b1 > 0.0) || !(b2 > 0.0)) throw ConfigError("beta1 and beta2 must be positive");
  }
  const int k = static_cast<int>(betas.size());
  Integrand f = [&](const double* xs, double* out) {
    const PhasePoint x{xs[0], xs[1]};
    for (int c = 0; c < k; ++c) out[c] = double_beta_weight(model, x, hbar, betas[c].first, betas[c].second, form);
  };
  const Method local = form == DoubleBetaForm::ShortTime ? Method::ShortTime : Method::MetaplecticLocal;
  return integrate_box(f, k, energy_window(model, window_beta, opts.window), quadrature_options(opts, model, local));
}

}  // namespace

PartitionResult double_beta_partition(const HamiltonianModel& model, double hbar, double beta1, double beta2,
                                      DoubleBetaForm form, const ComputeOptions& opts) {
  if (model.dof() != 1) throw ConfigError("double-beta partition functions support N = 1 only");
  if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
  const QuadratureResult r = integrate_double_beta(model, hbar, {{beta1, beta2}}, form, beta1, opts);
  PartitionResult p;
  p.z_tilde = r.values[0];
  p.z = p.z_tilde / trace_normalisation(model, hbar);
  p.error = r.errors[0];
  p.n_points = r.n_points;
  return p;
}

AverageResult lopsided_energy(const HamiltonianModel& model, const ThermalParams& params, DoubleBetaForm form,
                              const ComputeOptions& opts) {
  if (model.dof() != 1) throw ConfigError("double-beta partition functions support N = 1 only");
  const double beta = params.beta();
  const double h = 1e-5 * beta;
  const QuadratureResult r =
      integrate_double_beta(model, params.hbar(), {{beta, beta}, {beta + h, beta}, {beta - h, beta}}, form, beta, opts);
  AverageResult a;
  a.value = -(std::log(r.values[1]) - std::log(r.values[2])) / (2.0 * h);
  a.error = (r.errors[1] / r.values[1] + r.errors[2] / r.values[2]) / (2.0 * h);
  a.z_tilde = r.values[0];
  return a;
}

// ---- fields --------------------------------------------------------------------

namespace {

struct MeshNode {
  double mp = 0.0, mq = 0.0;  // midpoint
  double p = 0.0, q = 0.0;    // image centre
  double value = 0.0;       // Weyl function at the centre
  bool ok = false;
};

bool inside(const GridSpec& g, double p, double q) {
  return p > g.p_min && p < g.p_max && q > g.q_min && q < g.q_max;
}

ThermalField midpoint_field(const HamiltonianModel& model, const ThermalParams& params, Method method,
                            const GridSpec& grid, const ComputeOptions& opts, int workers) {
  if (model.dof() != 1) throw ConfigError("thermal fields are defined for N = 1");
  const Minimum min = find_minimum(model);
  const auto branch = make_branch(model, params, method, opts);
  const double cp = min.x.p(0);
  const double cq = min.x.q(0);
  auto image = [&](double p, double q, MeshNode& node) {
    try {
      const MidpointSample s = midpoint_sample(model, PhasePoint{p, q}, params, method, opts.dynamics, branch.get());
      node.mp = p;
      node.mq = q;
      node.p = s.centre.p(0);
      node.q = s.centre.q(0);
      node.value = s.value(params.hbar());
      node.ok = std::isfinite(node.value);
    } catch (const DivergenceError&) {
      node.ok = false;
    } catch (const StiffnessError&) {
      node.ok = false;
    }
  };

  // Smallest midpoint box whose boundary maps outside the target grid.
  constexpr int boundary_samples = 64;
  auto boundary_outside = [&](double s) {
    std::vector<MeshNode> nodes(4 * boundary_samples);
    parallel_for(nodes.size(), workers, [&](std::size_t i) {
      const int side = static_cast<int>(i) / boundary_samples;
      const double t = -1.0 + 2.0 * (static_cast<int>(i) % boundary_samples) / boundary_samples;
      const double a = side < 2 ? t : (side == 2 ? -1.0 : 1.0);
      const double b = side < 2 ? (side == 0 ? -1.0 : 1.0) : t;
      image(cp + s * a, cq + s * b, nodes[i]);
    });
    return std::all_of(nodes.begin(), nodes.end(),
                       [&](const MeshNode& n) { return !n.ok || !inside(grid, n.p, n.q); });
  };
  double reach = 0.0;
  for (double v : {grid.p_min - cp, grid.p_max - cp, grid.q_min - cq, grid.q_max - cq}) reach = std::max(reach, std::abs(v));
  double hi = reach;
  int doublings = 0;
  while (!boundary_outside(hi)) {
    hi *= 2.0;
    if (++doublings > 20) throw NumericalError("midpoint images do not cover the target grid");
  }
  double lo = 0.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (boundary_outside(mid) ? hi : lo) = mid;
  }
  const double s = hi;

  int m = opts.field_mesh > 0 ? opts.field_mesh : std::max({101, grid.np, grid.nq});
  if (m % 2 == 0) ++m;
  std::vector<MeshNode> mesh(static_cast<std::size_t>(m) * m);
  auto coord = [&](int i) { return -1.0 + 2.0 * i / (m - 1); };
  parallel_for(mesh.size(), workers, [&](std::size_t k) {
    const int i = static_cast<int>(k) / m;
    const int j = static_cast<int>(k) % m;
    image(cp + s * coord(i), cq + s * coord(j), mesh[k]);
  });

  // Each grid point takes its seed midpoint and the inverse affine map from
  // the covering triangle, then is polished by chord-Newton steps on the
  // midpoint map.
  struct Seed {
    double mp = 0.0, mq = 0.0;
    double a00 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0;  // d(midpoint)/d(centre)
    double value = 0.0;
  };
  std::vector<Seed> seeds(grid.size());
  std::vector<double> priority(grid.size(), std::numeric_limits<double>::infinity());
  const double dp = grid.dp();
  const double dq = grid.dq();
  auto raster = [&](const MeshNode& a, const MeshNode& b, const MeshNode& c, double prio) {
    const double det = (b.p - a.p) * (c.q - a.q) - (c.p - a.p) * (b.q - a.q);
    if (det == 0.0 || !std::isfinite(det)) return;
    // Affine inverse: X - X_a = M (x - x_a), M = [ΔX][Δx]^{-1}.
    const double i00 = (c.q - a.q) / det, i01 = -(c.p - a.p) / det;
    const double i10 = -(b.q - a.q) / det, i11 = (b.p - a.p) / det;
    const double u0 = b.mp - a.mp, u1 = c.mp - a.mp, w0 = b.mq - a.mq, w1 = c.mq - a.mq;
    const double m00 = u0 * i00 + u1 * i10, m01 = u0 * i01 + u1 * i11;
    const double m10 = w0 * i00 + w1 * i10, m11 = w0 * i01 + w1 * i11;
    const double pmin = std::min({a.p, b.p, c.p}), pmax = std::max({a.p, b.p, c.p});
    const double qmin = std::min({a.q, b.q, c.q}), qmax = std::max({a.q, b.q, c.q});
    const int i0 = std::max(0, static_cast<int>(std::ceil((pmin - grid.p_min) / dp - 1e-9)));
    const int i1 = std::min(grid.np - 1, static_cast<int>(std::floor((pmax - grid.p_min) / dp + 1e-9)));
    const int j0 = std::max(0, static_cast<int>(std::ceil((qmin - grid.q_min) / dq - 1e-9)));
    const int j1 = std::min(grid.nq - 1, static_cast<int>(std::floor((qmax - grid.q_min) / dq + 1e-9)));
    for (int i = i0; i <= i1; ++i) {
      const double p = grid.p(i);
      for (int j = j0; j <= j1; ++j) {
        const double q = grid.q(j);
        const double l1 = ((b.p - p) * (c.q - q) - (c.p - p) * (b.q - q)) / det;
        const double l2 = ((c.p - p) * (a.q - q) - (a.p - p) * (c.q - q)) / det;
        const double l3 = 1.0 - l1 - l2;
        constexpr double eps = -1e-12;
        if (l1 < eps || l2 < eps || l3 < eps) continue;
        const std::size_t k = grid.index(i, j);
        if (prio < priority[k]) {
          priority[k] = prio;
          seeds[k] = {l1 * a.mp + l2 * b.mp + l3 * c.mp,
                      l1 * a.mq + l2 * b.mq + l3 * c.mq,
                      m00,
                      m01,
                      m10,
                      m11,
                      l1 * a.value + l2 * b.value + l3 * c.value};
        }
      }
    }
  };
  for (int i = 0; i + 1 < m; ++i) {
    for (int j = 0; j + 1 < m; ++j) {
      const MeshNode& n00 = mesh[static_cast<std::size_t>(i) * m + j];
      const MeshNode& n01 = mesh[static_cast<std::size_t>(i) * m + j + 1];
      const MeshNode& n10 = mesh[static_cast<std::size_t>(i + 1) * m + j];
      const MeshNode& n11 = mesh[static_cast<std::size_t>(i + 1) * m + j + 1];
      const double xi = 0.5 * (coord(i) + coord(i + 1));
      const double xj = 0.5 * (coord(j) + coord(j + 1));
      const double prio = xi * xi + xj * xj;
      if (n00.ok && n10.ok && n11.ok) raster(n00, n10, n11, prio);
      if (n00.ok && n11.ok && n01.ok) raster(n00, n11, n01, prio);
    }
  }

  ThermalField field;
  field.grid = grid;
  field.values.assign(grid.size(), 0.0);
  const double scale = std::max({std::abs(grid.p_min), std::abs(grid.p_max), std::abs(grid.q_min),
                                 std::abs(grid.q_max), 1.0});
  parallel_for(grid.size(), workers, [&](std::size_t k) {
    if (!std::isfinite(priority[k])) return;
    Seed sd = seeds[k];
    field.values[k] = sd.value;
    const double tp = grid.p(static_cast<int>(k) / grid.nq);
    const double tq = grid.q(static_cast<int>(k) % grid.nq);
    for (int it = 0; it < 12; ++it) {
      MeshNode n;
      image(sd.mp, sd.mq, n);
      if (!n.ok) return;
      const double rp = tp - n.p, rq = tq - n.q;
      field.values[k] = n.value;
      if (std::hypot(rp, rq) <= 1e-13 * scale) return;
      sd.mp += sd.a00 * rp + sd.a01 * rq;
      sd.mq += sd.a10 * rp + sd.a11 * rq;
    }
    field.values[k] = sd.value;
  });
  return field;
}

}  // namespace

ThermalField thermal_wigner_field(const HamiltonianModel& model, const ThermalParams& params, Method method,
                                  const GridSpec& grid, const ComputeOptions& opts) {
  check_method(model, method);
  grid.validate();
  if (model.dof() != 1) throw ConfigError("thermal fields are defined for N = 1");
  const int workers = opts.workers > 0 ? opts.workers : opts.quadrature.workers;
  ThermalField field;
  if (is_midpoint_method(method)) {
    field = midpoint_field(model, params, method, grid, opts, workers);
  } else {
    field.grid = grid;
    field.values.assign(grid.size(), 0.0);
    parallel_for(grid.size(), workers, [&](std::size_t k) {
      const int i = static_cast<int>(k) / grid.nq;
      const int j = static_cast<int>(k) % grid.nq;
      field.values[k] = thermal_weyl(model, PhasePoint{grid.p(i), grid.q(j)}, params, method);
    });
  }
  const PartitionResult z = partition_weyl(model, params, method, opts);
  for (double& v : field.values) v /= z.z_tilde;
  field.method = method_name(method);
  field.beta = params.beta();
  field.hbar = params.hbar();
  field.normalized = true;
  return field;
}

}  // namespace thermal
