#include "thermal/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <utility>

#include "thermal/error.hpp"

namespace thermal {

// ---- PolynomialPQ ----------------------------------------------------------

PolynomialPQ::PolynomialPQ(std::vector<Monomial> terms) {
  std::map<std::pair<int, int>, double> merged;
  for (const auto& m : terms) {
    if (m.p_power < 0 || m.q_power < 0) throw ConfigError("negative exponent in polynomial term");
    if (!std::isfinite(m.coeff)) throw ConfigError("non-finite polynomial coefficient");
    merged[{m.p_power, m.q_power}] += m.coeff;
  }
  for (const auto& [key, c] : merged) {
    if (c == 0.0) continue;
    terms_.push_back({c, key.first, key.second});
    degree_ = std::max(degree_, key.first + key.second);
    max_p_ = std::max(max_p_, key.first);
    max_q_ = std::max(max_q_, key.second);
  }
}

double PolynomialPQ::partial(int a, int b, double p, double q) const {
  double sum = 0.0;
  for (const auto& m : terms_) {
    if (m.p_power < a || m.q_power < b) continue;
    double c = m.coeff;
    for (int k = 0; k < a; ++k) c *= m.p_power - k;
    for (int k = 0; k < b; ++k) c *= m.q_power - k;
    sum += c * std::pow(p, m.p_power - a) * std::pow(q, m.q_power - b);
  }
  return sum;
}

PolynomialPQ PolynomialPQ::operator+(const PolynomialPQ& other) const {
  std::vector<Monomial> all = terms_;
  all.insert(all.end(), other.terms_.begin(), other.terms_.end());
  return PolynomialPQ(std::move(all));
}

PolynomialPQ PolynomialPQ::operator*(const PolynomialPQ& other) const {
  std::vector<Monomial> all;
  all.reserve(terms_.size() * other.terms_.size());
  for (const auto& a : terms_) {
    for (const auto& b : other.terms_) {
      all.push_back({a.coeff * b.coeff, a.p_power + b.p_power, a.q_power + b.q_power});
    }
  }
  return PolynomialPQ(std::move(all));
}

PolynomialPQ PolynomialPQ::scaled(double factor) const {
  std::vector<Monomial> all = terms_;
  for (auto& m : all) m.coeff *= factor;
  return PolynomialPQ(std::move(all));
}

// ---- construction ----------------------------------------------------------

namespace {

// u = (p² + q²)/2
PolynomialPQ u_polynomial() { return PolynomialPQ({{0.5, 2, 0}, {0.5, 0, 2}}); }

PolynomialPQ expand_normal_form(const std::vector<double>& coeffs) {
  const PolynomialPQ u = u_polynomial();
  PolynomialPQ power = u;
  PolynomialPQ sum;
  for (double c : coeffs) {
    sum = sum + power.scaled(c);
    power = power * u;
  }
  return sum;
}

}  // namespace

HamiltonianModel HamiltonianModel::quadratic(Mat h) {
  if (h.rows() != h.cols() || h.rows() == 0 || h.rows() % 2 != 0) {
    throw ConfigError("quadratic model needs a square 2N×2N matrix");
  }
  if (!h.allFinite()) throw ConfigError("quadratic matrix has non-finite entries");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError("quadratic matrix must be symmetric");
  }
  HamiltonianModel m;
  m.kind_ = ModelKind::Quadratic;
  m.dof_ = static_cast<int>(h.rows() / 2);
  m.matrix_ = 0.5 * (h + h.transpose());
  if (m.dof_ == 1) {
    const Mat& a = m.matrix_;
    m.poly_ = PolynomialPQ({{0.5 * a(0, 0), 2, 0}, {a(0, 1), 1, 1}, {0.5 * a(1, 1), 0, 2}});
  }
  return m;
}

HamiltonianModel HamiltonianModel::harmonic(double omega) {
  return quadratic(omega * Mat::Identity(2, 2));
}

HamiltonianModel HamiltonianModel::normal_form(std::vector<double> coeffs) {
  if (coeffs.empty()) throw ConfigError("normal form needs at least one coefficient");
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw ConfigError("non-finite normal-form coefficient");
  }
  if (coeffs[0] < 0.0) throw ConfigError("normal form frequency ω must be non-negative");
  if (coeffs[0] == 0.0) {
    const bool positive_higher = std::any_of(coeffs.begin() + 1, coeffs.end(), [](double c) { return c > 0.0; });
    if (!positive_higher) throw ConfigError("normal form with ω = 0 needs a positive higher coefficient");
  }
  HamiltonianModel m;
  m.kind_ = ModelKind::NormalForm;
  m.dof_ = 1;
  m.poly_ = expand_normal_form(coeffs);
  m.nf_coeffs_ = std::move(coeffs);
  return m;
}

HamiltonianModel HamiltonianModel::kerr(double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("Kerr ω must be positive");
  HamiltonianModel m = normal_form({0.0, omega * omega});
  m.kind_ = ModelKind::Kerr;
  m.kerr_omega_ = omega;
  return m;
}

HamiltonianModel HamiltonianModel::polynomial(std::vector<Monomial> terms) {
  HamiltonianModel m;
  m.kind_ = ModelKind::PolynomialPQ;
  m.dof_ = 1;
  m.poly_ = PolynomialPQ(std::move(terms));
  if (m.poly_.terms().empty()) throw ConfigError("polynomial model has no terms");
  return m;
}

HamiltonianModel HamiltonianModel::from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ConfigError("model must be a JSON object");
    const std::string type = j.at("type").get<std::string>();
    const int dof = j.value("dof", 1);
    if (dof < 1) throw ConfigError("dof must be >= 1");
    if (type != "quadratic" && dof != 1) throw ConfigError("model type '" + type + "' supports dof = 1 only");
    if (type == "quadratic") {
      const int n = 2 * dof;
      std::vector<double> flat;
      for (const auto& row : j.at("matrix")) {
        if (row.is_array()) {
          for (const auto& v : row) flat.push_back(v.get<double>());
        } else {
          flat.push_back(row.get<double>());
        }
      }
      if (static_cast<int>(flat.size()) != n * n) {
        throw ConfigError("quadratic matrix needs " + std::to_string(n * n) + " entries");
      }
      Mat h(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) h(r, c) = flat[static_cast<std::size_t>(r * n + c)];
      return quadratic(h);
    }
    if (type == "normal_form") return normal_form(j.at("coeffs").get<std::vector<double>>());
    if (type == "kerr") return kerr(j.at("omega").get<double>());
    if (type == "polynomial_pq") {
      std::vector<Monomial> terms;
      for (const auto& t : j.at("terms")) {
        if (!t.is_array() || t.size() != 3) throw ConfigError("polynomial term must be [c, i, j]");
        terms.push_back({t[0].get<double>(), t[1].get<int>(), t[2].get<int>()});
      }
      return polynomial(std::move(terms));
    }
    throw ConfigError("unknown model type '" + type + "' (only polynomial models are supported)");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model JSON: ") + e.what());
  }
}

HamiltonianModel HamiltonianModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse model file '" + path + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::json HamiltonianModel::to_json() const {
  nlohmann::json j;
  j["type"] = type_name();
  j["dof"] = dof_;
  switch (kind_) {
    case ModelKind::Quadratic: {
      std::vector<double> flat;
      for (int r = 0; r < matrix_.rows(); ++r)
        for (int c = 0; c < matrix_.cols(); ++c) flat.push_back(matrix_(r, c));
      j["matrix"] = flat;
      break;
    }
    case ModelKind::NormalForm:
      j["coeffs"] = nf_coeffs_;
      break;
    case ModelKind::Kerr:
      j["omega"] = kerr_omega_;
      break;
    case ModelKind::PolynomialPQ: {
      nlohmann::json terms = nlohmann::json::array();
      for (const auto& m : poly_.terms()) terms.push_back({m.coeff, m.p_power, m.q_power});
      j["terms"] = terms;
      break;
    }
  }
  return j;
}

std::string HamiltonianModel::type_name() const {
  switch (kind_) {
    case ModelKind::Quadratic: return "quadratic";
    case ModelKind::NormalForm: return "normal_form";
    case ModelKind::Kerr: return "kerr";
    case ModelKind::PolynomialPQ: return "polynomial_pq";
  }
  return "unknown";
}

bool HamiltonianModel::is_quadratic() const {
  if (kind_ == ModelKind::Quadratic) return true;
  return std::all_of(poly_.terms().begin(), poly_.terms().end(),
                     [](const Monomial& m) { return m.p_power + m.q_power == 2; });
}

double HamiltonianModel::nf_value(double u) const {
  double sum = 0.0;
  double power = u;
  for (double c : nf_coeffs_) {
    sum += c * power;
    power *= u;
  }
  return sum;
}

double HamiltonianModel::nf_d1(double u) const {
  double sum = 0.0;
  double power = 1.0;
  for (std::size_t k = 0; k < nf_coeffs_.size(); ++k) {
    sum += static_cast<double>(k + 1) * nf_coeffs_[k] * power;
    power *= u;
  }
  return sum;
}

double HamiltonianModel::nf_d2(double u) const {
  double sum = 0.0;
  double power = 1.0;
  for (std::size_t k = 1; k < nf_coeffs_.size(); ++k) {
    sum += static_cast<double>((k + 1) * k) * nf_coeffs_[k] * power;
    power *= u;
  }
  return sum;
}

void HamiltonianModel::check_dims(Eigen::Index n) const {
  if (n != dim()) {
    throw DimensionError("model has dimension " + std::to_string(dim()) + ", argument has " + std::to_string(n));
  }
}

// ---- evaluation -------------------------------------------------------------

namespace {

template <class T>
void quadratic_jet(const Mat& h, const T* x, T& value, T* grad, T* hess) {
  const auto n = h.rows();
  value = T(0);
  for (Eigen::Index r = 0; r < n; ++r) {
    T g(0);
    for (Eigen::Index c = 0; c < n; ++c) {
      g += h(r, c) * x[c];
      if (hess) hess[r * n + c] = T(h(r, c));
    }
    if (grad) grad[r] = g;
    value += 0.5 * x[r] * g;
  }
}

template <class T>
void poly_jet(const PolynomialPQ& poly, const T* x, T& value, T* grad, T* hess) {
  std::array<T, 2> g;
  std::array<T, 3> h;
  poly.jet(x[0], x[1], value, g, h);
  if (grad) {
    grad[0] = g[0];
    grad[1] = g[1];
  }
  if (hess) {
    hess[0] = h[0];
    hess[1] = h[1];
    hess[2] = h[1];
    hess[3] = h[2];
  }
}

}  // namespace

void HamiltonianModel::real_jet(const double* x, double& value, double* grad, double* hess) const {
  if (dof_ == 1) {
    poly_jet(poly_, x, value, grad, hess);
  } else {
    quadratic_jet(matrix_, x, value, grad, hess);
  }
}

void HamiltonianModel::complex_jet(const Complex* z, Complex& value, Complex* grad, Complex* hess) const {
  if (dof_ == 1) {
    poly_jet(poly_, z, value, grad, hess);
  } else {
    quadratic_jet(matrix_, z, value, grad, hess);
  }
}

double eval(const HamiltonianModel& model, const PhasePoint& x) {
  model.check_dims(x.dim());
  double v = 0.0;
  model.real_jet(x.coords().data(), v, nullptr, nullptr);
  return v;
}

Complex eval_complex(const HamiltonianModel& model, const CVec& z) {
  model.check_dims(z.size());
  Complex v;
  model.complex_jet(z.data(), v, nullptr, nullptr);
  return v;
}

Vec gradient(const HamiltonianModel& model, const PhasePoint& x) {
  Vec g(x.dim());
  double v = 0.0;
  if (x.dim() != model.dim()) throw DimensionError("gradient: dimension mismatch");
  model.real_jet(x.coords().data(), v, g.data(), nullptr);
  return g;
}

Mat hessian(const HamiltonianModel& model, const PhasePoint& x) {
  if (x.dim() != model.dim()) throw DimensionError("hessian: dimension mismatch");
  const int n = x.dim();
  std::vector<double> h(static_cast<std::size_t>(n * n));
  double v = 0.0;
  model.real_jet(x.coords().data(), v, nullptr, h.data());
  Mat out(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out(r, c) = h[static_cast<std::size_t>(r * n + c)];
  return out;
}

LocalFrequency local_frequency(const HamiltonianModel& model, const PhasePoint& x) {
  if (model.dof() != 1) throw ConfigError("local_frequency supports N = 1 only");
  const Mat h = hessian(model, x);
  LocalFrequency f;
  f.det = h.determinant();
  f.hyperbolic = f.det < 0.0;
  f.omega = f.hyperbolic ? 0.0 : std::sqrt(f.det);
  return f;
}

LocalQuadraticData local_quadratic_data(const HamiltonianModel& model, const PhasePoint& x) {
  LocalQuadraticData d;
  d.gradient = gradient(model, x);
  d.hessian = hessian(model, x);
  if (model.dof() == 1) d.frequency = local_frequency(model, x);
  Eigen::JacobiSVD<Mat> svd(d.hessian);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  d.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (smin > 1e-14 * std::max(1.0, smax)) {
    d.gamma = x.coords() - d.hessian.fullPivLu().solve(d.gradient);
  }
  return d;
}

PhasePoint centre_of_curvature(const HamiltonianModel& model, const PhasePoint& x) {
  const LocalQuadraticData d = local_quadratic_data(model, x);
  if (d.gamma.size() == 0) {
    throw SingularHessianError("Hessian is singular at x; centre of curvature undefined", d.hessian.determinant());
  }
  return PhasePoint(d.gamma);
}

double double_hamiltonian(const HamiltonianModel& model, const PhasePoint& x, const Vec& y) {
  if (y.size() != x.dim()) throw DimensionError("double_hamiltonian: y dimension mismatch");
  const CVec z = x.coords().cast<Complex>() + Complex(0.0, 0.5) * apply_j(y).cast<Complex>();
  return 2.0 * eval_complex(model, z).real();
}

double moyal_square(const HamiltonianModel& model, const PhasePoint& x, double hbar) {
  const double h = eval(model, x);
  if (model.dof() > 1) {
    const Mat& a = model.matrix();
    const Mat j = symplectic_matrix(model.dof());
    return h * h - (hbar * hbar / 8.0) * (j.transpose() * a * j * a).trace();
  }
  // H⋆H = Σ_n (iħ/2)ⁿ/n! Σ_k C(n,k)(-1)^k (∂_q^{n-k}∂_p^k H)(∂_p^{n-k}∂_q^k H);
  // odd orders cancel for f⋆f.
  const PolynomialPQ& poly = model.polynomial();
  const double p = x.p(0);
  const double q = x.q(0);
  double sum = h * h;
  double factor = 1.0;  // (ħ/2)ⁿ/n! with sign (-1)^{n/2}
  for (int n = 1; n <= poly.degree(); ++n) {
    factor *= (hbar / 2.0) / n;
    if (n % 2 != 0) continue;
    const double sign = (n / 2) % 2 == 0 ? 1.0 : -1.0;
    double inner = 0.0;
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
      const double alt = k % 2 == 0 ? 1.0 : -1.0;
      inner += binom * alt * poly.partial(k, n - k, p, q) * poly.partial(n - k, k, p, q);
      binom = binom * (n - k) / (k + 1);
    }
    sum += sign * factor * inner;
  }
  return sum;
}

Minimum find_minimum(const HamiltonianModel& model, double half_width) {
  if (model.kind() == ModelKind::Quadratic) {
    Eigen::SelfAdjointEigenSolver<Mat> es(model.matrix());
    if (es.eigenvalues().minCoeff() < -1e-12) {
      throw NumericalError("quadratic Hamiltonian is unbounded below (indefinite matrix)");
    }
    return {PhasePoint::origin(model.dof()), 0.0};
  }
  if (model.has_normal_form()) return {PhasePoint::origin(1), 0.0};

  constexpr int n = 161;
  const double step = 2.0 * half_width / (n - 1);
  int best_i = 0;
  int best_j = 0;
  double best = std::numeric_limits<double>::infinity();
  const PolynomialPQ& poly = model.polynomial();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = poly.eval(-half_width + i * step, -half_width + j * step);
      if (v < best) {
        best = v;
        best_i = i;
        best_j = j;
      }
    }
  }
  if (best_i == 0 || best_j == 0 || best_i == n - 1 || best_j == n - 1) {
    throw NumericalError("no minimum of H found inside the working window [-" + std::to_string(half_width) +
                         ", " + std::to_string(half_width) + "]^2");
  }
  double p = -half_width + best_i * step;
  double q = -half_width + best_j * step;
  for (int it = 0; it < 50; ++it) {
    double v = 0.0;
    std::array<double, 2> g{};
    std::array<double, 3> h{};
    poly.jet(p, q, v, g, h);
    const double det = h[0] * h[2] - h[1] * h[1];
    if (!(det > 0.0) || h[0] <= 0.0) break;
    const double dp = (h[2] * g[0] - h[1] * g[1]) / det;
    const double dq = (h[0] * g[1] - h[1] * g[0]) / det;
    if (std::abs(dp) > step || std::abs(dq) > step) break;
    p -= dp;
    q -= dq;
    if (std::abs(dp) + std::abs(dq) < 1e-15) break;
  }
  const double v = poly.eval(p, q);
  if (v > best) return {PhasePoint{-half_width + best_i * step, -half_width + best_j * step}, best};
  return {PhasePoint{p, q}, v};
}

}  // namespace thermal
