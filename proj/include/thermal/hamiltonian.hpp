#pragma once

#include <array>
#include <complex>
#include "json.hpp"
#include <string>
#include <vector>

#include "thermal/phase_space.hpp"

namespace thermal {

using Complex = std::complex<double>;

// c · p^i q^j
struct Monomial {
  double coeff;
  int p_power;
  int q_power;
};

// Polynomial in (p, q) for one degree of freedom. Like terms are merged and
// zero coefficients dropped on construction.
class PolynomialPQ {
 public:
  PolynomialPQ() = default;
  explicit PolynomialPQ(std::vector<Monomial> terms);

  const std::vector<Monomial>& terms() const { return terms_; }
  int degree() const { return degree_; }

  template <class T>
  T eval(T p, T q) const;

  // Value, gradient (d/dp, d/dq) and Hessian (pp, pq, qq) in one pass.
  template <class T>
  void jet(T p, T q, T& value, std::array<T, 2>& grad, std::array<T, 3>& hess) const;

  // ∂_p^a ∂_q^b evaluated at (p, q).
  double partial(int a, int b, double p, double q) const;

  PolynomialPQ operator+(const PolynomialPQ& other) const;
  PolynomialPQ operator*(const PolynomialPQ& other) const;
  PolynomialPQ scaled(double factor) const;

 private:
  std::vector<Monomial> terms_;
  int degree_ = 0;
  int max_p_ = 0;
  int max_q_ = 0;
};

enum class ModelKind { Quadratic, NormalForm, Kerr, PolynomialPQ };

// A polynomial Hamiltonian. Immutable after construction.
//
//   Quadratic     H = ½ x·Hx for a symmetric 2N×2N matrix (any N)
//   NormalForm    H = F(u), u = (p² + q²)/2, F(u) = ω u + H₂ u² + ...
//   Kerr          H = [ω (p² + q²)/2]², stored as NormalForm with F = ω²u²
//   PolynomialPQ  H = Σ c pⁱ qʲ
//
// All variants except Quadratic are restricted to N = 1; every N = 1 model
// also carries its expansion as a PolynomialPQ, which is what evaluation
// and the spectral oracle use.
class HamiltonianModel {
 public:
  static HamiltonianModel quadratic(Mat h);
  static HamiltonianModel harmonic(double omega);
  static HamiltonianModel normal_form(std::vector<double> coeffs);
  static HamiltonianModel kerr(double omega);
  static HamiltonianModel polynomial(std::vector<Monomial> terms);

  // Schema: {"type": "quadratic"|"normal_form"|"kerr"|"polynomial_pq",
  //          "dof": N, "matrix" | "coeffs" | "omega" | "terms": ...}
  static HamiltonianModel from_json(const nlohmann::json& j);
  static HamiltonianModel load(const std::string& path);
  nlohmann::json to_json() const;

  ModelKind kind() const { return kind_; }
  std::string type_name() const;
  int dof() const { return dof_; }
  int dim() const { return 2 * dof_; }

  const Mat& matrix() const { return matrix_; }
  // F(u) = Σ_k coeffs[k] u^(k+1); empty unless NormalForm or Kerr.
  const std::vector<double>& nf_coeffs() const { return nf_coeffs_; }
  bool has_normal_form() const { return kind_ == ModelKind::NormalForm || kind_ == ModelKind::Kerr; }
  double kerr_omega() const { return kerr_omega_; }
  const PolynomialPQ& polynomial() const { return poly_; }
  bool is_quadratic() const;

  // F and its first two derivatives in u.
  double nf_value(double u) const;
  double nf_d1(double u) const;
  double nf_d2(double u) const;

  // Raw evaluators used on hot paths. `hess` is row-major 2N×2N.
  void real_jet(const double* x, double& value, double* grad, double* hess) const;
  void complex_jet(const Complex* z, Complex& value, Complex* grad, Complex* hess) const;

 private:
  HamiltonianModel() = default;
  void check_dims(Eigen::Index n) const;

  ModelKind kind_ = ModelKind::Quadratic;
  int dof_ = 1;
  Mat matrix_;
  std::vector<double> nf_coeffs_;
  double kerr_omega_ = 0.0;
  PolynomialPQ poly_;

  friend double eval(const HamiltonianModel&, const PhasePoint&);
  friend Complex eval_complex(const HamiltonianModel&, const CVec&);
};

double eval(const HamiltonianModel& model, const PhasePoint& x);
Complex eval_complex(const HamiltonianModel& model, const CVec& z);
Vec gradient(const HamiltonianModel& model, const PhasePoint& x);
Mat hessian(const HamiltonianModel& model, const PhasePoint& x);

struct LocalFrequency {
  double omega = 0.0;  // sqrt(det H_x) when elliptic, 0 otherwise
  double det = 0.0;    // Ω_x² = det H_x
  bool hyperbolic = false;
};

// N = 1 only.
LocalFrequency local_frequency(const HamiltonianModel& model, const PhasePoint& x);

struct LocalQuadraticData {
  Vec gradient;
  Mat hessian;
  LocalFrequency frequency;
  Vec gamma;  // centre of curvature; empty when the Hessian is singular
  double condition_number = 0.0;
};

LocalQuadraticData local_quadratic_data(const HamiltonianModel& model, const PhasePoint& x);

// γ_x = x - H_x⁻¹ h_x. Throws SingularHessianError.
PhasePoint centre_of_curvature(const HamiltonianModel& model, const PhasePoint& x);

// H(x + iJy/2) + H(x - iJy/2) = 2 Re H(x + iJy/2).
double double_hamiltonian(const HamiltonianModel& model, const PhasePoint& x, const Vec& y);

// Weyl symbol of Ĥ² (the Moyal square H⋆H), exact for polynomial models.
double moyal_square(const HamiltonianModel& model, const PhasePoint& x, double hbar);

struct Minimum {
  PhasePoint x;
  double value;
};

// Global minimum of H. Quadratic and normal-form models sit at the origin;
// polynomial models are scanned over [-half_width, half_width]² and refined
// by Newton steps. Throws NumericalError when the scan minimum lies on the
// window boundary (no minimum in the working window).
Minimum find_minimum(const HamiltonianModel& model, double half_width = 8.0);

// ---- template definitions -------------------------------------------------

namespace detail {
template <class T>
void powers(T base, int n, std::vector<T>& out) {
  out.resize(static_cast<std::size_t>(n) + 1);
  out[0] = T(1);
  for (int k = 1; k <= n; ++k) out[k] = out[k - 1] * base;
}
}  // namespace detail

template <class T>
T PolynomialPQ::eval(T p, T q) const {
  thread_local std::vector<T> pp, qq;
  detail::powers(p, max_p_, pp);
  detail::powers(q, max_q_, qq);
  T sum(0);
  for (const auto& m : terms_) sum += m.coeff * pp[m.p_power] * qq[m.q_power];
  return sum;
}

template <class T>
void PolynomialPQ::jet(T p, T q, T& value, std::array<T, 2>& grad, std::array<T, 3>& hess) const {
  thread_local std::vector<T> pp, qq;
  detail::powers(p, max_p_, pp);
  detail::powers(q, max_q_, qq);
  value = T(0);
  grad = {T(0), T(0)};
  hess = {T(0), T(0), T(0)};
  for (const auto& m : terms_) {
    const int i = m.p_power;
    const int j = m.q_power;
    const double c = m.coeff;
    value += c * pp[i] * qq[j];
    if (i >= 1) grad[0] += (c * i) * pp[i - 1] * qq[j];
    if (j >= 1) grad[1] += (c * j) * pp[i] * qq[j - 1];
    if (i >= 2) hess[0] += (c * i * (i - 1)) * pp[i - 2] * qq[j];
    if (i >= 1 && j >= 1) hess[1] += (c * i * j) * pp[i - 1] * qq[j - 1];
    if (j >= 2) hess[2] += (c * j * (j - 1)) * pp[i] * qq[j - 2];
  }
}

}  // namespace thermal
