#include "thermal/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

#include "thermal/error.hpp"
#include "thermal/format.hpp"
#include "thermal/parallel.hpp"

namespace thermal {

// ---- Jacobi ------------------------------------------------------------------

void jacobi_eigensolver(const Mat& input, Vec& eigenvalues, Mat& eigenvectors, double tol, int max_sweeps) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw DimensionError("Jacobi eigensolver needs a square matrix");
  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);
  const double norm = a.norm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol * norm) break;
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        double* colp = a.col(p).data();
        double* colq = a.col(q).data();
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = colp[r];
          const double arq = colq[r];
          colp[r] = arp - s * (arq + tau * arp);
          colq[r] = arq + s * (arp - tau * arq);
          a(p, r) = colp[r];
          a(q, r) = colq[r];
        }
        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = vp[r];
          const double vrq = vq[r];
          vp[r] = vrp - s * (vrq + tau * vrp);
          vq[r] = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  eigenvalues.resize(n);
  eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    eigenvalues[k] = a(order[k], order[k]);
    eigenvectors.col(k) = v.col(order[k]);
  }
}

// ---- matrix assembly -----------------------------------------------------------

namespace {

// In-place ladder operators on a dense vector restricted to [lo, hi].
struct Ladder {
  double alpha;  // q scale √(ħ/2ω_b)
  double beta;   // p scale √(ħω_b/2)
  int size;

  // v ← q v or p v; the support grows by one on each side.
  void apply(char op, std::vector<Complex>& v, std::vector<Complex>& tmp, int& lo, int& hi) const {
    const int nlo = std::max(0, lo - 1);
    const int nhi = std::min(size - 1, hi + 1);
    for (int m = nlo; m <= nhi; ++m) tmp[m] = 0.0;
    for (int n = lo; n <= hi; ++n) {
      const Complex c = v[n];
      if (c == 0.0) continue;
      const double down = std::sqrt(static_cast<double>(n));
      const double up = std::sqrt(static_cast<double>(n + 1));
      if (op == 'q') {
        if (n > 0) tmp[n - 1] += alpha * down * c;
        if (n + 1 < size) tmp[n + 1] += alpha * up * c;
      } else {
        // p|n⟩ = iβ(√(n+1)|n+1⟩ - √n|n-1⟩)
        const Complex ib(0.0, beta);
        if (n > 0) tmp[n - 1] -= ib * down * c;
        if (n + 1 < size) tmp[n + 1] += ib * up * c;
      }
    }
    for (int m = lo; m <= hi; ++m) v[m] = 0.0;
    for (int m = nlo; m <= nhi; ++m) v[m] = tmp[m];
    lo = nlo;
    hi = nhi;
  }
};

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

bool has_odd_momentum(const PolynomialPQ& poly) {
  return std::any_of(poly.terms().begin(), poly.terms().end(), [](const Monomial& m) { return m.p_power % 2 != 0; });
}

}  // namespace

CMat hamiltonian_matrix(const HamiltonianModel& model, int basis_size, double hbar, double omega_b) {
  if (model.dof() != 1) throw ConfigError("the spectral oracle supports N = 1 only");
  if (basis_size < 1 || basis_size > 2000) throw ConfigError("basis size must be in [1, 2000]");
  if (!(hbar > 0.0) || !(omega_b > 0.0)) throw ConfigError("hbar and omega_b must be positive");
  const PolynomialPQ& poly = model.polynomial();
  const int big = basis_size + poly.degree() + 1;
  const Ladder ladder{std::sqrt(hbar / (2.0 * omega_b)), std::sqrt(hbar * omega_b / 2.0), big};
  CMat h = CMat::Zero(basis_size, basis_size);
  std::vector<Complex> v(big), tmp(big);
  for (int col = 0; col < basis_size; ++col) {
    for (const Monomial& m : poly.terms()) {
      // Weyl(pⁱ qʲ) = 2^{-j} Σ_k C(j,k) q^k pⁱ q^{j-k}
      const int i = m.p_power;
      const int j = m.q_power;
      for (int k = 0; k <= j; ++k) {
        std::fill(v.begin(), v.end(), Complex(0.0));
        v[col] = 1.0;
        int lo = col, hi = col;
        for (int r = 0; r < j - k; ++r) ladder.apply('q', v, tmp, lo, hi);
        for (int r = 0; r < i; ++r) ladder.apply('p', v, tmp, lo, hi);
        for (int r = 0; r < k; ++r) ladder.apply('q', v, tmp, lo, hi);
        const double w = m.coeff * binomial(j, k) * std::pow(0.5, j);
        for (int row = lo; row <= std::min(hi, basis_size - 1); ++row) h(row, col) += w * v[row];
      }
    }
  }
  return h;
}

// ---- diagonalization -----------------------------------------------------------

namespace {

SpectralDecomposition kerr_decomposition(const HamiltonianModel& model, int basis_size, double hbar) {
  SpectralDecomposition d;
  d.basis_size = basis_size;
  d.hbar = hbar;
  d.omega_b = 1.0;
  d.eigenvalues.resize(basis_size);
  const double w = model.kerr_omega();
  for (int j = 0; j < basis_size; ++j) {
    const double e = hbar * w * (j + 0.5);
    d.eigenvalues[j] = e * e;
  }
  d.eigenvectors = CMat::Identity(basis_size, basis_size);
  return d;
}

// Connected components of the sparsity pattern.
std::vector<std::vector<int>> blocks_of(const CMat& h) {
  const int n = static_cast<int>(h.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < c; ++r)
      if (h(r, c) != 0.0) parent[find(r)] = find(c);
  std::vector<std::vector<int>> blocks;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[root]].push_back(i);
  }
  return blocks;
}

}  // namespace

SpectralDecomposition diagonalize(const HamiltonianModel& model, int basis_size, double hbar, double omega_b,
                                  double tail_tol) {
  if (model.dof() != 1) throw ConfigError("the spectral oracle supports N = 1 only");
  if (basis_size < 1 || basis_size > 2000) throw ConfigError("basis size must be in [1, 2000]");
  if (!(hbar > 0.0) || !(omega_b > 0.0)) throw ConfigError("hbar and omega_b must be positive");
  if (model.kind() == ModelKind::Kerr) return kerr_decomposition(model, basis_size, hbar);

  const CMat h = hamiltonian_matrix(model, basis_size, hbar, omega_b);
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError("assembled Hamiltonian matrix is not Hermitian");
  }
  const bool real = !has_odd_momentum(model.polynomial());

  struct Level {
    double e;
    CVec v;
  };
  std::vector<Level> levels;
  for (const auto& block : blocks_of(h)) {
    const int m = static_cast<int>(block.size());
    if (real) {
      Mat a(m, m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) a(r, c) = h(block[r], block[c]).real();
      Vec e;
      Mat v;
      jacobi_eigensolver(a, e, v);
      for (int k = 0; k < m; ++k) {
        CVec full = CVec::Zero(basis_size);
        for (int r = 0; r < m; ++r) full[block[r]] = v(r, k);
        levels.push_back({e[k], std::move(full)});
      }
    } else {
      // Hermitian R + iI as the real symmetric [[R, -I], [I, R]]; every
      // level appears twice, one copy per pair is kept.
      Mat a(2 * m, 2 * m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
          const Complex z = h(block[r], block[c]);
          a(r, c) = a(m + r, m + c) = z.real();
          a(r, m + c) = -z.imag();
          a(m + r, c) = z.imag();
        }
      Vec e;
      Mat v;
      jacobi_eigensolver(a, e, v);
      for (int k = 0; k < 2 * m; k += 2) {
        CVec full = CVec::Zero(basis_size);
        for (int r = 0; r < m; ++r) full[block[r]] = Complex(v(r, k), v(m + r, k));
        full.normalize();
        levels.push_back({0.5 * (e[k] + e[k + 1]), std::move(full)});
      }
    }
  }
  std::stable_sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) { return a.e < b.e; });

  const int tail_start = basis_size - std::max(1, basis_size / 5);
  int converged = 0;
  for (const auto& lv : levels) {
    if (lv.v.tail(basis_size - tail_start).squaredNorm() >= tail_tol) break;
    ++converged;
  }
  if (converged == 0) {
    throw BasisTooSmallError("basis of " + std::to_string(basis_size) +
                                 " states is too small: the ground state fails the tail test (try " +
                                 std::to_string(2 * basis_size) + ")",
                             2 * basis_size);
  }
  SpectralDecomposition d;
  d.basis_size = basis_size;
  d.hbar = hbar;
  d.omega_b = omega_b;
  d.real_vectors = real;
  d.eigenvalues.resize(converged);
  d.eigenvectors.resize(basis_size, converged);
  for (int k = 0; k < converged; ++k) {
    d.eigenvalues[k] = levels[k].e;
    d.eigenvectors.col(k) = levels[k].v;
  }
  return d;
}

// ---- thermal sums ----------------------------------------------------------------

namespace {

void check_truncation(const SpectralDecomposition& d, double beta) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (d.levels() == 0) throw NumericalError("spectral decomposition has no levels");
  const double be = beta * d.eigenvalues[d.levels() - 1];
  if (!(be > 40.0)) {
    throw TruncationError("spectral truncation unsafe: beta*E_max = " + format_double(be) +
                              " <= 40 (increase the basis size)",
                          be);
  }
}

// e^{-β(E_j - E_0)}
std::vector<double> boltzmann(const SpectralDecomposition& d, double beta) {
  std::vector<double> w(d.levels());
  for (int j = 0; j < d.levels(); ++j) w[j] = std::exp(-beta * (d.eigenvalues[j] - d.eigenvalues[0]));
  return w;
}

}  // namespace

double spectral_partition(const SpectralDecomposition& decomp, double beta) {
  check_truncation(decomp, beta);
  const std::vector<double> w = boltzmann(decomp, beta);
  return std::exp(-beta * decomp.eigenvalues[0]) * pairwise_sum(w.data(), w.size());
}

double spectral_average(const SpectralDecomposition& decomp, double beta, SpectralQuantity quantity) {
  check_truncation(decomp, beta);
  const std::vector<double> w = boltzmann(decomp, beta);
  std::vector<double> f(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double e = decomp.eigenvalues[static_cast<Eigen::Index>(j)];
    f[j] = w[j] * (quantity == SpectralQuantity::Energy ? e : e * e);
  }
  return pairwise_sum(f.data(), f.size()) / pairwise_sum(w.data(), w.size());
}

SpectralEnergyStats spectral_energy_stats(const SpectralDecomposition& decomp, double beta, double k_b) {
  check_truncation(decomp, beta);
  const std::vector<double> w = boltzmann(decomp, beta);
  const double z = pairwise_sum(w.data(), w.size());
  double mean = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) mean += w[j] * decomp.eigenvalues[static_cast<Eigen::Index>(j)];
  mean /= z;
  std::vector<double> dev(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double de = decomp.eigenvalues[static_cast<Eigen::Index>(j)] - mean;
    dev[j] = w[j] * de * de;
  }
  const double var = pairwise_sum(dev.data(), dev.size()) / z;
  return {mean, var, k_b * beta * beta * var};
}

// ---- Wigner transforms --------------------------------------------------------------

std::vector<double> hermite_functions(int n, double q, double hbar, double omega_b) {
  std::vector<double> out(std::max(n, 0), 0.0);
  if (n <= 0) return out;
  const double xi = q * std::sqrt(omega_b / hbar);
  double log_scale = 0.25 * std::log(omega_b / (std::numbers::pi * hbar)) - 0.5 * xi * xi;
  double prev = 0.0;
  double cur = 1.0;
  out[0] = std::exp(log_scale);
  for (int k = 1; k < n; ++k) {
    const double next = std::sqrt(2.0 / k) * xi * cur - std::sqrt((k - 1.0) / k) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e150) {
      cur *= 1e-150;
      prev *= 1e-150;
      log_scale += 150.0 * std::log(10.0);
    }
    out[k] = cur * std::exp(log_scale);
  }
  return out;
}

namespace {

// Highest basis index carrying weight in the weighted levels.
int effective_size(const SpectralDecomposition& d, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += std::abs(w);
  int n_eff = 1;
  for (int n = 0; n < d.basis_size; ++n) {
    double mass = 0.0;
    for (int j = 0; j < d.levels(); ++j) {
      if (weights[j] != 0.0) mass += std::abs(weights[j]) * std::norm(d.eigenvectors(n, j));
    }
    if (mass > 1e-30 * total) n_eff = n + 1;
  }
  return n_eff;
}

// Chord samples ρ(s_k) = Σ_j w_j ψ_j(q + s_k/2) ψ_j*(q - s_k/2), k = 0..K.
struct ChordLine {
  double ds = 0.0;
  std::vector<Complex> rho;
};

class ChordTransform {
 public:
  ChordTransform(const SpectralDecomposition& d, const std::vector<double>& weights, double p_reach)
      : d_(d), weights_(weights) {
    n_eff_ = effective_size(d, weights);
    const double root = std::sqrt(2.0 * n_eff_ + 1.0) + 8.0;
    q_ext_ = std::sqrt(d.hbar / d.omega_b) * root;
    p_ext_ = std::sqrt(d.hbar * d.omega_b) * root;
    ds_ = 2.0 * std::numbers::pi * d.hbar / (1.5 * (p_reach + p_ext_));
    for (int j = 0; j < d.levels(); ++j)
      if (weights_[j] != 0.0) active_.push_back(j);
  }

  ChordLine line(double q) const {
    ChordLine out;
    out.ds = ds_;
    const double half_span = q_ext_ - std::abs(q);
    if (half_span <= 0.0) return out;
    const int k_max = static_cast<int>(std::ceil(2.0 * half_span / ds_));
    out.rho.assign(static_cast<std::size_t>(k_max) + 1, Complex(0.0));
    std::vector<Complex> plus(active_.size()), minus(active_.size());
    for (int k = 0; k <= k_max; ++k) {
      const double s = k * ds_;
      psi(q + 0.5 * s, plus);
      psi(q - 0.5 * s, minus);
      Complex sum = 0.0;
      for (std::size_t a = 0; a < active_.size(); ++a) sum += weights_[active_[a]] * plus[a] * std::conj(minus[a]);
      out.rho[k] = sum;
    }
    return out;
  }

  double wigner(const ChordLine& line, double p) const {
    if (line.rho.empty()) return 0.0;
    const double hbar = d_.hbar;
    double sum = line.rho[0].real();
    for (std::size_t k = 1; k < line.rho.size(); ++k) {
      const double arg = p * k * line.ds / hbar;
      sum += 2.0 * (std::cos(arg) * line.rho[k].real() + std::sin(arg) * line.rho[k].imag());
    }
    return sum * line.ds / (2.0 * std::numbers::pi * hbar);
  }

 private:
  void psi(double q, std::vector<Complex>& out) const {
    const std::vector<double> phi = hermite_functions(n_eff_, q, d_.hbar, d_.omega_b);
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const int j = active_[a];
      Complex s = 0.0;
      for (int n = 0; n < n_eff_; ++n) s += d_.eigenvectors(n, j) * phi[n];
      out[a] = s;
    }
  }

  const SpectralDecomposition& d_;
  std::vector<double> weights_;
  std::vector<int> active_;
  int n_eff_ = 1;
  double q_ext_ = 0.0;
  double p_ext_ = 0.0;
  double ds_ = 0.0;
};

ThermalField grid_wigner(const SpectralDecomposition& d, const std::vector<double>& weights, const GridSpec& grid,
                         int workers) {
  grid.validate();
  const double p_reach = std::max(std::abs(grid.p_min), std::abs(grid.p_max));
  const ChordTransform transform(d, weights, p_reach);
  ThermalField field;
  field.grid = grid;
  field.values.assign(grid.size(), 0.0);
  field.hbar = d.hbar;
  parallel_for(static_cast<std::size_t>(grid.nq), workers, [&](std::size_t jq) {
    const int j = static_cast<int>(jq);
    const ChordLine line = transform.line(grid.q(j));
    for (int i = 0; i < grid.np; ++i) field.values[grid.index(i, j)] = transform.wigner(line, grid.p(i));
  });
  return field;
}

}  // namespace

double spectral_wigner_point(const SpectralDecomposition& decomp, const std::vector<double>& weights, double p,
                             double q) {
  if (static_cast<int>(weights.size()) != decomp.levels()) throw DimensionError("one weight per level expected");
  const ChordTransform transform(decomp, weights, std::abs(p));
  return transform.wigner(transform.line(q), p);
}

ThermalField spectral_level_wigner(const SpectralDecomposition& decomp, int j, const GridSpec& grid, int workers) {
  if (j < 0 || j >= decomp.levels()) throw ConfigError("level index out of range");
  std::vector<double> w(decomp.levels(), 0.0);
  w[j] = 1.0;
  ThermalField f = grid_wigner(decomp, w, grid, workers);
  f.method = "spectral";
  f.normalized = true;
  return f;
}

ThermalField spectral_thermal_wigner(const SpectralDecomposition& decomp, double beta, const GridSpec& grid,
                                     int workers) {
  check_truncation(decomp, beta);
  std::vector<double> w = boltzmann(decomp, beta);
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= z;
  ThermalField f = grid_wigner(decomp, w, grid, workers);
  f.method = "spectral";
  f.beta = beta;
  f.normalized = true;
  const double total = f.integral();
  if (std::abs(total - 1.0) > 1e-2) {
    throw ResolutionError("spectral thermal Wigner field integrates to " + format_double(total) +
                          " on this grid (grid too coarse or too small)");
  }
  return f;
}

double spectral_thermal_weyl(const SpectralDecomposition& decomp, double beta, const PhasePoint& x) {
  if (x.dim() != 2) throw DimensionError("spectral_thermal_weyl is defined for N = 1");
  check_truncation(decomp, beta);
  std::vector<double> w = boltzmann(decomp, beta);
  const double shift = std::exp(-beta * decomp.eigenvalues[0]);
  return 2.0 * std::numbers::pi * decomp.hbar * shift * spectral_wigner_point(decomp, w, x.p(0), x.q(0));
}

void write_spectrum_csv(std::ostream& out, const SpectralDecomposition& decomp) {
  out << "j,E_j\n";
  for (int j = 0; j < decomp.levels(); ++j) out << j << ',' << format_double(decomp.eigenvalues[j]) << '\n';
}

}  // namespace thermal
