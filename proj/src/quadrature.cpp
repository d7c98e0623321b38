#include "thermal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "thermal/error.hpp"
#include "thermal/format.hpp"
#include "thermal/parallel.hpp"

namespace thermal {

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

class TensorGrid {
 public:
  TensorGrid(const Integrand& f, int n_comp, const Box& box, int n, int workers)
      : f_(f), k_(n_comp), d_(static_cast<int>(box.lo.size())), box_(box), n_(n), workers_(workers) {
    const std::size_t total = ipow(n_, d_);
    values_.assign(total * k_, 0.0);
    diverged_.assign(total, 0);
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    evaluate(all);
  }

  int n() const { return n_; }
  std::size_t size() const { return diverged_.size(); }

  // n → 2n - 1, keeping existing samples.
  void refine() {
    const int n2 = 2 * n_ - 1;
    const std::size_t total = ipow(n2, d_);
    std::vector<double> values(total * k_, 0.0);
    std::vector<char> diverged(total, 0);
    std::vector<std::size_t> fresh;
    fresh.reserve(total - size());
    std::vector<int> idx(d_);
    for (std::size_t lin = 0; lin < total; ++lin) {
      decode(lin, n2, idx);
      bool old = true;
      for (int i : idx) old = old && i % 2 == 0;
      if (!old) {
        fresh.push_back(lin);
        continue;
      }
      std::size_t olin = 0;
      for (int k = 0; k < d_; ++k) olin = olin * n_ + idx[k] / 2;
      for (int c = 0; c < k_; ++c) values[lin * k_ + c] = values_[olin * k_ + c];
      diverged[lin] = diverged_[olin];
    }
    values_.swap(values);
    diverged_.swap(diverged);
    n_ = n2;
    evaluate(fresh);
  }

  // Trapezoidal integrals of every component and of their absolute values.
  void integrals(std::vector<double>& sum, std::vector<double>& abs_sum) const {
    const std::size_t total = size();
    std::vector<double> h(d_);
    for (int k = 0; k < d_; ++k) h[k] = (box_.hi[k] - box_.lo[k]) / (n_ - 1);
    std::vector<double> w(total);
    std::vector<int> idx(d_);
    for (std::size_t lin = 0; lin < total; ++lin) {
      decode(lin, n_, idx);
      double wt = 1.0;
      for (int k = 0; k < d_; ++k) wt *= (idx[k] == 0 || idx[k] == n_ - 1) ? 0.5 * h[k] : h[k];
      w[lin] = wt;
    }
    sum.assign(k_, 0.0);
    abs_sum.assign(k_, 0.0);
    std::vector<double> terms(total), abs_terms(total);
    for (int c = 0; c < k_; ++c) {
      for (std::size_t lin = 0; lin < total; ++lin) {
        terms[lin] = w[lin] * values_[lin * k_ + c];
        abs_terms[lin] = std::abs(terms[lin]);
      }
      sum[c] = pairwise_sum(terms.data(), total);
      abs_sum[c] = pairwise_sum(abs_terms.data(), total);
    }
  }

  // Per-axis index range where |f₀| exceeds threshold · max |f₀|.
  bool support(double threshold, std::vector<int>& lo, std::vector<int>& hi) const {
    double m = 0.0;
    for (std::size_t lin = 0; lin < size(); ++lin) m = std::max(m, std::abs(values_[lin * k_]));
    if (!(m > 0.0)) return false;
    lo.assign(d_, n_);
    hi.assign(d_, -1);
    std::vector<int> idx(d_);
    for (std::size_t lin = 0; lin < size(); ++lin) {
      if (std::abs(values_[lin * k_]) <= threshold * m) continue;
      decode(lin, n_, idx);
      for (int k = 0; k < d_; ++k) {
        lo[k] = std::min(lo[k], idx[k]);
        hi[k] = std::max(hi[k], idx[k]);
      }
    }
    return true;
  }

  std::size_t diverged_count() const {
    std::size_t c = 0;
    for (char v : diverged_) c += v ? 1 : 0;
    return c;
  }

  double coordinate(int k, int i) const { return box_.lo[k] + (box_.hi[k] - box_.lo[k]) * i / (n_ - 1); }

 private:
  void decode(std::size_t lin, int n, std::vector<int>& idx) const {
    for (int k = d_ - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(lin % n);
      lin /= n;
    }
  }

  void evaluate(const std::vector<std::size_t>& points) {
    parallel_for(points.size(), workers_, [&](std::size_t j) {
      const std::size_t lin = points[j];
      std::vector<int> idx(d_);
      decode(lin, n_, idx);
      std::vector<double> x(d_), out(k_, 0.0);
      for (int k = 0; k < d_; ++k) x[k] = coordinate(k, idx[k]);
      try {
        f_(x.data(), out.data());
      } catch (const DivergenceError&) {
        diverged_[lin] = 1;
        return;
      } catch (const StiffnessError&) {
        diverged_[lin] = 1;
        return;
      }
      for (int c = 0; c < k_; ++c) {
        if (!std::isfinite(out[c])) {
          std::string where;
          for (int k = 0; k < d_; ++k) where += (k ? "," : "") + format_double(x[k]);
          throw NumericalError("integrand is not finite at (" + where + ")");
        }
        values_[lin * k_ + c] = out[c];
      }
    });
  }

  const Integrand& f_;
  int k_;
  int d_;
  Box box_;
  int n_;
  int workers_;
  std::vector<double> values_;
  std::vector<char> diverged_;
};

}  // namespace

QuadratureResult integrate_box(const Integrand& f, int n_components, Box box, const QuadratureOptions& opts) {
  const int d = static_cast<int>(box.lo.size());
  if (d < 1 || box.hi.size() != box.lo.size()) throw DimensionError("quadrature box dimension mismatch");
  if (n_components < 1) throw ConfigError("integrand needs at least one component");
  if (opts.initial_points < 3 || opts.initial_points % 2 == 0) throw ConfigError("initial_points must be odd and >= 3");
  const int n0 = opts.initial_points;

  // Fit the box to the support of the weight component.
  const Box limit = box;
  std::unique_ptr<TensorGrid> fitted;
  for (int iter = 0;; ++iter) {
    fitted = std::make_unique<TensorGrid>(f, n_components, box, n0, opts.workers);
    TensorGrid& grid = *fitted;
    std::vector<int> lo, hi;
    if (!grid.support(opts.support_threshold, lo, hi)) {
      if (grid.diverged_count() == grid.size()) throw NumericalError("every quadrature point diverged");
      throw QuadratureError("weight vanishes on the whole quadrature box", 0.0, 0.0);
    }
    if (iter >= opts.max_adaptations) break;
    bool changed = false;
    for (int k = 0; k < d; ++k) {
      const double width = box.hi[k] - box.lo[k];
      const bool at_lo = !opts.expand && box.lo[k] <= limit.lo[k];
      const bool at_hi = !opts.expand && box.hi[k] >= limit.hi[k];
      if ((lo[k] == 0 && at_lo) || (hi[k] == n0 - 1 && at_hi)) {
        std::vector<int> blo, bhi;
        grid.support(opts.boundary_tol, blo, bhi);
        if ((blo[k] == 0 && at_lo) || (bhi[k] == n0 - 1 && at_hi)) {
          throw QuadratureError("weight does not decay inside the quadrature box", 0.0, 0.0);
        }
      }
      if (lo[k] == 0 && !at_lo) {
        box.lo[k] = opts.expand ? box.lo[k] - width : std::max(box.lo[k] - width, limit.lo[k]);
        changed = true;
      }
      if (hi[k] == n0 - 1 && !at_hi) {
        box.hi[k] = opts.expand ? box.hi[k] + width : std::min(box.hi[k] + width, limit.hi[k]);
        changed = true;
      }
    }
    if (!changed) {
      for (int k = 0; k < d; ++k) {
        if (hi[k] - lo[k] < (n0 - 1) / 4) {
          const double a = grid.coordinate(k, std::max(lo[k] - 1, 0));
          const double b = grid.coordinate(k, std::min(hi[k] + 1, n0 - 1));
          box.lo[k] = a;
          box.hi[k] = b;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  TensorGrid& grid = *fitted;
  std::vector<double> prev, prev_abs, cur, cur_abs;
  grid.integrals(prev, prev_abs);
  for (;;) {
    const int next = 2 * grid.n() - 1;
    if (next > opts.max_points || ipow(next, d) > opts.max_evaluations) {
      throw QuadratureError("quadrature did not converge to rel_tol " + format_double(opts.rel_tol) +
                                " (coarse " + format_double(prev[0]) + ", fine " + format_double(cur.empty() ? prev[0] : cur[0]) + ")",
                            prev[0], cur.empty() ? prev[0] : cur[0]);
    }
    if (!cur.empty()) {
      prev = cur;
      prev_abs = cur_abs;
    }
    grid.refine();
    grid.integrals(cur, cur_abs);
    bool converged = true;
    for (int c = 0; c < n_components; ++c) {
      converged = converged && std::abs(cur[c] - prev[c]) <= opts.rel_tol * cur_abs[c];
    }
    if (converged) break;
  }

  QuadratureResult r;
  r.values = cur;
  r.errors.resize(n_components);
  for (int c = 0; c < n_components; ++c) r.errors[c] = std::abs(cur[c] - prev[c]);
  r.n_diverged = grid.diverged_count();
  r.n_points = grid.size();
  r.points_per_dim = grid.n();
  r.box = box;
  return r;
}

Box energy_window(const HamiltonianModel& model, double beta, double window) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  const Minimum min = find_minimum(model);
  const int d = model.dim();
  const double target = window / beta;
  Box box{min.x.coords(), min.x.coords()};
  for (int k = 0; k < d; ++k) {
    double reach = 0.0;
    for (double dir : {1.0, -1.0}) {
      auto rise = [&](double t) {
        Vec x = min.x.coords();
        x[k] += dir * t;
        return eval(model, PhasePoint(x)) - min.value;
      };
      double a = 0.0, b = 1e-3;
      while (rise(b) < target) {
        a = b;
        b *= 2.0;
        if (b > 1e8) throw ConfigError("Hamiltonian does not confine coordinate " + std::to_string(k));
      }
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        (rise(m) < target ? a : b) = m;
      }
      reach = std::max(reach, b);
    }
    box.lo[k] -= reach;
    box.hi[k] += reach;
  }
  return box;
}

}  // namespace thermal
