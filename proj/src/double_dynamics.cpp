#include "thermal/double_dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "thermal/error.hpp"
#include "thermal/format.hpp"
#include "thermal/ode.hpp"

namespace thermal {

namespace {

// out = J·m for a row-major d×d matrix, d = 2n.
template <class T>
void j_left(const T* m, T* out, int d) {
  const int n = d / 2;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) {
      out[r * d + c] = -m[(n + r) * d + c];
      out[(n + r) * d + c] = m[r * d + c];
    }
}

// out = m·J
template <class T>
void j_right(const T* m, T* out, int d) {
  const int n = d / 2;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < n; ++c) {
      out[r * d + c] = m[r * d + n + c];
      out[r * d + n + c] = -m[r * d + c];
    }
}

template <class T>
void j_vec(const T* v, T* out, int d) {
  const int n = d / 2;
  for (int k = 0; k < n; ++k) {
    out[k] = -v[n + k];
    out[n + k] = v[k];
  }
}

double det_of(const double* t, int d) {
  if (d == 2) return t[0] * t[3] - t[1] * t[2];
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(t, d, d);
  return m.determinant();
}

// Right-hand side of the double flow with action and tangent block.
// Layout: x[d], y[d], s, Tx[d·d], Ty[d·d] (row-major, column c = ∂/∂X_c).
class DoubleSystem {
 public:
  DoubleSystem(const HamiltonianModel& model, DoubleMode mode)
      : model_(model), mode_(mode), d_(model.dim()) {
    const std::size_t dd = static_cast<std::size_t>(d_ * d_);
    zc_.resize(d_);
    gc_.resize(d_);
    hc_.resize(dd);
    zr_[0].resize(d_);
    zr_[1].resize(d_);
    gr_[0].resize(d_);
    gr_[1].resize(d_);
    hr_[0].resize(dd);
    hr_[1].resize(dd);
    jy_.resize(d_);
    va_.resize(d_);
    vb_.resize(d_);
    ma_.resize(dd);
    mb_.resize(dd);
    a_.resize(dd);
    b_.resize(dd);
    c_.resize(dd);
    dm_.resize(dd);
  }

  int size() const { return 2 * d_ + 1 + 2 * d_ * d_; }
  int dim() const { return d_; }

  void operator()(double, const double* u, double* du) {
    const int d = d_;
    const double* x = u;
    const double* y = u + d;
    const double* tx = u + 2 * d + 1;
    const double* ty = tx + d * d;
    double* dx = du;
    double* dy = du + d;
    double* dtx = du + 2 * d + 1;
    double* dty = dtx + d * d;

    j_vec(y, jy_.data(), d);
    if (mode_ == DoubleMode::Thermal) {
      for (int k = 0; k < d; ++k) zc_[k] = Complex(x[k], 0.5 * jy_[k]);
      Complex value;
      model_.complex_jet(zc_.data(), value, gc_.data(), hc_.data());
      for (int k = 0; k < d; ++k) va_[k] = gc_[k].imag();
      j_vec(va_.data(), dx, d);
      for (int k = 0; k < d; ++k) dy[k] = -2.0 * gc_[k].real();
      // A = J Im G, B = ½ J Re G J, C = -2 Re G, D = Im G J
      for (std::size_t k = 0; k < hc_.size(); ++k) {
        ma_[k] = hc_[k].imag();
        mb_[k] = hc_[k].real();
        c_[k] = -2.0 * mb_[k];
      }
      j_left(ma_.data(), a_.data(), d);
      j_right(ma_.data(), dm_.data(), d);
      j_right(mb_.data(), ma_.data(), d);
      j_left(ma_.data(), b_.data(), d);
      for (auto& v : b_) v *= 0.5;
    } else {
      for (int k = 0; k < d; ++k) {
        zr_[0][k] = x[k] - 0.5 * jy_[k];
        zr_[1][k] = x[k] + 0.5 * jy_[k];
      }
      double v0 = 0.0, v1 = 0.0;
      model_.real_jet(zr_[0].data(), v0, gr_[0].data(), hr_[0].data());
      model_.real_jet(zr_[1].data(), v1, gr_[1].data(), hr_[1].data());
      for (int k = 0; k < d; ++k) va_[k] = 0.5 * (gr_[0][k] - gr_[1][k]);
      j_vec(va_.data(), dx, d);
      for (int k = 0; k < d; ++k) dy[k] = -(gr_[0][k] + gr_[1][k]);
      // A = ½ J(G₊ - G₋), B = -¼ J(G₊ + G₋)J, C = -(G₊ + G₋), D = ½ (G₊ - G₋)J
      for (std::size_t k = 0; k < hr_[0].size(); ++k) {
        ma_[k] = 0.5 * (hr_[0][k] - hr_[1][k]);
        mb_[k] = hr_[0][k] + hr_[1][k];
        c_[k] = -mb_[k];
      }
      j_left(ma_.data(), a_.data(), d);
      j_right(ma_.data(), dm_.data(), d);
      j_right(mb_.data(), ma_.data(), d);
      j_left(ma_.data(), b_.data(), d);
      for (auto& v : b_) v *= -0.25;
    }
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += y[k] * dx[k];
    du[2 * d] = s;

    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        double sx = 0.0, sy = 0.0;
        for (int m = 0; m < d; ++m) {
          sx += a_[r * d + m] * tx[m * d + c] + b_[r * d + m] * ty[m * d + c];
          sy += c_[r * d + m] * tx[m * d + c] + dm_[r * d + m] * ty[m * d + c];
        }
        dtx[r * d + c] = sx;
        dty[r * d + c] = sy;
      }
  }

 private:
  const HamiltonianModel& model_;
  DoubleMode mode_;
  int d_;
  std::vector<Complex> zc_, gc_, hc_;
  std::vector<double> zr_[2], gr_[2], hr_[2];
  std::vector<double> jy_, va_, vb_, ma_, mb_, a_, b_, c_, dm_;
};

void check_inputs(const HamiltonianModel& model, const PhasePoint& midpoint, double theta,
                  const DoubleOptions& opts) {
  if (midpoint.dim() != model.dim()) throw DimensionError("midpoint dimension does not match the model");
  if (!std::isfinite(theta)) throw ConfigError("theta must be finite");
  if (opts.mode == DoubleMode::Thermal && theta < 0.0) throw ConfigError("thermal time theta must be >= 0");
  if (!(opts.rtol > 0.0) || !(opts.atol > 0.0)) throw ConfigError("integrator tolerances must be positive");
}

}  // namespace

double double_energy(const HamiltonianModel& model, const Vec& x, const Vec& y, DoubleMode mode) {
  const int d = model.dim();
  if (x.size() != d || y.size() != d) throw DimensionError("double_energy: dimension mismatch");
  const Vec jy = apply_j(y);
  if (mode == DoubleMode::Thermal) {
    CVec z(d);
    for (int k = 0; k < d; ++k) z[k] = Complex(x[k], 0.5 * jy[k]);
    return 2.0 * eval_complex(model, z).real();
  }
  return eval(model, PhasePoint(Vec(x - 0.5 * jy))) + eval(model, PhasePoint(Vec(x + 0.5 * jy)));
}

DoubleTrajectory integrate_double(const HamiltonianModel& model, const PhasePoint& midpoint, double theta,
                                  const DoubleOptions& opts, std::vector<TrajectorySample>* samples) {
  check_inputs(model, midpoint, theta, opts);
  DoubleSystem system(model, opts.mode);
  const int d = system.dim();
  std::vector<double> u(static_cast<std::size_t>(system.size()), 0.0);
  for (int k = 0; k < d; ++k) u[k] = midpoint[k];
  for (int k = 0; k < d; ++k) u[2 * d + 1 + k * d + k] = 1.0;

  const double h0 = eval(model, midpoint);
  const double e0 = 2.0 * h0;
  DoubleTrajectory traj;
  traj.initial = midpoint;
  traj.theta = theta;

  Vec xv(d), yv(d);
  double last_det = 1.0;
  auto energy_of = [&](const std::vector<double>& state) {
    for (int k = 0; k < d; ++k) {
      xv[k] = state[k];
      yv[k] = state[d + k];
    }
    return double_energy(model, xv, yv, opts.mode);
  };
  auto observer = [&](double, const std::vector<double>& state) {
    for (int k = 0; k < 2 * d; ++k) {
      if (!(std::abs(state[k]) <= opts.escape_radius)) {
        throw DivergenceError("double trajectory escaped beyond radius " + format_double(opts.escape_radius));
      }
    }
    traj.energy_drift = std::max(traj.energy_drift, std::abs(energy_of(state) - e0));
    const double det = det_of(state.data() + 2 * d + 1, d);
    if ((det < 0.0) != (last_det < 0.0) || det == 0.0) {
      ++traj.sign_crossings;
      traj.caustic_flag = true;
    }
    last_det = det;
  };
  auto record = [&](double tp) {
    if (!samples) return;
    TrajectorySample smp;
    smp.theta_prime = tp;
    smp.x = Vec::Map(u.data(), d);
    smp.y = Vec::Map(u.data() + d, d);
    smp.s = u[2 * d];
    smp.det_t = det_of(u.data() + 2 * d + 1, d);
    samples->push_back(std::move(smp));
  };

  const double end = 0.5 * theta;
  const OdeOptions ode{opts.rtol, opts.atol};
  const int segments = samples ? std::max(1, opts.checkpoints) : 1;
  double step = 0.0;
  record(0.0);
  for (int seg = 0; seg < segments; ++seg) {
    const double a = end * seg / segments;
    const double b = seg + 1 == segments ? end : end * (seg + 1) / segments;
    integrate_dopri5(system, a, b, u, ode, observer, step);
    record(b);
  }

  DoubleState& fs = traj.final_state;
  fs.x = PhasePoint(Vec(Vec::Map(u.data(), d)));
  fs.y = Vec::Map(u.data() + d, d);
  fs.s = u[2 * d];
  fs.T = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      u.data() + 2 * d + 1, d, d);
  traj.action = fs.s - theta * h0;
  traj.jacobian_det = det_of(u.data() + 2 * d + 1, d);
  return traj;
}

ScWeylSample sc_weyl_thermal(const HamiltonianModel& model, const PhasePoint& midpoint, double theta, double hbar,
                             const DoubleOptions& opts) {
  if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
  DoubleOptions thermal_opts = opts;
  thermal_opts.mode = DoubleMode::Thermal;
  const DoubleTrajectory t = integrate_double(model, midpoint, theta, thermal_opts);
  const int sign = t.sign_crossings % 2 == 0 ? 1 : -1;
  const double value = sign * std::exp(t.action / hbar) / std::sqrt(std::abs(t.jacobian_det));
  return {t.final_state.x, value, t.jacobian_det, t.action, sign};
}

double complex_consistency_check(const HamiltonianModel& model, const PhasePoint& midpoint, double theta,
                                 const DoubleOptions& opts, int checkpoints) {
  if (checkpoints < 1) throw ConfigError("complex_consistency_check needs at least one checkpoint");
  DoubleOptions thermal_opts = opts;
  thermal_opts.mode = DoubleMode::Thermal;
  thermal_opts.checkpoints = checkpoints;
  check_inputs(model, midpoint, theta, thermal_opts);
  if (theta == 0.0) return 0.0;
  std::vector<TrajectorySample> samples;
  integrate_double(model, midpoint, theta, thermal_opts, &samples);

  const int d = model.dim();
  std::vector<Complex> z(d), g(d);
  std::vector<double> jr(d), ji(d);
  // w = (Re z, Im z); ż = -iJ g(z) = J Im g - i J Re g
  auto rhs = [&](double, const double* w, double* dw) {
    for (int k = 0; k < d; ++k) z[k] = Complex(w[k], w[d + k]);
    Complex value;
    model.complex_jet(z.data(), value, g.data(), nullptr);
    for (int k = 0; k < d; ++k) {
      jr[k] = g[k].real();
      ji[k] = g[k].imag();
    }
    j_vec(ji.data(), dw, d);
    j_vec(jr.data(), dw + d, d);
    for (int k = 0; k < d; ++k) dw[d + k] = -dw[d + k];
  };
  auto observer = [&](double, const std::vector<double>& w) {
    for (double v : w) {
      if (!(std::abs(v) <= thermal_opts.escape_radius)) throw DivergenceError("complex trajectory escaped");
    }
  };

  std::vector<double> w(static_cast<std::size_t>(2 * d), 0.0);
  for (int k = 0; k < d; ++k) w[k] = midpoint[k];
  const OdeOptions ode{thermal_opts.rtol, thermal_opts.atol};
  double step = 0.0;
  double worst = 0.0;
  Vec im(d);
  for (int seg = 1; seg < static_cast<int>(samples.size()); ++seg) {
    integrate_dopri5(rhs, samples[seg - 1].theta_prime, samples[seg].theta_prime, w, ode, observer, step);
    for (int k = 0; k < d; ++k) im[k] = w[d + k];
    const Vec y_from_z = -2.0 * apply_j(im);
    const double dev = (Vec::Map(w.data(), d) - samples[seg].x).norm() + (y_from_z - samples[seg].y).norm();
    worst = std::max(worst, dev);
  }
  return worst;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& samples) {
  if (samples.empty()) return;
  const int d = static_cast<int>(samples.front().x.size());
  const int n = d / 2;
  out << "theta_prime";
  if (n == 1) {
    out << ",p,q,y_p,y_q";
  } else {
    for (int k = 1; k <= n; ++k) out << ",p" << k;
    for (int k = 1; k <= n; ++k) out << ",q" << k;
    for (int k = 1; k <= n; ++k) out << ",y_p" << k;
    for (int k = 1; k <= n; ++k) out << ",y_q" << k;
  }
  out << ",s,det_T\n";
  for (const auto& s : samples) {
    out << format_double(s.theta_prime);
    for (int k = 0; k < d; ++k) out << ',' << format_double(s.x[k]);
    for (int k = 0; k < d; ++k) out << ',' << format_double(s.y[k]);
    out << ',' << format_double(s.s) << ',' << format_double(s.det_t) << '\n';
  }
}

}  // namespace thermal
