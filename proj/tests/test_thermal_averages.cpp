#include <cmath>
#include <string>

#include "doctest.h"
#include "generators.hpp"
#include "thermal/closed_form.hpp"
#include "thermal/error.hpp"
#include "thermal/spectral.hpp"
#include "thermal/thermal_averages.hpp"

using namespace thermal;
using thermal::testing::Gen;
using thermal::testing::quartic_model;
using thermal::testing::rel_diff;

namespace {

HamiltonianModel bundled(const std::string& name) {
  return HamiltonianModel::load(std::string(THERMAL_SOURCE_DIR) + "/models/" + name + ".json");
}

ComputeOptions fast(double rel_tol = 1e-8) {
  ComputeOptions o;
  o.quadrature.rel_tol = rel_tol;
  return o;
}

const SpectralDecomposition& quartic_spectrum() {
  static const SpectralDecomposition d = diagonalize(quartic_model(), 200, 1.0, 1.5);
  return d;
}

double ho_z_tilde(double theta, double omega = 1.0, double hbar = 1.0) {
  return M_PI * hbar / std::sinh(omega * theta / 2);
}

}  // namespace

TEST_CASE("method names round trip") {
  for (Method m : {Method::Classical, Method::Closed, Method::ShortTime, Method::MetaplecticLocal, Method::NormalForm,
                   Method::DoubleSc}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("exact"), ConfigError);
  CHECK(is_midpoint_method(Method::DoubleSc));
  CHECK(is_midpoint_method(Method::NormalForm));
  CHECK_FALSE(is_midpoint_method(Method::ShortTime));
  CHECK_THROWS_AS(check_method(HamiltonianModel::kerr(1.0), Method::Closed), ConfigError);
  CHECK_THROWS_AS(check_method(quartic_model(), Method::NormalForm), ConfigError);
  CHECK_THROWS_AS(check_method(bundled("ho2d"), Method::ShortTime), ConfigError);
}

TEST_CASE("Observable parsing and evaluation") {
  auto ho = HamiltonianModel::harmonic(1.0);
  PhasePoint x{0.5, -1.5};
  CHECK(Observable::parse("identity")(ho, x, 1.0) == 1.0);
  CHECK(Observable::parse("H")(ho, x, 1.0) == doctest::Approx(eval(ho, x)));
  CHECK(Observable::parse("H2_classical")(ho, x, 1.0) == doctest::Approx(std::pow(eval(ho, x), 2)));
  CHECK(Observable::parse("H2")(ho, x, 0.5) == doctest::Approx(moyal_square(ho, x, 0.5)));
  CHECK(Observable::parse("p^3")(ho, x, 1.0) == doctest::Approx(0.125));
  CHECK(Observable::parse("q^2")(ho, x, 1.0) == doctest::Approx(2.25));
  CHECK(Observable::parse("coherent:0.5,-1.5")(ho, x, 1.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(Observable::parse("entropy"), ConfigError);
}

TEST_CASE("partition_weyl examples") {
  auto ho = HamiltonianModel::harmonic(1.0);
  ThermalParams params(2.0, 1.0);
  for (Method m : {Method::Closed, Method::DoubleSc}) {
    PartitionResult r = partition_weyl(ho, params, m);
    CHECK(rel_diff(r.z_tilde, ho_z_tilde(2.0)) < 1e-7);
    CHECK(r.z_tilde == doctest::Approx(2.673240).epsilon(1e-6));
    CHECK(rel_diff(r.z, 1.0 / (2 * std::sinh(1.0))) < 1e-7);
    CHECK(r.n_diverged == 0);
  }
  PartitionResult nf = partition_weyl(bundled("normal_form"), params, Method::NormalForm);
  CHECK(nf.z_tilde > 0.0);
  CHECK(rel_diff(partition_weyl(HamiltonianModel::normal_form({1.0}), params, Method::NormalForm).z_tilde,
                 ho_z_tilde(2.0)) < 1e-7);

  PartitionResult cl = partition_weyl(ho, params, Method::Classical);
  CHECK(std::abs(cl.z_tilde - M_PI) <= std::max(cl.error, 1e-9));

  PartitionResult kerr = partition_weyl(HamiltonianModel::kerr(1.0), ThermalParams(4.0, 1.0), Method::Classical);
  CHECK(std::abs(kerr.z_tilde - M_PI * std::sqrt(M_PI / 4.0)) < 1e-6);
  CHECK(kerr.z_tilde == doctest::Approx(2.7841639).epsilon(1e-7));

  CHECK_THROWS_AS(partition_weyl(HamiltonianModel::kerr(1.0), params, Method::Closed), ConfigError);
}

TEST_CASE("thermal_wigner_field examples") {
  auto ho = HamiltonianModel::harmonic(1.0);
  GridSpec grid{-4, 4, -4, 4, 41, 41};
  ThermalParams params(2.0, 1.0);
  ThermalField f = thermal_wigner_field(ho, params, Method::Closed, grid);
  CHECK(f.normalized);
  double z = ho_z_tilde(2.0);
  double worst = 0.0;
  for (int i = 0; i < grid.np; ++i)
    for (int j = 0; j < grid.nq; ++j)
      worst = std::max(worst, std::abs(f.at(i, j) - ho_thermal(PhasePoint{grid.p(i), grid.q(j)}, params, 1.0) / z));
  CHECK(worst < 1e-6);

  ThermalParams cold = ThermalParams::from_theta(20.0, 1.0);
  for (Method m : {Method::Closed, Method::DoubleSc}) {
    CAPTURE(method_name(m));
    ThermalField g = thermal_wigner_field(ho, cold, m, grid);
    double dev = 0.0;
    for (int i = 0; i < grid.np; ++i)
      for (int j = 0; j < grid.nq; ++j) {
        double r2 = grid.p(i) * grid.p(i) + grid.q(j) * grid.q(j);
        dev = std::max(dev, std::abs(g.at(i, j) - std::exp(-r2) / M_PI));
      }
    CHECK(dev < 1e-3);
  }
}

TEST_CASE("thermal_wigner_field: quartic double-sc field is normalized") {
  GridSpec grid{-5, 5, -5, 5, 101, 101};
  ThermalField f = thermal_wigner_field(quartic_model(), ThermalParams(1.0, 1.0), Method::DoubleSc, grid, fast());
  CHECK(std::abs(f.integral() - 1.0) < 1e-3);
}

TEST_CASE("thermal_average examples") {
  auto ho = HamiltonianModel::harmonic(1.0);
  ThermalParams params(2.0, 1.0);
  const double exact = 0.5 / std::tanh(1.0);
  for (Method m : {Method::Closed, Method::DoubleSc}) {
    AverageResult r = thermal_average(ho, params, m, Observable::hamiltonian());
    CHECK(rel_diff(r.value, exact) < 1e-7);
  }
  CHECK(exact == doctest::Approx(0.6565).epsilon(1e-4));

  AverageResult q =
      thermal_average(quartic_model(), ThermalParams(1.0, 1.0), Method::DoubleSc, Observable::hamiltonian(), fast());
  double oracle = spectral_average(quartic_spectrum(), 1.0, SpectralQuantity::Energy);
  CHECK(rel_diff(q.value, oracle) < 0.02);
}

TEST_CASE("energy_variance_and_heat_capacity examples") {
  auto ho = HamiltonianModel::harmonic(1.0);
  EnergyStats s = energy_variance_and_heat_capacity(ho, ThermalParams(2.0, 1.0), Method::Closed);
  CHECK(rel_diff(s.heat_capacity, 1.0 / std::pow(std::sinh(1.0), 2)) < 1e-6);
  CHECK(s.heat_capacity == doctest::Approx(0.7241).epsilon(1e-4));

  EnergyStats hot = energy_variance_and_heat_capacity(ho, ThermalParams(0.01, 1.0), Method::Closed);
  CHECK(std::abs(hot.heat_capacity - 1.0) < 1e-4);
  EnergyStats hot_classical = energy_variance_and_heat_capacity(ho, ThermalParams(0.01, 1.0), Method::Classical);
  CHECK(std::abs(hot_classical.heat_capacity - 1.0) < 1e-4);

  const double beta = 1.0;
  EnergyStats q = energy_variance_and_heat_capacity(quartic_model(), ThermalParams(beta, 1.0), Method::DoubleSc, fast());
  SpectralEnergyStats oracle = spectral_energy_stats(quartic_spectrum(), beta);
  CHECK(rel_diff(q.heat_capacity, oracle.heat_capacity) < 0.05);
  CHECK(rel_diff(q.mean, oracle.mean) < 0.02);
}

TEST_CASE("double-beta partition and lopsided energy examples") {
  auto ho = HamiltonianModel::harmonic(1.0);
  for (double beta : {0.1, 1.0}) {
    PartitionResult st = partition_weyl(ho, ThermalParams(beta, 1.0), Method::ShortTime);
    PartitionResult db = double_beta_partition(ho, 1.0, beta, beta, DoubleBetaForm::ShortTime);
    CHECK(db.z_tilde == doctest::Approx(st.z_tilde).epsilon(1e-12));
  }
  for (DoubleBetaForm form : {DoubleBetaForm::ShortTime, DoubleBetaForm::Metaplectic}) {
    AverageResult e = lopsided_energy(ho, ThermalParams(0.1, 1.0), form);
    CHECK(rel_diff(e.value, 0.5 / std::tanh(0.05)) < 1e-3);
  }
  AverageResult q = lopsided_energy(quartic_model(), ThermalParams(0.2, 1.0), DoubleBetaForm::ShortTime);
  SpectralDecomposition d = diagonalize(quartic_model(), 600, 1.0, 3.0);
  CHECK(rel_diff(q.value, spectral_average(d, 0.2, SpectralQuantity::Energy)) < 0.01);
  CHECK(parse_double_beta_form("metaplectic") == DoubleBetaForm::Metaplectic);
  CHECK_THROWS_AS(parse_double_beta_form("split"), ConfigError);
}

TEST_CASE("energy_from_partition is exact for quadratic models") {
  auto ho = HamiltonianModel::harmonic(1.0);
  AverageResult e = energy_from_partition(ho, ThermalParams(2.0, 1.0), Method::Closed);
  CHECK(rel_diff(e.value, 0.5 / std::tanh(1.0)) < 1e-6);
}

TEST_CASE("property: methods agree at high temperature") {
  const ThermalParams params = ThermalParams::from_theta(0.01, 0.01);
  for (std::string name : {"ho", "quartic", "kerr", "normal_form", "ho2d"}) {
    CAPTURE(name);
    HamiltonianModel model = bundled(name);
    std::vector<Method> methods = {Method::Classical, Method::DoubleSc};
    if (model.dof() == 1) {
      methods.push_back(Method::ShortTime);
      methods.push_back(Method::MetaplecticLocal);
    }
    if (model.has_normal_form()) methods.push_back(Method::NormalForm);
    double lo = INFINITY, hi = -INFINITY;
    for (Method m : methods) {
      double z = partition_weyl(model, params, m, fast()).z_tilde;
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
    CHECK((hi - lo) / lo < 1e-3);
  }
}

TEST_CASE("property: double-sc partition is exact for quadratic models") {
  Gen gen(51);
  for (int trial = 0; trial < 4; ++trial) {
    Mat h = gen.positive_definite(2, 0.4, 2.0);
    auto model = HamiltonianModel::quadratic(h);
    const double omega = std::sqrt(h.determinant());
    for (double theta : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      CAPTURE(theta);
      PartitionResult r = partition_weyl(model, ThermalParams::from_theta(theta, 1.0), Method::DoubleSc);
      CHECK(rel_diff(r.z_tilde, ho_z_tilde(theta, omega)) < 1e-6);
    }
  }
}

TEST_CASE("property: averages are linear and normalized") {
  Gen gen(52);
  struct Case {
    HamiltonianModel model;
    Method method;
  };
  std::vector<Case> cases = {{HamiltonianModel::harmonic(1.0), Method::Closed},
                             {quartic_model(), Method::Classical},
                             {quartic_model(), Method::ShortTime},
                             {quartic_model(), Method::MetaplecticLocal},
                             {bundled("normal_form"), Method::NormalForm},
                             {quartic_model(), Method::DoubleSc}};
  for (auto& c : cases) {
    CAPTURE(method_name(c.method));
    // The short-time form decays inside the thermal window only at small β.
    const double beta_max = c.method == Method::ShortTime ? 0.5 : 1.5;
    ThermalParams params(gen.uniform(0.2, beta_max), 1.0);
    double a = gen.uniform(-2, 2), b = gen.uniform(-2, 2);
    Observable o1 = Observable::position_power(2), o2 = Observable::coherent(PhasePoint{0.3, -0.2});
    Observable combo = Observable::linear_combination({{a, o1}, {b, o2}});
    std::vector<AverageResult> r =
        thermal_averages(c.model, params, c.method, {Observable::identity(), o1, o2, combo}, fast());
    CHECK(std::abs(r[0].value - 1.0) < 1e-12);
    CHECK(r[3].value == doctest::Approx(a * r[1].value + b * r[2].value).epsilon(1e-10));
  }
}

TEST_CASE("property: variance is non-negative") {
  struct Case {
    HamiltonianModel model;
    Method method;
  };
  std::vector<Case> cases = {{HamiltonianModel::harmonic(1.0), Method::Closed},
                             {HamiltonianModel::harmonic(1.0), Method::DoubleSc},
                             {quartic_model(), Method::Classical},
                             {quartic_model(), Method::ShortTime},
                             {HamiltonianModel::harmonic(1.0), Method::ShortTime},
                             {quartic_model(), Method::MetaplecticLocal},
                             {bundled("normal_form"), Method::NormalForm},
                             {HamiltonianModel::kerr(1.0), Method::Classical}};
  for (auto& c : cases) {
    for (double beta : {0.1, 0.5, 2.0}) {
      if (c.method == Method::ShortTime && !c.model.is_quadratic() && beta > 0.5) continue;
      CAPTURE(method_name(c.method));
      CAPTURE(beta);
      EnergyStats s = energy_variance_and_heat_capacity(c.model, ThermalParams(beta, 1.0), c.method, fast());
      CHECK(s.variance >= 0.0);
      EnergyStats sc = energy_variance_and_heat_capacity(c.model, ThermalParams(beta, 1.0), c.method, fast(), 1.0, true);
      CHECK(sc.variance >= 0.0);
    }
  }
}

TEST_CASE("property: long thermal time averages collapse onto O(0)") {
  // The ground-state width is √ħ, so the limit is taken at small ħ.
  const double hbar = 0.01;
  const ThermalParams params = ThermalParams::from_theta(30.0, hbar);
  auto ho = HamiltonianModel::harmonic(1.0);
  Observable o = Observable::polynomial({{1.0, 0, 0}, {1.0, 2, 0}, {0.5, 0, 1}, {0.3, 1, 3}, {2.0, 0, 4}});
  const double at_origin = 1.0;
  for (Method m : {Method::Closed, Method::DoubleSc}) {
    AverageResult r = thermal_average(ho, params, m, o);
    CHECK(rel_diff(r.value, at_origin) < 0.01);
  }
}

TEST_CASE("property: results are bit-identical across worker counts") {
  ComputeOptions one = fast(), many = fast();
  one.workers = 1;
  many.workers = 4;
  ThermalParams params(1.0, 1.0);
  PartitionResult a = partition_weyl(quartic_model(), params, Method::DoubleSc, one);
  PartitionResult b = partition_weyl(quartic_model(), params, Method::DoubleSc, many);
  CHECK(a.z_tilde == b.z_tilde);
  CHECK(a.error == b.error);
  CHECK(a.n_diverged == b.n_diverged);
  GridSpec grid{-3, 3, -3, 3, 31, 31};
  ThermalField f1 = thermal_wigner_field(quartic_model(), params, Method::DoubleSc, grid, one);
  ThermalField f2 = thermal_wigner_field(quartic_model(), params, Method::DoubleSc, grid, many);
  CHECK(f1.values == f2.values);
}

TEST_CASE("property: refinement changes results by less than the error estimate") {
  ThermalParams params(1.0, 1.0);
  for (Method m : {Method::Classical, Method::MetaplecticLocal, Method::DoubleSc}) {
    PartitionResult coarse = partition_weyl(quartic_model(), params, m, fast(1e-6));
    PartitionResult fine = partition_weyl(quartic_model(), params, m, fast(1e-12));
    CHECK(std::abs(coarse.z_tilde - fine.z_tilde) <= coarse.error + 1e-15);
  }
}

TEST_CASE("property: normalized fields integrate to one on the grid") {
  GridSpec grid{-6, 6, -6, 6, 121, 121};
  for (Method m : {Method::Classical, Method::ShortTime, Method::MetaplecticLocal}) {
    ThermalField f = thermal_wigner_field(quartic_model(), ThermalParams(0.5, 1.0), m, grid);
    CHECK(f.normalized);
    CHECK(std::abs(f.integral() - 1.0) < 1e-3);
  }
}

TEST_CASE("short-time integrals raise an error where the form stops decaying") {
  CHECK_THROWS_AS(partition_weyl(quartic_model(), ThermalParams(2.0, 1.0), Method::ShortTime), QuadratureError);
}
