#include <cmath>
#include <sstream>

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

const SpectralDecomposition& quartic_spectrum() {
  static const SpectralDecomposition d = diagonalize(quartic_model(), 200, 1.0, 1.5);
  return d;
}

double kerr_sum(double beta, int power) {
  double z = 0.0, m = 0.0;
  for (int j = 0; j < 100; ++j) {
    const double e = (j + 0.5) * (j + 0.5);
    z += std::exp(-beta * e);
    m += std::pow(e, power) * std::exp(-beta * e);
  }
  return power == 0 ? z : m / z;
}

}  // namespace

TEST_CASE("diagonalize examples") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 40, 1.0, 1.0);
  REQUIRE(ho.levels() > 0);
  for (int j = 0; j < ho.levels(); ++j) CHECK(ho.eigenvalues[j] == doctest::Approx(j + 0.5).epsilon(1e-14));
  CHECK(ho.eigenvalues[0] == doctest::Approx(0.5).epsilon(1e-15));

  SpectralDecomposition kerr = diagonalize(HamiltonianModel::kerr(1.0), 60, 1.0);
  CHECK(kerr.eigenvalues[1] == doctest::Approx(2.25).epsilon(1e-14));
  CHECK(kerr.omega_b == 1.0);

  SpectralDecomposition q300 = diagonalize(quartic_model(), 300, 1.0, 1.5);
  CHECK(std::abs(quartic_spectrum().eigenvalues[0] - q300.eigenvalues[0]) < 1e-10);
  CHECK(quartic_spectrum().eigenvalues[0] == doctest::Approx(0.559146327183519).epsilon(1e-12));
}

TEST_CASE("diagonalize reports an undersized basis") {
  auto cubic = HamiltonianModel::polynomial({{0.5, 2, 0}, {0.5, 0, 2}, {0.1, 0, 3}, {0.1, 0, 4}});
  try {
    diagonalize(cubic, 6, 1.0, 4.0);
    FAIL("expected BasisTooSmallError");
  } catch (const BasisTooSmallError& e) {
    CHECK(e.suggested_size() == 12);
  }
}

TEST_CASE("spectral_partition examples") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 120, 1.0, 1.0);
  CHECK(spectral_partition(ho, 2.0) == doctest::Approx(1.0 / (2 * std::sinh(1.0))).epsilon(1e-14));
  CHECK(spectral_partition(ho, 2.0) == doctest::Approx(std::exp(-1.0) / (1 - std::exp(-2.0))).epsilon(1e-14));
  const double beta = 50.0;
  CHECK(std::abs(std::log(spectral_partition(ho, beta)) + beta * ho.eigenvalues[0]) < 1e-15);

  SpectralDecomposition kerr = diagonalize(HamiltonianModel::kerr(1.0), 60, 1.0);
  CHECK(spectral_partition(kerr, 1.0) == doctest::Approx(kerr_sum(1.0, 0)).epsilon(1e-14));
  CHECK(spectral_partition(kerr, 1.0) == doctest::Approx(0.8861).epsilon(1e-4));
}

TEST_CASE("spectral_average examples") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 120, 1.0, 1.0);
  CHECK(spectral_average(ho, 2.0, SpectralQuantity::Energy) == doctest::Approx(0.5 / std::tanh(1.0)).epsilon(1e-14));
  try {
    spectral_average(ho, 0.01, SpectralQuantity::Energy);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.beta_e_max() < 40.0);
  }
  SpectralDecomposition kerr = diagonalize(HamiltonianModel::kerr(1.0), 60, 1.0);
  CHECK(spectral_average(kerr, 1.0, SpectralQuantity::Energy) == doctest::Approx(kerr_sum(1.0, 1)).epsilon(1e-13));
  CHECK(spectral_average(kerr, 1.0, SpectralQuantity::EnergySquared) ==
        doctest::Approx(kerr_sum(1.0, 2)).epsilon(1e-13));
  SpectralEnergyStats st = spectral_energy_stats(ho, 2.0);
  CHECK(st.heat_capacity == doctest::Approx(1.0 / std::pow(std::sinh(1.0), 2)).epsilon(1e-12));
}

TEST_CASE("spectral_thermal_wigner examples") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 60, 1.0, 1.0);
  GridSpec grid{-4, 4, -4, 4, 41, 41};
  ThermalField f = spectral_thermal_wigner(ho, 20.0, grid);
  double dev = 0.0;
  for (int i = 0; i < grid.np; ++i)
    for (int j = 0; j < grid.nq; ++j) {
      double r2 = grid.p(i) * grid.p(i) + grid.q(j) * grid.q(j);
      dev = std::max(dev, std::abs(f.at(i, j) - std::exp(-r2) / M_PI));
    }
  CHECK(dev < 1e-3);

  for (int level : {0, 1}) {
    ThermalField w = spectral_level_wigner(ho, level, grid);
    double worst = 0.0;
    for (int i = 0; i < grid.np; ++i)
      for (int j = 0; j < grid.nq; ++j)
        worst = std::max(worst, std::abs(w.at(i, j) - fock_wigner(level, PhasePoint{grid.p(i), grid.q(j)}, 1.0)));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("spectral_thermal_wigner: quartic field against the double-sc field") {
  GridSpec grid{-5, 5, -5, 5, 101, 101};
  ThermalField spectral = spectral_thermal_wigner(quartic_spectrum(), 1.0, grid);
  ComputeOptions opts;
  opts.quadrature.rel_tol = 1e-8;
  ThermalField sc = thermal_wigner_field(quartic_model(), ThermalParams(1.0, 1.0), Method::DoubleSc, grid, opts);
  CHECK(l1_distance(spectral, sc) < 0.02);
}

TEST_CASE("spectral_thermal_wigner flags unresolved grids") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 60, 1.0, 1.0);
  CHECK_THROWS_AS(spectral_thermal_wigner(ho, 2.0, GridSpec{-1, 1, -1, 1, 11, 11}), ResolutionError);
}

TEST_CASE("spectral_thermal_weyl reproduces the exact harmonic form") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 80, 1.0, 1.0);
  for (PhasePoint x : {PhasePoint{0, 0}, PhasePoint{1, 0.5}, PhasePoint{-1.2, 0.3}}) {
    CHECK(spectral_thermal_weyl(ho, 2.0, x) == doctest::Approx(ho_thermal(x, {2.0, 1.0}, 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("hermite_functions are orthonormal") {
  const int n = 12;
  const double hbar = 0.7, omega = 1.3, l = 12.0;
  const int m = 2401;
  const double h = 2 * l / (m - 1);
  Mat gram = Mat::Zero(n, n);
  for (int k = 0; k < m; ++k) {
    std::vector<double> phi = hermite_functions(n, -l + k * h, hbar, omega);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) gram(a, b) += h * phi[a] * phi[b];
  }
  CHECK((gram - Mat::Identity(n, n)).lpNorm<Eigen::Infinity>() < 1e-10);
  std::vector<double> far = hermite_functions(300, 40.0, 1.0, 1.0);
  for (double v : far) CHECK(std::isfinite(v));
}

TEST_CASE("write_spectrum_csv format") {
  SpectralDecomposition ho = diagonalize(HamiltonianModel::harmonic(1.0), 10, 1.0, 1.0);
  std::ostringstream out;
  write_spectrum_csv(out, ho);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "j,E_j");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    CHECK(std::stoi(line.substr(0, comma)) == rows);
    CHECK(std::stod(line.substr(comma + 1)) == doctest::Approx(rows + 0.5).epsilon(1e-14));
    ++rows;
  }
  CHECK(rows == ho.levels());
}

TEST_CASE("property: Jacobi eigensolver agrees with a reference solver") {
  Gen gen(61);
  for (int trial = 0; trial < 20; ++trial) {
    int n = gen.integer(2, 40);
    Mat a = gen.symmetric(n, 3.0);
    Vec values;
    Mat vectors;
    jacobi_eigensolver(a, values, vectors);
    Eigen::SelfAdjointEigenSolver<Mat> ref(a);
    CHECK((values - ref.eigenvalues()).lpNorm<Eigen::Infinity>() < 1e-12 * std::max(1.0, a.norm()));
    CHECK((vectors.transpose() * vectors - Mat::Identity(n, n)).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((a * vectors - vectors * values.asDiagonal()).lpNorm<Eigen::Infinity>() < 1e-10 * std::max(1.0, a.norm()));
    for (int i = 1; i < n; ++i) CHECK(values[i - 1] <= values[i]);
  }
}

TEST_CASE("property: assembled matrices are Hermitian and Weyl-ordered") {
  Gen gen(62);
  std::vector<HamiltonianModel> models = {
      quartic_model(), gen.polynomial_model(),
      HamiltonianModel::polynomial({{0.5, 2, 0}, {0.5, 0, 2}, {0.05, 1, 2}, {0.1, 4, 0}, {0.1, 0, 4}}),
      HamiltonianModel::normal_form({1.0, 0.05})};
  for (auto& m : models) {
    CMat h = hamiltonian_matrix(m, 60, 1.0, 1.2);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()));
  }
  // The Weyl symbol of (p̂q̂ + q̂p̂)/2 is pq; its ground state matches the
  // rotated oscillator (p² + q²)/2 + λpq with frequency √(1 - λ²).
  const double lambda = 0.3;
  auto rotated = HamiltonianModel::polynomial({{0.5, 2, 0}, {0.5, 0, 2}, {lambda, 1, 1}});
  SpectralDecomposition d = diagonalize(rotated, 120, 1.0, 1.0);
  CHECK(d.eigenvalues[0] == doctest::Approx(0.5 * std::sqrt(1 - lambda * lambda)).epsilon(1e-10));
}

TEST_CASE("property: odd momentum powers give real spectra invariant under p -> -p") {
  auto plus = HamiltonianModel::polynomial({{0.5, 2, 0}, {0.5, 0, 2}, {0.05, 1, 2}, {0.1, 4, 0}, {0.1, 0, 4}});
  auto minus = HamiltonianModel::polynomial({{0.5, 2, 0}, {0.5, 0, 2}, {-0.05, 1, 2}, {0.1, 4, 0}, {0.1, 0, 4}});
  SpectralDecomposition a = diagonalize(plus, 150, 1.0, 1.5);
  SpectralDecomposition b = diagonalize(minus, 150, 1.0, 1.5);
  CHECK_FALSE(a.real_vectors);
  Eigen::SelfAdjointEigenSolver<CMat> ref(hamiltonian_matrix(plus, 150, 1.0, 1.5));
  const int n = std::min(a.levels(), b.levels());
  REQUIRE(n > 10);
  for (int j = 0; j < n; ++j) {
    CHECK(a.eigenvalues[j] == doctest::Approx(b.eigenvalues[j]).epsilon(1e-10));
    CHECK(a.eigenvalues[j] == doctest::Approx(ref.eigenvalues()[j]).epsilon(1e-10));
  }
}

TEST_CASE("property: eigenvalues converge under basis doubling") {
  SpectralDecomposition small = diagonalize(quartic_model(), 150, 1.0, 1.5);
  SpectralDecomposition large = diagonalize(quartic_model(), 300, 1.0, 1.5);
  const int n = std::min(small.levels(), 150 / 4);
  REQUIRE(n > 0);
  for (int j = 0; j < n; ++j) CHECK(rel_diff(small.eigenvalues[j], large.eigenvalues[j]) < 1e-9);
  for (int j = 1; j < large.levels(); ++j) CHECK(large.eigenvalues[j - 1] <= large.eigenvalues[j]);
  const CMat& v = large.eigenvectors;
  CHECK((v.adjoint() * v - CMat::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("property: level Wigner functions integrate to one") {
  const SpectralDecomposition& d = quartic_spectrum();
  GridSpec grid{-8, 8, -8, 8, 161, 161};
  const int levels = 8;
  double total = 0.0;
  for (int j = 0; j < levels; ++j) total += spectral_level_wigner(d, j, grid).integral();
  CHECK(std::abs(total - levels) < 1e-3);
}

TEST_CASE("property: quadratic spectral partition matches the closed form") {
  Mat h(2, 2);
  h << 2.0, 0.0, 0.0, 0.5;
  auto model = HamiltonianModel::quadratic(h);
  SpectralDecomposition d = diagonalize(model, 200, 1.0, 0.5);
  for (double beta : {0.5, 1.0, 3.0}) {
    double closed = partition_weyl(model, ThermalParams(beta, 1.0), Method::Closed).z_tilde;
    CHECK(rel_diff(2 * M_PI * spectral_partition(d, beta), closed) < 1e-8);
  }
  auto ho = HamiltonianModel::harmonic(1.3);
  SpectralDecomposition e = diagonalize(ho, 200, 0.8, 1.3);
  double closed = partition_weyl(ho, ThermalParams(1.0, 0.8), Method::Closed).z_tilde;
  CHECK(rel_diff(2 * M_PI * 0.8 * spectral_partition(e, 1.0), closed) < 1e-8);
}
