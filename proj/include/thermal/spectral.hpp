#pragma once

#include <iosfwd>
#include <vector>

#include "thermal/hamiltonian.hpp"
#include "thermal/thermal_field.hpp"

namespace thermal {

// Eigen-decomposition of a 1-DOF Hamiltonian in the oscillator basis of
// frequency ω_b: q = √(ħ/2ω_b)(a + a†), p = i√(ħω_b/2)(a† - a).
struct SpectralDecomposition {
  int basis_size = 0;
  double hbar = 1.0;
  double omega_b = 1.0;
  Vec eigenvalues;    // converged levels, non-decreasing
  CMat eigenvectors;  // basis_size × levels
  bool real_vectors = true;

  int levels() const { return static_cast<int>(eigenvalues.size()); }
};

// Eigenvalues (ascending) and orthonormal eigenvectors of a real symmetric
// matrix by cyclic Jacobi rotations.
void jacobi_eigensolver(const Mat& a, Vec& eigenvalues, Mat& eigenvectors, double tol = 1e-15, int max_sweeps = 100);

// Weyl-ordered matrix of the model in the first `basis_size` states.
CMat hamiltonian_matrix(const HamiltonianModel& model, int basis_size, double hbar, double omega_b);

// Levels are reported from the bottom up while the last 20% of the basis
// carries < tail_tol of each eigenvector's weight. Kerr models use the
// exact rule E_j = [ħω(j + ½)]² with Fock eigenvectors (ω_b is set to 1).
// Throws BasisTooSmallError when not even the ground state converges.
SpectralDecomposition diagonalize(const HamiltonianModel& model, int basis_size, double hbar, double omega_b = 1.0,
                                  double tail_tol = 1e-8);

// Σ e^{-βE_j}. Throws TruncationError unless βE_max > 40.
double spectral_partition(const SpectralDecomposition& decomp, double beta);

enum class SpectralQuantity { Energy, EnergySquared };

// Σ f(E_j) e^{-βE_j} / Z with f(E) = E or E².
double spectral_average(const SpectralDecomposition& decomp, double beta, SpectralQuantity quantity);

struct SpectralEnergyStats {
  double mean;
  double variance;
  double heat_capacity;  // k_B β² variance
};

SpectralEnergyStats spectral_energy_stats(const SpectralDecomposition& decomp, double beta, double k_b = 1.0);

// Oscillator eigenfunctions φ_0..φ_{n-1} at q (overflow-safe recurrence).
std::vector<double> hermite_functions(int n, double q, double hbar, double omega_b);

// Wigner function of the density matrix Σ_j w_j |ψ_j⟩⟨ψ_j| at (p, q) by
// trapezoidal chord quadrature; weights index the reported levels.
double spectral_wigner_point(const SpectralDecomposition& decomp, const std::vector<double>& weights, double p,
                             double q);

// Wigner function of level j on a grid.
ThermalField spectral_level_wigner(const SpectralDecomposition& decomp, int j, const GridSpec& grid, int workers = 0);

// W_β = (1/Z) Σ_j e^{-βE_j} W_j on a grid. Throws ResolutionError when the
// grid integral of W_β deviates from 1 by more than 1e-2.
ThermalField spectral_thermal_wigner(const SpectralDecomposition& decomp, double beta, const GridSpec& grid,
                                     int workers = 0);

// Weyl symbol of e^{-βĤ} at x: 2πħ Σ_j e^{-βE_j} W_j(x).
double spectral_thermal_weyl(const SpectralDecomposition& decomp, double beta, const PhasePoint& x);

// CSV `j,E_j`.
void write_spectrum_csv(std::ostream& out, const SpectralDecomposition& decomp);

}  // namespace thermal
