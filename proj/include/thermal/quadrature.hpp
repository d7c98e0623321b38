#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "thermal/hamiltonian.hpp"

namespace thermal {

// Writes n_components values for the point X. Throwing DivergenceError or
// StiffnessError marks the point as diverged; it then contributes zero.
using Integrand = std::function<void(const double* x, double* out)>;

struct Box {
  Vec lo;
  Vec hi;
};

struct QuadratureOptions {
  double rel_tol = 1e-10;
  int initial_points = 33;  // per dimension, odd
  int max_points = 1025;    // per dimension after refinement
  std::size_t max_evaluations = 4'000'000;
  double support_threshold = 1e-14;  // relative to max |f₀|
  double boundary_tol = 1e-10;       // see `expand`
  int max_adaptations = 24;
  // When false the box never grows past its initial extent, and f₀ above
  // boundary_tol · max |f₀| on that extent throws QuadratureError.
  bool expand = true;
  int workers = 0;
};

struct QuadratureResult {
  std::vector<double> values;
  std::vector<double> errors;  // |I(n) - I(previous level)|
  std::size_t n_diverged = 0;
  std::size_t n_points = 0;
  int points_per_dim = 0;
  Box box;
};

// Tensor trapezoidal rule with nested refinement n → 2n-1. Component 0 is
// the weight that drives the choice of box: the box is shrunk to the
// significant support of f₀ and doubled along any axis where f₀ reaches the
// boundary. Refinement stops when every component changes by at most
// rel_tol · ∫|f_k|. Throws QuadratureError on non-convergence.
QuadratureResult integrate_box(const Integrand& f, int n_components, Box box, const QuadratureOptions& opts = {});

// Bounding box of {X : βH(X) ≤ βH_min + window} around the minimum of H,
// found along each coordinate axis. Throws ConfigError when H does not
// rise by `window`/β along some axis.
Box energy_window(const HamiltonianModel& model, double beta, double window = 40.0);

}  // namespace thermal
