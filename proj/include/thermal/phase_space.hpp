#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <utility>

namespace thermal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// A point x = (p_1..p_N, q_1..q_N) of the 2N-dimensional phase space.
class PhasePoint {
 public:
  explicit PhasePoint(Vec coords);
  PhasePoint(std::initializer_list<double> coords);

  static PhasePoint origin(int dof);

  int dof() const { return static_cast<int>(coords_.size() / 2); }
  int dim() const { return static_cast<int>(coords_.size()); }
  double p(int k) const { return coords_[k]; }
  double q(int k) const { return coords_[dof() + k]; }
  double operator[](int i) const { return coords_[i]; }
  const Vec& coords() const { return coords_; }

 private:
  Vec coords_;
};

// Standard symplectic matrix in (p, q) blocks: J = [[0, -I], [I, 0]].
Mat symplectic_matrix(int dof);

// J applied to a 2N-vector without forming the matrix.
Vec apply_j(const Vec& v);

// (J a) . b; antisymmetric. Throws DimensionError on mismatched or odd lengths.
double symplectic_form(const Vec& a, const Vec& b);

struct ChordCentrePair {
  PhasePoint centre;
  Vec chord;
};

// (x + ξ/2, x - ξ/2).
std::pair<PhasePoint, PhasePoint> endpoints(const ChordCentrePair& pair);

// Inverse of endpoints: centre = (x+ + x-)/2, chord = x+ - x-.
ChordCentrePair centre_chord(const PhasePoint& plus, const PhasePoint& minus);

struct SymplecticTolerance {
  double symplectic = 1e-10;
  double determinant = 1e-10;
};

class SymplecticMatrix {
 public:
  // Validates MᵀJM = J and det M = 1 within `tol`.
  explicit SymplecticMatrix(Mat entries, SymplecticTolerance tol = {});

  const Mat& entries() const { return entries_; }
  // max |MᵀJM - J|
  double symplecticity_defect() const;

 private:
  Mat entries_;
};

double symplecticity_defect(const Mat& m);

// M = (I + JB)⁻¹ (I - JB) for symmetric B. Throws CausticError when I + JB
// is singular.
SymplecticMatrix cayley_monodromy(const Mat& b, SymplecticTolerance tol = {});

}  // namespace thermal
