#include "thermal/phase_space.hpp"

#include <cmath>
#include <string>

#include "thermal/error.hpp"

namespace thermal {

namespace {

void check_phase_vector(const Vec& v) {
  if (v.size() == 0 || v.size() % 2 != 0) {
    throw DimensionError("phase-space vector must have even positive length, got " +
                         std::to_string(v.size()));
  }
}

}  // namespace

PhasePoint::PhasePoint(Vec coords) : coords_(std::move(coords)) {
  check_phase_vector(coords_);
  for (Eigen::Index i = 0; i < coords_.size(); ++i) {
    if (!std::isfinite(coords_[i])) throw ConfigError("phase point has non-finite entry");
  }
}

PhasePoint::PhasePoint(std::initializer_list<double> coords)
    : PhasePoint(Vec(Eigen::Map<const Vec>(coords.begin(), static_cast<Eigen::Index>(coords.size())))) {}

PhasePoint PhasePoint::origin(int dof) { return PhasePoint(Vec::Zero(2 * dof)); }

Mat symplectic_matrix(int dof) {
  Mat j = Mat::Zero(2 * dof, 2 * dof);
  j.topRightCorner(dof, dof) = -Mat::Identity(dof, dof);
  j.bottomLeftCorner(dof, dof) = Mat::Identity(dof, dof);
  return j;
}

Vec apply_j(const Vec& v) {
  check_phase_vector(v);
  const Eigen::Index n = v.size() / 2;
  Vec out(v.size());
  out.head(n) = -v.tail(n);
  out.tail(n) = v.head(n);
  return out;
}

double symplectic_form(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("symplectic_form: dimension mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
  return apply_j(a).dot(b);
}

std::pair<PhasePoint, PhasePoint> endpoints(const ChordCentrePair& pair) {
  if (pair.chord.size() != pair.centre.dim()) throw DimensionError("chord/centre dimension mismatch");
  const Vec half = 0.5 * pair.chord;
  return {PhasePoint(pair.centre.coords() + half), PhasePoint(pair.centre.coords() - half)};
}

ChordCentrePair centre_chord(const PhasePoint& plus, const PhasePoint& minus) {
  if (plus.dim() != minus.dim()) throw DimensionError("endpoint dimension mismatch");
  return {PhasePoint(0.5 * (plus.coords() + minus.coords())), plus.coords() - minus.coords()};
}

double symplecticity_defect(const Mat& m) {
  const Mat j = symplectic_matrix(static_cast<int>(m.rows() / 2));
  return (m.transpose() * j * m - j).cwiseAbs().maxCoeff();
}

SymplecticMatrix::SymplecticMatrix(Mat entries, SymplecticTolerance tol) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() % 2 != 0 || entries_.rows() == 0) {
    throw DimensionError("symplectic matrix must be square with even size");
  }
  const double defect = thermal::symplecticity_defect(entries_);
  if (defect > tol.symplectic) {
    throw NumericalError("matrix is not symplectic: |MᵀJM - J| = " + std::to_string(defect));
  }
  const double det = entries_.determinant();
  if (std::abs(det - 1.0) > tol.determinant) {
    throw NumericalError("symplectic matrix determinant " + std::to_string(det) + " != 1");
  }
}

double SymplecticMatrix::symplecticity_defect() const { return thermal::symplecticity_defect(entries_); }

SymplecticMatrix cayley_monodromy(const Mat& b, SymplecticTolerance tol) {
  if (b.rows() != b.cols() || b.rows() % 2 != 0 || b.rows() == 0) {
    throw DimensionError("Cayley parameter must be square with even size");
  }
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
    throw ConfigError("Cayley parameter must be symmetric");
  }
  const auto n = b.rows();
  const Mat jb = symplectic_matrix(static_cast<int>(n / 2)) * b;
  const Mat plus = Mat::Identity(n, n) + jb;
  Eigen::FullPivLU<Mat> lu(plus);
  // Relative pivot threshold; I + JB has unit scale when B is small.
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    throw CausticError("I + JB is singular (caustic)");
  }
  return SymplecticMatrix(lu.solve(Mat::Identity(n, n) - jb), tol);
}

}  // namespace thermal
