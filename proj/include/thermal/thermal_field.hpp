#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace thermal {

// Rectangular (p, q) grid for one degree of freedom.
struct GridSpec {
  double p_min = -4.0, p_max = 4.0, q_min = -4.0, q_max = 4.0;
  int np = 101, nq = 101;

  // "pmin,pmax,qmin,qmax,np,nq"
  static GridSpec parse(const std::string& text);
  std::string to_string() const;
  void validate() const;

  double p(int i) const { return np == 1 ? p_min : p_min + (p_max - p_min) * i / (np - 1); }
  double q(int j) const { return nq == 1 ? q_min : q_min + (q_max - q_min) * j / (nq - 1); }
  double dp() const { return np == 1 ? 0.0 : (p_max - p_min) / (np - 1); }
  double dq() const { return nq == 1 ? 0.0 : (q_max - q_min) / (nq - 1); }
  std::size_t size() const { return static_cast<std::size_t>(np) * nq; }
  // Row-major with q fastest.
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * nq + j; }
};

struct ThermalField {
  GridSpec grid;
  std::vector<double> values;
  std::string method;
  double beta = 0.0;
  double hbar = 1.0;
  bool normalized = false;

  double at(int i, int j) const { return values[grid.index(i, j)]; }
  // Trapezoidal integral over the grid.
  double integral() const;
  double max_abs() const;
};

double max_abs_difference(const ThermalField& a, const ThermalField& b);
// Trapezoidal ∫|a - b|.
double l1_distance(const ThermalField& a, const ThermalField& b);

// CSV `p,q,value`, q fastest.
void write_field_csv(std::ostream& out, const ThermalField& field);
nlohmann::json field_metadata(const ThermalField& field);

}  // namespace thermal
