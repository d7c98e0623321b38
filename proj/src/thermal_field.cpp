#include "thermal/thermal_field.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "thermal/error.hpp"
#include "thermal/format.hpp"
#include "thermal/parallel.hpp"

namespace thermal {

GridSpec GridSpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 6) throw ConfigError("grid must be \"pmin,pmax,qmin,qmax,np,nq\", got \"" + text + "\"");
  GridSpec g;
  try {
    std::size_t used = 0;
    auto num = [&](const std::string& s) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    };
    auto count = [&](const std::string& s) {
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    };
    g.p_min = num(parts[0]);
    g.p_max = num(parts[1]);
    g.q_min = num(parts[2]);
    g.q_max = num(parts[3]);
    g.np = count(parts[4]);
    g.nq = count(parts[5]);
  } catch (const std::logic_error&) {
    throw ConfigError("grid has a malformed entry: \"" + text + "\"");
  }
  g.validate();
  return g;
}

std::string GridSpec::to_string() const {
  return format_double(p_min) + "," + format_double(p_max) + "," + format_double(q_min) + "," +
         format_double(q_max) + "," + std::to_string(np) + "," + std::to_string(nq);
}

void GridSpec::validate() const {
  if (!std::isfinite(p_min) || !std::isfinite(p_max) || !std::isfinite(q_min) || !std::isfinite(q_max)) {
    throw ConfigError("grid bounds must be finite");
  }
  if (np < 2 || nq < 2) throw ConfigError("grid needs at least 2 points per axis");
  if (!(p_max > p_min) || !(q_max > q_min)) throw ConfigError("grid bounds must be increasing");
}

namespace {

double trapezoid(const GridSpec& g, const std::vector<double>& v) {
  std::vector<double> terms(g.size());
  for (int i = 0; i < g.np; ++i) {
    const double wp = (i == 0 || i == g.np - 1) ? 0.5 : 1.0;
    for (int j = 0; j < g.nq; ++j) {
      const double wq = (j == 0 || j == g.nq - 1) ? 0.5 : 1.0;
      terms[g.index(i, j)] = wp * wq * v[g.index(i, j)];
    }
  }
  return pairwise_sum(terms.data(), terms.size()) * g.dp() * g.dq();
}

void check_same_grid(const ThermalField& a, const ThermalField& b) {
  if (a.grid.to_string() != b.grid.to_string()) throw ConfigError("fields live on different grids");
}

}  // namespace

double ThermalField::integral() const { return trapezoid(grid, values); }

double ThermalField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_difference(const ThermalField& a, const ThermalField& b) {
  check_same_grid(a, b);
  double m = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) m = std::max(m, std::abs(a.values[k] - b.values[k]));
  return m;
}

double l1_distance(const ThermalField& a, const ThermalField& b) {
  check_same_grid(a, b);
  std::vector<double> diff(a.values.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = std::abs(a.values[k] - b.values[k]);
  return trapezoid(a.grid, diff);
}

void write_field_csv(std::ostream& out, const ThermalField& field) {
  out << "p,q,value\n";
  for (int i = 0; i < field.grid.np; ++i) {
    const std::string p = format_double(field.grid.p(i));
    for (int j = 0; j < field.grid.nq; ++j) {
      out << p << ',' << format_double(field.grid.q(j)) << ',' << format_double(field.at(i, j)) << '\n';
    }
  }
}

nlohmann::json field_metadata(const ThermalField& field) {
  const GridSpec& g = field.grid;
  return {{"method", field.method},
          {"beta", field.beta},
          {"hbar", field.hbar},
          {"normalized", field.normalized},
          {"grid",
           {{"p_min", g.p_min}, {"p_max", g.p_max}, {"q_min", g.q_min}, {"q_max", g.q_max}, {"np", g.np}, {"nq", g.nq}}}};
}

}  // namespace thermal
