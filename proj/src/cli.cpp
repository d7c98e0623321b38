#include "thermal/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thermal/double_dynamics.hpp"
#include "thermal/error.hpp"
#include "thermal/format.hpp"
#include "thermal/spectral.hpp"
#include "thermal/thermal_averages.hpp"

namespace thermal::cli {

using nlohmann::json;

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3 && parts.size() != 4) {
    throw ConfigError("sweep must be start:stop:count[:geometric], got \"" + text + "\"");
  }
  double start = 0.0, stop = 0.0;
  long count = 0;
  try {
    std::size_t used = 0;
    start = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument(parts[0]);
    stop = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
    count = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument(parts[2]);
  } catch (const std::logic_error&) {
    throw ConfigError("sweep has a malformed entry: \"" + text + "\"");
  }
  bool geometric = false;
  if (parts.size() == 4) {
    if (parts[3] == "geometric") {
      geometric = true;
    } else if (parts[3] != "linear") {
      throw ConfigError("sweep spacing must be 'geometric' or 'linear', got \"" + parts[3] + "\"");
    }
  }
  if (count < 1) throw ConfigError("sweep count must be at least 1");
  if (!std::isfinite(start) || !std::isfinite(stop)) throw ConfigError("sweep bounds must be finite");
  if (geometric && !(start > 0.0 && stop > 0.0)) throw ConfigError("geometric sweep needs positive bounds");
  std::vector<double> values(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    values[static_cast<std::size_t>(i)] = geometric ? start * std::pow(stop / start, t) : start + t * (stop - start);
  }
  if (count > 1) values.back() = stop;
  return values;
}

namespace {

struct Options {
  std::string command;
  std::string model_path;
  std::string method;
  std::string methods;
  double beta = 0.0;
  bool beta_set = false;
  std::string sweep;
  double hbar = 1.0;
  std::string grid;
  std::string out;
  int workers = 0;
  double rtol = 1e-10;
  double atol = 1e-10;
  double quad_rtol = 1e-10;
  double window = 40.0;
  std::string observable = "H";
  int basis = 200;
  double omega_b = 1.0;
  std::string form = "short-time";
  std::string dump_trajectory;
  std::string midpoint;
};

struct MethodSpec {
  std::string name;
  bool spectral = false;
  Method method = Method::Classical;
};

MethodSpec parse_method_spec(const std::string& name) {
  if (name == "spectral") return {name, true, Method::Classical};
  return {name, false, parse_method(name)};
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

class Runner {
 public:
  Runner(const Options& opts, std::ostream& out) : o_(opts), out_(out) {
    if (o_.model_path.empty()) throw ConfigError("--model is required");
    model_ = std::make_unique<HamiltonianModel>(HamiltonianModel::load(o_.model_path));
    if (!(o_.hbar > 0.0) || !std::isfinite(o_.hbar)) throw ConfigError("--hbar must be positive");
    if (!(o_.rtol > 0.0) || !(o_.atol > 0.0) || !(o_.quad_rtol > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(o_.window > 0.0)) throw ConfigError("--window must be positive");
    compute_.dynamics.rtol = o_.rtol;
    compute_.dynamics.atol = o_.atol;
    compute_.quadrature.rel_tol = o_.quad_rtol;
    compute_.window = o_.window;
    compute_.workers = o_.workers;
  }

  int dispatch() {
    if (!o_.dump_trajectory.empty()) dump_trajectory();
    if (o_.command == "wigner") return wigner();
    if (o_.command == "partition") return partition();
    if (o_.command == "average") return average();
    if (o_.command == "sweep") return sweep();
    if (o_.command == "compare") return compare();
    if (o_.command == "spectrum") return spectrum();
    throw ConfigError("unknown command '" + o_.command + "'");
  }

 private:
  // ---- configuration ---------------------------------------------------------

  json config_echo() const {
    json c = {{"command", o_.command},
              {"model_path", o_.model_path},
              {"model", model_->to_json()},
              {"hbar", o_.hbar},
              {"rtol", o_.rtol},
              {"atol", o_.atol},
              {"quad_rtol", o_.quad_rtol},
              {"window", o_.window}};
    if (!o_.method.empty()) c["method"] = o_.method;
    if (!o_.methods.empty()) c["methods"] = o_.methods;
    if (o_.beta_set) c["beta"] = o_.beta;
    if (!o_.sweep.empty()) c["sweep"] = o_.sweep;
    if (!o_.grid.empty()) c["grid"] = o_.grid;
    if (!o_.out.empty()) c["out"] = o_.out;
    if (o_.command == "average" || o_.command == "sweep" || o_.command == "compare") c["observable"] = o_.observable;
    if (uses_spectral() || o_.command == "spectrum") {
      c["basis"] = o_.basis;
      c["omega_b"] = o_.omega_b;
    }
    if (o_.observable == "lopsided_H") c["form"] = o_.form;
    if (!o_.dump_trajectory.empty()) {
      c["dump_trajectory"] = o_.dump_trajectory;
      c["midpoint"] = o_.midpoint;
    }
    return c;
  }

  bool uses_spectral() const {
    return o_.method == "spectral" || o_.methods.find("spectral") != std::string::npos;
  }

  std::vector<MethodSpec> method_list(std::size_t at_least) const {
    std::vector<MethodSpec> list;
    if (!o_.methods.empty()) {
      for (const auto& m : split(o_.methods, ',')) list.push_back(parse_method_spec(m));
    } else if (!o_.method.empty()) {
      list.push_back(parse_method_spec(o_.method));
    }
    if (list.size() < at_least) {
      throw ConfigError(at_least > 1 ? "--methods needs at least " + std::to_string(at_least) + " methods"
                                     : "--method is required");
    }
    for (const auto& m : list) {
      if (!m.spectral) check_method(*model_, m.method);
    }
    return list;
  }

  MethodSpec single_method() const {
    if (!o_.methods.empty()) throw ConfigError("this command takes --method, not --methods");
    return method_list(1).front();
  }

  std::vector<double> betas() const {
    if (!o_.sweep.empty() && o_.beta_set) throw ConfigError("give either --beta or --sweep, not both");
    std::vector<double> b = o_.sweep.empty() ? std::vector<double>{} : parse_sweep(o_.sweep);
    if (o_.beta_set) b.push_back(o_.beta);
    if (b.empty()) throw ConfigError("--beta or --sweep is required");
    for (double v : b) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("beta values must be positive");
    }
    return b;
  }

  double single_beta() const {
    if (!o_.sweep.empty()) throw ConfigError("this command takes --beta, not --sweep");
    if (!o_.beta_set) throw ConfigError("--beta is required");
    if (!(o_.beta > 0.0) || !std::isfinite(o_.beta)) throw ConfigError("--beta must be positive");
    return o_.beta;
  }

  GridSpec grid() const {
    if (o_.grid.empty()) throw ConfigError("--grid is required");
    return GridSpec::parse(o_.grid);
  }

  const SpectralDecomposition& decomposition() {
    if (!decomp_) {
      if (o_.basis < 1) throw ConfigError("--basis must be positive");
      if (!(o_.omega_b > 0.0)) throw ConfigError("--omega-b must be positive");
      decomp_ = std::make_unique<SpectralDecomposition>(diagonalize(*model_, o_.basis, o_.hbar, o_.omega_b));
    }
    return *decomp_;
  }

  // ---- output ------------------------------------------------------------------

  void emit_csv(const std::string& csv, json sidecar) {
    if (o_.out.empty()) {
      out_ << csv;
      return;
    }
    write_file(o_.out, csv);
    sidecar["config"] = config_echo();
    write_file(o_.out + ".json", sidecar.dump(2) + "\n");
  }

  void emit_json(json report) {
    report["config"] = config_echo();
    const std::string text = report.dump(2) + "\n";
    if (o_.out.empty()) {
      out_ << text;
    } else {
      write_file(o_.out, text);
    }
  }

  static void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file '" + path + "'");
    f << text;
    if (!f) throw ConfigError("failed writing output file '" + path + "'");
  }

  // ---- quantities ----------------------------------------------------------------

  struct Value {
    double value = 0.0;
    double error = 0.0;
    std::size_t n_diverged = 0;
  };

  Value quantity(const MethodSpec& m, double beta, const std::string& name) {
    const ThermalParams params(beta, o_.hbar);
    if (m.spectral) return spectral_quantity(beta, name);
    if (name == "Z_tilde" || name == "Z") {
      const PartitionResult r = partition_weyl(*model_, params, m.method, compute_);
      const double scale = name == "Z" ? r.z / r.z_tilde : 1.0;
      return {name == "Z" ? r.z : r.z_tilde, r.error * scale, r.n_diverged};
    }
    if (name == "variance" || name == "heat_capacity" || name == "variance_classical" ||
        name == "heat_capacity_classical") {
      const bool classical = name.find("_classical") != std::string::npos;
      const EnergyStats s = energy_variance_and_heat_capacity(*model_, params, m.method, compute_, 1.0, classical);
      const bool var = name.rfind("variance", 0) == 0;
      return {var ? s.variance : s.heat_capacity, var ? s.error : s.error * beta * beta, s.n_diverged};
    }
    if (name == "lopsided_H") {
      const AverageResult a = lopsided_energy(*model_, params, parse_double_beta_form(o_.form), compute_);
      return {a.value, a.error, a.n_diverged};
    }
    if (name == "H_from_Z") {
      const AverageResult a = energy_from_partition(*model_, params, m.method, compute_);
      return {a.value, a.error, a.n_diverged};
    }
    const AverageResult a = thermal_average(*model_, params, m.method, Observable::parse(name), compute_);
    return {a.value, a.error, a.n_diverged};
  }

  Value spectral_quantity(double beta, const std::string& name) {
    const SpectralDecomposition& d = decomposition();
    if (name == "Z") return {spectral_partition(d, beta), 0.0, 0};
    if (name == "Z_tilde") return {2.0 * std::numbers::pi * o_.hbar * spectral_partition(d, beta), 0.0, 0};
    if (name == "identity" || name == "1") {
      spectral_partition(d, beta);
      return {1.0, 0.0, 0};
    }
    if (name == "H") return {spectral_average(d, beta, SpectralQuantity::Energy), 0.0, 0};
    if (name == "H2") return {spectral_average(d, beta, SpectralQuantity::EnergySquared), 0.0, 0};
    if (name == "variance" || name == "heat_capacity") {
      const SpectralEnergyStats s = spectral_energy_stats(d, beta);
      return {name == "variance" ? s.variance : s.heat_capacity, 0.0, 0};
    }
    throw ConfigError("the spectral method supports Z, Z_tilde, identity, H, H2, variance and heat_capacity, not '" +
                      name + "'");
  }

  ThermalField field(const MethodSpec& m, double beta, const GridSpec& g) {
    if (m.spectral) return spectral_thermal_wigner(decomposition(), beta, g, o_.workers);
    return thermal_wigner_field(*model_, ThermalParams(beta, o_.hbar), m.method, g, compute_);
  }

  // ---- commands ------------------------------------------------------------------

  int wigner() {
    const MethodSpec m = single_method();
    const ThermalField f = field(m, single_beta(), grid());
    std::ostringstream csv;
    write_field_csv(csv, f);
    emit_csv(csv.str(), {{"field", field_metadata(f)}, {"integral", f.integral()}});
    return 0;
  }

  int partition() {
    const std::vector<MethodSpec> methods = method_list(1);
    std::ostringstream csv;
    csv << "beta,method,z_tilde,z,error,n_diverged\n";
    for (double beta : betas()) {
      for (const auto& m : methods) {
        const Value zt = quantity(m, beta, "Z_tilde");
        const double z = zt.value / std::pow(2.0 * std::numbers::pi * o_.hbar, model_->dof());
        csv << format_double(beta) << ',' << m.name << ',' << format_double(zt.value) << ',' << format_double(z) << ','
            << format_double(zt.error) << ',' << zt.n_diverged << '\n';
      }
    }
    emit_csv(csv.str(), json::object());
    return 0;
  }

  json record(const MethodSpec& m, double beta, const std::string& name, const Value& v) const {
    return {{"model", o_.model_path}, {"method", m.name},       {"beta", beta},
            {"hbar", o_.hbar},        {"quantity", name},        {"value", v.value},
            {"quadrature_error", v.error}, {"n_diverged", v.n_diverged}};
  }

  int average() {
    const double beta = single_beta();
    json results = json::array();
    for (const auto& m : method_list(1)) results.push_back(record(m, beta, o_.observable, quantity(m, beta, o_.observable)));
    emit_json({{"results", results}});
    return 0;
  }

  int sweep() {
    if (o_.sweep.empty()) throw ConfigError("--sweep is required");
    const MethodSpec m = single_method();
    std::ostringstream csv;
    csv << "beta,value,error\n";
    std::size_t diverged = 0;
    for (double beta : betas()) {
      const Value v = quantity(m, beta, o_.observable);
      diverged += v.n_diverged;
      csv << format_double(beta) << ',' << format_double(v.value) << ',' << format_double(v.error) << '\n';
    }
    emit_csv(csv.str(), {{"quantity", o_.observable}, {"method", m.name}, {"n_diverged", diverged}});
    return 0;
  }

  int compare() {
    const std::vector<MethodSpec> methods = method_list(2);
    const std::optional<GridSpec> g = o_.grid.empty() ? std::nullopt : std::optional<GridSpec>(grid());
    json rows = json::array();
    json fields = json::array();
    std::map<std::string, double> worst;
    for (double beta : betas()) {
      json values = json::object(), errors = json::object(), diverged = json::object();
      json deviation = json::object(), failures = json::object();
      std::optional<double> ref;
      for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto& m = methods[i];
        try {
          const Value v = quantity(m, beta, o_.observable);
          values[m.name] = v.value;
          errors[m.name] = v.error;
          diverged[m.name] = v.n_diverged;
          if (i == 0) ref = v.value;
          if (i > 0 && ref) {
            const double d = std::abs(v.value - *ref) / std::abs(*ref);
            deviation[m.name] = d;
            worst[m.name] = std::max(worst[m.name], d);
          }
        } catch (const NumericalError& e) {
          failures[m.name] = e.what();
        }
      }
      json row = {{"beta", beta}, {"values", values}, {"errors", errors}, {"n_diverged", diverged},
                  {"relative_deviation", deviation}};
      if (!failures.empty()) row["failures"] = failures;
      rows.push_back(row);
      if (g) {
        std::optional<ThermalField> reference;
        for (std::size_t i = 0; i < methods.size(); ++i) {
          const auto& m = methods[i];
          try {
            ThermalField f = field(m, beta, *g);
            if (i == 0) {
              reference = std::move(f);
            } else if (reference) {
              fields.push_back({{"beta", beta},
                                {"method", m.name},
                                {"max_abs_difference", max_abs_difference(*reference, f)},
                                {"l1_distance", l1_distance(*reference, f)}});
            }
          } catch (const NumericalError& e) {
            fields.push_back({{"beta", beta}, {"method", m.name}, {"failure", e.what()}});
            if (i == 0) break;
          }
        }
      }
    }
    json summary = json::object();
    for (const auto& [name, d] : worst) summary[name] = d;
    json report = {{"reference", methods.front().name},
                   {"quantity", o_.observable},
                   {"rows", rows},
                   {"max_relative_deviation", summary}};
    if (g) report["fields"] = fields;
    emit_json(report);
    return 0;
  }

  int spectrum() {
    const SpectralDecomposition& d = decomposition();
    std::ostringstream csv;
    write_spectrum_csv(csv, d);
    emit_csv(csv.str(), {{"levels", d.levels()}, {"basis_size", d.basis_size}, {"omega_b", d.omega_b}});
    return 0;
  }

  void dump_trajectory() {
    if (o_.midpoint.empty()) throw ConfigError("--dump-trajectory needs --midpoint");
    const std::vector<std::string> parts = split(o_.midpoint, ',');
    std::vector<double> coords;
    try {
      for (const auto& p : parts) coords.push_back(std::stod(p));
    } catch (const std::logic_error&) {
      throw ConfigError("malformed --midpoint '" + o_.midpoint + "'");
    }
    if (static_cast<int>(coords.size()) != model_->dim()) throw ConfigError("--midpoint needs 2N coordinates");
    const double beta = betas().front();
    DoubleOptions d = compute_.dynamics;
    d.checkpoints = 64;
    std::vector<TrajectorySample> samples;
    integrate_double(*model_, PhasePoint(Vec::Map(coords.data(), static_cast<Eigen::Index>(coords.size()))),
                     o_.hbar * beta, d, &samples);
    std::ostringstream csv;
    write_trajectory_csv(csv, samples);
    write_file(o_.dump_trajectory, csv.str());
  }

  Options o_;
  std::ostream& out_;
  std::unique_ptr<HamiltonianModel> model_;
  std::unique_ptr<SpectralDecomposition> decomp_;
  ComputeOptions compute_;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model_path, "Model JSON file");
  sub->add_option("--method", o.method, "classical|closed|short-time|metaplectic-local|normal-form|double-sc|spectral");
  sub->add_option("--methods", o.methods, "Comma-separated method list");
  sub->add_option("--beta", o.beta, "Inverse temperature");
  sub->add_option("--sweep", o.sweep, "Beta sweep start:stop:count[:geometric]");
  sub->add_option("--hbar", o.hbar, "Planck constant");
  sub->add_option("--grid", o.grid, "Field grid pmin,pmax,qmin,qmax,np,nq");
  sub->add_option("--out", o.out, "Output path (default: stdout)");
  sub->add_option("--workers", o.workers, "Worker threads (0: all cores)");
  sub->add_option("--rtol", o.rtol, "Integrator relative tolerance");
  sub->add_option("--atol", o.atol, "Integrator absolute tolerance");
  sub->add_option("--quad-rtol", o.quad_rtol, "Quadrature relative tolerance");
  sub->add_option("--window", o.window, "Energy window for the quadrature box");
  sub->add_option("--observable", o.observable,
                  "identity|H|H2|H2_classical|p^k|q^k|coherent:p,q|Z|Z_tilde|variance|heat_capacity|lopsided_H|H_from_Z");
  sub->add_option("--basis", o.basis, "Spectral basis size");
  sub->add_option("--omega-b", o.omega_b, "Spectral basis frequency");
  sub->add_option("--form", o.form, "Double-beta form: short-time|metaplectic");
  sub->add_option("--dump-trajectory", o.dump_trajectory, "Write the double trajectory of --midpoint to this CSV");
  sub->add_option("--midpoint", o.midpoint, "Midpoint p,q for --dump-trajectory");
}

int env_workers(int fallback) {
  const char* v = std::getenv("THERMAL_WORKERS");
  if (!v || !*v) return fallback;
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used == std::string(v).size() && n >= 0) return n;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("THERMAL_WORKERS must be a non-negative integer, got '" + std::string(v) + "'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thermal Wigner functions, partition functions and thermal averages"};
  app.require_subcommand(1);
  Options o;
  for (const char* name : {"wigner", "partition", "average", "sweep", "compare", "spectrum"}) {
    add_common(app.add_subcommand(name), o);
  }
  std::vector<std::string> argv_store{"thermal"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  o.command = sub->get_name();
  o.beta_set = sub->count("--beta") > 0;
  try {
    o.workers = env_workers(o.workers);
    Runner runner(o, out);
    return runner.dispatch();
  } catch (const ConfigError& e) {
    err << "thermal: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "thermal: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "thermal: failure: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace thermal::cli
