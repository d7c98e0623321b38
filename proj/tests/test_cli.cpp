#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "thermal/cli.hpp"
#include "thermal/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using thermal::cli::parse_sweep;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = thermal::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string model(const std::string& name) { return std::string(THERMAL_SOURCE_DIR) + "/models/" + name + ".json"; }

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("thermal_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream l(line);
    std::string cell;
    while (std::getline(l, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

double field_value_at(const std::string& csv, double p, double q) {
  const auto rows = csv_rows(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (std::abs(std::stod(rows[i][0]) - p) < 1e-12 && std::abs(std::stod(rows[i][1]) - q) < 1e-12) {
      return std::stod(rows[i][2]);
    }
  }
  FAIL("grid point not found");
  return 0.0;
}

}  // namespace

TEST_CASE("parse_sweep yields linear and geometric grids") {
  const auto lin = parse_sweep("1:2:3");
  REQUIRE(lin.size() == 3);
  CHECK(lin[0] == doctest::Approx(1.0));
  CHECK(lin[1] == doctest::Approx(1.5));
  CHECK(lin[2] == doctest::Approx(2.0));

  const auto geo = parse_sweep("1:100:3:geometric");
  REQUIRE(geo.size() == 3);
  CHECK(geo[1] == doctest::Approx(10.0));
  CHECK(geo[2] == doctest::Approx(100.0));

  const auto one = parse_sweep("2:5:1");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 2.0);

  CHECK_THROWS_AS(parse_sweep("1:2:0"), thermal::ConfigError);
  CHECK_THROWS_AS(parse_sweep("1:2"), thermal::ConfigError);
  CHECK_THROWS_AS(parse_sweep("a:2:3"), thermal::ConfigError);
  CHECK_THROWS_AS(parse_sweep("0:2:3:geometric"), thermal::ConfigError);
}

TEST_CASE("configuration errors exit with code 2") {
  SUBCASE("closed form on the Kerr model") {
    const auto r = cli({"wigner", "--model", model("kerr"), "--beta", "2", "--method", "closed", "--grid",
                        "-2,2,-2,2,11,11"});
    CHECK(r.code == 2);
    CHECK(r.err.find("closed") != std::string::npos);
  }
  SUBCASE("missing model file") {
    const auto r = cli({"partition", "--model", "/nonexistent/model.json", "--beta", "1", "--method", "classical"});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
  }
  SUBCASE("unknown flag") {
    const auto r = cli({"partition", "--model", model("ho"), "--bogus", "1"});
    CHECK(r.code == 2);
  }
  SUBCASE("unknown method") {
    const auto r = cli({"partition", "--model", model("ho"), "--beta", "1", "--method", "magic"});
    CHECK(r.code == 2);
  }
  SUBCASE("beta and sweep together") {
    const auto r = cli({"partition", "--model", model("ho"), "--beta", "1", "--sweep", "1:2:2", "--method", "closed"});
    CHECK(r.code == 2);
  }
  SUBCASE("compare with a single method") {
    const auto r = cli({"compare", "--model", model("ho"), "--beta", "1", "--methods", "closed"});
    CHECK(r.code == 2);
  }
  SUBCASE("malformed THERMAL_WORKERS") {
    ::setenv("THERMAL_WORKERS", "many", 1);
    const auto r = cli({"partition", "--model", model("ho"), "--beta", "1", "--method", "closed"});
    ::unsetenv("THERMAL_WORKERS");
    CHECK(r.code == 2);
  }
}

TEST_CASE("numerical failures exit with code 3") {
  const auto r = cli({"partition", "--model", model("quartic"), "--beta", "0.01", "--method", "spectral", "--basis",
                      "20", "--omega-b", "1"});
  CHECK(r.code == 3);
  CHECK(r.err.find("numerical failure") != std::string::npos);
}

TEST_CASE("wigner writes the normalized field and a config sidecar") {
  const fs::path dir = scratch_dir();
  const std::string grid = "-4,4,-4,4,201,201";

  const fs::path closed = dir / "w_closed.csv";
  auto r = cli({"wigner", "--model", model("ho"), "--beta", "2", "--hbar", "1", "--method", "closed", "--grid", grid,
                "--out", closed.string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(closed);
  CHECK(csv.rfind("p,q,value\n", 0) == 0);
  CHECK(csv_rows(csv).size() == 201u * 201u + 1u);
  const double origin = field_value_at(csv, 0.0, 0.0);
  CHECK(origin == doctest::Approx(std::tanh(1.0) / std::numbers::pi).epsilon(1e-6));
  const double z_tilde = std::numbers::pi / std::sinh(1.0);
  CHECK(origin == doctest::Approx(0.6480543 / z_tilde).epsilon(1e-4));

  const json side = json::parse(slurp(closed.string() + ".json"));
  CHECK(side["config"]["command"] == "wigner");
  CHECK(side["config"]["method"] == "closed");
  CHECK(side["config"]["beta"] == 2.0);
  CHECK(side["config"]["grid"] == grid);
  CHECK(side["config"]["model"]["type"] == "quadratic");
  CHECK(side["integral"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));

  const fs::path classical = dir / "w_classical.csv";
  r = cli({"wigner", "--model", model("ho"), "--beta", "2", "--hbar", "1", "--method", "classical", "--grid", grid,
           "--out", classical.string()});
  REQUIRE(r.code == 0);
  CHECK(field_value_at(slurp(classical), 0.0, 0.0) == doctest::Approx(2.0 / (2.0 * std::numbers::pi)).epsilon(1e-6));
  CHECK(fs::exists(classical.string() + ".json"));
  fs::remove_all(dir);
}

TEST_CASE("partition sweeps emit one row per beta and method") {
  SUBCASE("harmonic oscillator double-sc against the closed form") {
    const auto r = cli({"partition", "--model", model("ho"), "--sweep", "0.1:10:6:geometric", "--method", "double-sc"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 7);
    CHECK(r.out.rfind("beta,method,z_tilde,z,error,n_diverged\n", 0) == 0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double theta = std::stod(rows[i][0]);
      const double exact = std::numbers::pi / std::sinh(theta / 2.0);
      CHECK(rows[i][1] == "double-sc");
      CHECK(std::abs(std::stod(rows[i][2]) / exact - 1.0) <= 1e-6);
      CHECK(std::stod(rows[i][3]) == doctest::Approx(exact / (2.0 * std::numbers::pi)).epsilon(1e-6));
    }
  }
  SUBCASE("Kerr classical at high temperature") {
    const auto r = cli({"partition", "--model", model("kerr"), "--beta", "4", "--method", "classical"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 2);
    CHECK(std::abs(std::stod(rows[1][2]) - 2.7841639) <= 1e-6);
  }
  SUBCASE("quartic spectral and double-sc side by side") {
    const auto r = cli({"partition", "--model", model("quartic"), "--beta", "1", "--methods", "spectral,double-sc",
                        "--basis", "120", "--omega-b", "1.5"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][1] == "spectral");
    CHECK(rows[2][1] == "double-sc");
    CHECK(std::stod(rows[2][2]) == doctest::Approx(std::stod(rows[1][2])).epsilon(0.05));
  }
}

TEST_CASE("average reports one record per method") {
  const auto r = cli({"average", "--model", model("ho"), "--beta", "2", "--methods", "closed,double-sc",
                      "--observable", "H"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  REQUIRE(report["results"].size() == 2);
  const double exact = 0.5 / std::tanh(1.0);
  for (const auto& rec : report["results"]) {
    CHECK(rec["quantity"] == "H");
    CHECK(rec["beta"] == 2.0);
    CHECK(rec["value"].get<double>() == doctest::Approx(exact).epsilon(1e-6));
  }
  CHECK(report["config"]["observable"] == "H");
}

TEST_CASE("sweep writes value and error columns") {
  const fs::path dir = scratch_dir();
  const fs::path out = dir / "sweep.csv";
  const auto r = cli({"sweep", "--model", model("ho"), "--sweep", "0.5:2:4", "--method", "closed", "--observable", "H",
                      "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(out));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"beta", "value", "error"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double beta = std::stod(rows[i][0]);
    CHECK(std::stod(rows[i][1]) == doctest::Approx(0.5 / std::tanh(beta / 2.0)).epsilon(1e-6));
  }
  const json side = json::parse(slurp(out.string() + ".json"));
  CHECK(side["quantity"] == "H");
  CHECK(side["method"] == "closed");
  CHECK(side["config"]["sweep"] == "0.5:2:4");
  fs::remove_all(dir);
}

TEST_CASE("compare on the harmonic oscillator finds closed and double-sc identical") {
  const auto r = cli({"compare", "--model", model("ho"), "--sweep", "0.1:10:5:geometric", "--methods",
                      "closed,double-sc", "--observable", "Z_tilde", "--grid", "-3,3,-3,3,31,31"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  CHECK(report["reference"] == "closed");
  CHECK(report["rows"].size() == 5);
  CHECK(report["max_relative_deviation"]["double-sc"].get<double>() < 1e-6);
  REQUIRE(report["fields"].size() == 5);
  for (const auto& f : report["fields"]) CHECK(f["max_abs_difference"].get<double>() < 1e-6);
}

TEST_CASE("compare on the quartic model at high temperature agrees across methods") {
  const auto r = cli({"compare", "--model", model("quartic"), "--beta", "1", "--hbar", "0.01", "--methods",
                      "classical,short-time,metaplectic-local,double-sc", "--observable", "H"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  for (const auto& [name, d] : report["max_relative_deviation"].items()) {
    INFO(name);
    CHECK(d.get<double>() <= 1e-3);
  }
}

TEST_CASE("compare on the quartic model at theta 5 separates classical from double-sc") {
  const auto r = cli({"compare", "--model", model("quartic"), "--beta", "5", "--methods", "spectral,classical,double-sc",
                      "--observable", "H", "--basis", "120", "--omega-b", "1.5", "--quad-rtol", "1e-8"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  CHECK_FALSE(report["rows"][0].contains("failures"));
  const json& worst = report["max_relative_deviation"];
  const double inf = std::numeric_limits<double>::infinity();
  const double classical = worst.value("classical", inf);
  const double sc = worst.value("double-sc", inf);
  CHECK(classical > 0.1);
  CHECK(sc < classical);
  CHECK(sc <= 0.02);
}

TEST_CASE("spectrum lists converged levels") {
  const auto r = cli({"spectrum", "--model", model("ho"), "--basis", "40"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() > 10);
  CHECK(rows[0] == std::vector<std::string>{"j", "E_j"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stoi(rows[i][0]) == static_cast<int>(i - 1));
    CHECK(std::stod(rows[i][1]) == doctest::Approx(static_cast<double>(i - 1) + 0.5).epsilon(1e-10));
  }
}

TEST_CASE("dump-trajectory writes one row per checkpoint") {
  const fs::path dir = scratch_dir();
  const fs::path traj = dir / "traj.csv";
  const auto r = cli({"partition", "--model", model("ho"), "--beta", "2", "--method", "closed", "--dump-trajectory",
                      traj.string(), "--midpoint", "0.5,1"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(traj));
  REQUIRE(rows.size() >= 3);
  CHECK(rows[0] == std::vector<std::string>{"theta_prime", "p", "q", "y_p", "y_q", "s", "det_T"});
  CHECK(std::stod(rows[1][0]) == 0.0);
  CHECK(std::stod(rows.back()[0]) == doctest::Approx(1.0));
  fs::remove_all(dir);
}

TEST_CASE("property: output is byte-identical across worker counts") {
  const std::vector<std::string> base{"wigner", "--model", model("quartic"), "--beta", "1", "--method", "double-sc",
                                      "--grid", "-3,3,-3,3,21,21"};
  auto with = [&](const std::string& workers) {
    auto args = base;
    args.push_back("--workers");
    args.push_back(workers);
    return cli(args);
  };
  const auto one = with("1");
  const auto four = with("4");
  REQUIRE(one.code == 0);
  REQUIRE(four.code == 0);
  CHECK(one.out == four.out);

  ::setenv("THERMAL_WORKERS", "3", 1);
  const auto env = with("1");
  ::unsetenv("THERMAL_WORKERS");
  REQUIRE(env.code == 0);
  CHECK(env.out == one.out);

  const auto p1 = cli({"partition", "--model", model("quartic"), "--beta", "1", "--method", "double-sc", "--workers", "1"});
  const auto p2 = cli({"partition", "--model", model("quartic"), "--beta", "1", "--method", "double-sc", "--workers", "2"});
  REQUIRE(p1.code == 0);
  CHECK(p1.out == p2.out);
}

TEST_CASE("property: every output file carries the config echo") {
  const fs::path dir = scratch_dir();
  const std::vector<std::vector<std::string>> runs{
      {"wigner", "--model", model("kerr"), "--beta", "1", "--method", "normal-form", "--grid", "-2,2,-2,2,11,11"},
      {"partition", "--model", model("quartic"), "--sweep", "0.5:1:2", "--method", "classical"},
      {"sweep", "--model", model("ho"), "--sweep", "1:2:2", "--method", "closed", "--observable", "q^2"},
      {"spectrum", "--model", model("quartic"), "--basis", "30", "--omega-b", "1.2"},
      {"average", "--model", model("ho"), "--beta", "1", "--method", "classical"},
      {"compare", "--model", model("ho"), "--beta", "1", "--methods", "closed,classical"},
  };
  int n = 0;
  for (auto args : runs) {
    const fs::path out = dir / ("out" + std::to_string(n++));
    args.push_back("--out");
    args.push_back(out.string());
    const auto r = cli(args);
    INFO(args.front());
    REQUIRE(r.code == 0);
    const bool json_output = args.front() == "average" || args.front() == "compare";
    const json side = json::parse(slurp(json_output ? out : fs::path(out.string() + ".json")));
    const json& config = side["config"];
    CHECK(config["command"] == args.front());
    CHECK(config["model_path"] == args[2]);
    CHECK(config["out"] == out.string());
    CHECK(config.contains("model"));
    CHECK(config.contains("hbar"));
    CHECK(config.contains("rtol"));
    CHECK(config.contains("quad_rtol"));
  }
  fs::remove_all(dir);
}
