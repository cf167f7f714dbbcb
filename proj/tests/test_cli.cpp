#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hypcon/cli.hpp"

using namespace hypcon;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "hypcon_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hypcon");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Numeric rows of a CSV file with a header line.
std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

std::string out_dir(const std::string& name) { return (scratch_dir() / name).string(); }

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(
      "# comment\n"
      "model.builtin = example   # trailing comment\n"
      "controller.delta = 0.1\n"
      "numerics.m = 64\n"
      "input.U = \"1 + 0*t\"\n"
      "uncertainty.eps_F = 0.1\n");
  CHECK(c.controller.theta == 0.25);
  CHECK(c.controller.delta == 0.1);
  CHECK(c.m == 64);
  CHECK(c.tol == 1e-7);
  CHECK(c.uncertainty.eps_F == 0.1);
  REQUIRE(c.input);
  CHECK(c.input->eval(0, 0, 0, 3.0) == 1.0);
  CHECK_FALSE(c.box);

  CHECK_THROWS_AS(parse_config("model.builtin = example\nnumerics.m = 10\nnumerics.m = 20\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.builtin = example\nnumerics.m = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.builtin = example\ninitial.u0 = \"u + x\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.lambda_u = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.builtin = example\ncontroller.mode = track\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.builtin = example\nnumerics\n"), ConfigError);
  try {
    parse_config("model.builtin = example\nmodel.f_u = \"2/3*(u - * v)\"\n", "bad.cfg");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("bad.cfg:2:23:", 0) == 0);
  }
}

TEST_CASE("simulate: the equilibrium input keeps the constant state") {
  const fs::path cfg = write_config("eq.cfg",
                                    "model.builtin = example\ninput.U = \"1\"\ncontroller.t_end = 2\nnumerics.m = 40\n");
  const CliRun r = cli({"simulate", "--config", cfg.string(), "--out", out_dir("eq")});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(scratch_dir() / "eq" / "trajectory.csv");
  CHECK(rows.size() == 41u * 41u);
  for (const auto& row : rows) {
    CHECK(std::fabs(row[2] - 1.0) <= 1e-8);
    CHECK(std::fabs(row[3] - 1.0) <= 1e-8);
  }
}

TEST_CASE("simulate: zero data stays zero") {
  const fs::path cfg = write_config("zero.cfg",
                                    "model.builtin = example\ninitial.u0 = \"0\"\ninitial.v0 = \"0\"\n"
                                    "input.U = \"0\"\ncontroller.t_end = 1\nnumerics.m = 20\n");
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", out_dir("zero")}).code == 0);
  for (const auto& row : read_csv(scratch_dir() / "zero" / "trajectory.csv")) {
    CHECK(row[2] == 0.0);
    CHECK(row[3] == 0.0);
  }
}

TEST_CASE("exit codes") {
  const fs::path bad = write_config("bad.cfg", "model.builtin = example\nmodel.f_u = \"2/3*(u - * v)\"\n");
  const CliRun parse_fail = cli({"control", "--config", bad.string()});
  CHECK(parse_fail.code == 2);
  CHECK(parse_fail.err.find("bad.cfg:2:23") != std::string::npos);

  const fs::path theta = write_config("theta.cfg", "model.builtin = example\ncontroller.theta = -0.5\n");
  CHECK(cli({"control", "--config", theta.string()}).code == 2);

  const fs::path single = write_config("single.cfg", "model.builtin = example\nuncertainty.n_runs = 1\n");
  CHECK(cli({"ensemble", "--config", single.string(), "--out", out_dir("single")}).code == 2);
  const fs::path ok = write_config("ok.cfg", "model.builtin = example\n");
  CHECK(cli({"ensemble", "--config", ok.string(), "--runs", "1", "--out", out_dir("single")}).code == 2);

  CHECK(cli({"simulate", "--config", ok.string()}).code == 2);  // no input.U
  CHECK(cli({"control", "--config", (scratch_dir() / "missing.cfg").string()}).code == 2);
  CHECK(cli({"control"}).code == 2);
  CHECK(cli({"control", "--config", ok.string(), "--m", "1"}).code == 2);

  // A coarse grid with a steep front crosses characteristics in the plant.
  const fs::path blow = write_config("blow.cfg",
                                     "model.lambda_u = \"1 + u\"\nmodel.lambda_v = \"1\"\nmodel.f_u = \"0\"\n"
                                     "model.f_v = \"0\"\nmodel.g_u = \"1\"\nmodel.stabilizing = false\n"
                                     "initial.u0 = \"max(0, min(1, 1 - 10*(x - 0.3)))\"\ninitial.v0 = \"0\"\n"
                                     "numerics.m = 80\n");
  CHECK(cli({"predict-check", "--config", blow.string(), "--out", out_dir("blow")}).code == 1);
}

TEST_CASE("control: the reference example decays linearly at rate delta") {
  const fs::path cfg = write_config("ctrl.cfg", "model.builtin = example\ncontroller.t_end = 10\n");
  const CliRun r = cli({"control", "--config", cfg.string(), "--out", out_dir("ctrl")});
  REQUIRE(r.code == 0);
  for (const char* f : {"trajectory.csv", "input.csv", "diagnostics.csv", "boundary.csv"})
    CHECK(fs::exists(scratch_dir() / "ctrl" / f));
  CHECK(slurp(scratch_dir() / "ctrl" / "boundary.csv").rfind("t,U,v0,norm_inf\n", 0) == 0);
  double worst = 0.0;
  int samples = 0;
  for (const auto& row : read_csv(scratch_dir() / "ctrl" / "boundary.csv")) {
    if (row[0] < 2.1 || row[0] > 6.9) continue;
    worst = std::max(worst, std::fabs(row[2] - (1.0 - 0.2 * (row[0] - 2.0))));
    ++samples;
  }
  CHECK(samples > 50);
  CHECK(worst <= 0.05);
}

TEST_CASE("control: tracking a constant reference") {
  const fs::path cfg = write_config("track.cfg",
                                    "model.builtin = example\ncontroller.mode = track\n"
                                    "controller.reference = \"0.5\"\ncontroller.t_end = 10\nnumerics.m = 60\n");
  REQUIRE(cli({"control", "--config", cfg.string(), "--out", out_dir("track")}).code == 0);
  for (const auto& row : read_csv(scratch_dir() / "track" / "boundary.csv"))
    if (row[0] >= 6.0) CHECK(std::fabs(row[2] - 0.5) <= 0.02);
}

TEST_CASE("reruns are byte identical") {
  const fs::path cfg = write_config("ens.cfg",
                                    "model.builtin = example\ncontroller.t_end = 1\nnumerics.m = 20\n"
                                    "uncertainty.eps_F = 0.1\nuncertainty.eps_w = 0.02\nuncertainty.n_runs = 4\n");
  for (const char* cmd : {"control", "ensemble", "bounds", "predict-check"}) {
    const std::string a = out_dir(std::string("rerun_a_") + cmd), b = out_dir(std::string("rerun_b_") + cmd);
    REQUIRE(cli({cmd, "--config", cfg.string(), "--out", a, "--seed", "17"}).code == 0);
    REQUIRE(cli({cmd, "--config", cfg.string(), "--out", b, "--seed", "17"}).code == 0);
    for (const auto& f : fs::directory_iterator(a)) {
      CAPTURE(f.path().string());
      CHECK(slurp(f.path()) == slurp(fs::path(b) / f.path().filename()));
    }
  }
  const std::string runs = slurp(scratch_dir() / "rerun_a_ensemble" / "runs.csv");
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 5);
  CHECK(runs.find(",failed") == std::string::npos);
}

TEST_CASE("bounds announces the default box") {
  const fs::path cfg = write_config("bnd.cfg", "model.builtin = example\nbounds.density = 20\n");
  const CliRun r = cli({"bounds", "--config", cfg.string(), "--out", out_dir("bnd")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("bounds.box not set") != std::string::npos);
  CHECK(slurp(scratch_dir() / "bnd" / "bounds.txt").find("bounds.box not set") != std::string::npos);
  CHECK(slurp(scratch_dir() / "bnd" / "bounds.csv").rfind("key,value\n", 0) == 0);
}

TEST_CASE("predict-check") {
  const fs::path zero = write_config("pz.cfg", "model.builtin = example\ninitial.u0 = \"0\"\ninitial.v0 = \"0\"\n");
  const CliRun r = cli({"predict-check", "--config", zero.string(), "--out", out_dir("pz")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("discrepancy   = 0.000000000000e+00") != std::string::npos);

  const fs::path wavy = write_config("pw.cfg",
                                     "model.builtin = example\ninitial.u0 = \"1 - cos(2*(0.6 + 0.4*cos(2*x)))"
                                     " + (0.6 + 0.4*cos(2*x))*cos(2) + 0.3*sin(3*x)\"\n"
                                     "initial.v0 = \"0.6 + 0.4*cos(2*x)\"\n");
  CHECK(cli({"predict-check", "--config", wavy.string(), "--out", out_dir("pw")}).code == 0);

  const fs::path inc = write_config("pi.cfg", "model.builtin = example\ninitial.u0 = \"0.3\"\n");
  CHECK(cli({"predict-check", "--config", inc.string(), "--out", out_dir("pi")}).code == 2);
}
