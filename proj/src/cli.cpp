#include "hypcon/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "hypcon/errors.hpp"
#include "hypcon/io.hpp"

namespace hypcon {

namespace {

struct Entry {
  std::string value;
  bool quoted = false;
  int line = 0;
  int column = 0;  // 1-based column of the first value character
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model.builtin", "model.name", "model.lambda_u", "model.lambda_v", "model.f_u", "model.f_v", "model.g_u",
      "model.g_v", "model.input_gain", "model.stabilizing",
      "initial.u0", "initial.v0",
      "controller.theta", "controller.delta", "controller.mode", "controller.t_end", "controller.reference",
      "controller.smoothing",
      "numerics.m", "numerics.tol", "numerics.sample_dt",
      "uncertainty.eps_F", "uncertainty.eps_Lambda", "uncertainty.eps_gu", "uncertainty.eps_gv",
      "uncertainty.eps_w", "uncertainty.eps_wt", "uncertainty.eps_U", "uncertainty.n_runs", "uncertainty.seed",
      "uncertainty.threads",
      "input.U",
      "output.dir",
      "bounds.box", "bounds.t_min", "bounds.t_max", "bounds.density", "bounds.horizon", "bounds.kappa6",
      "bounds.kappa10_tilde", "bounds.epsilon_target",
      "predict.scheme", "predict.fill_in_a", "predict.fill_in_b", "predict.threshold",
  };
  return keys;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class ConfigReader {
 public:
  ConfigReader(std::string_view text, std::string source) : source_(std::move(source)) {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = std::min(text.find('\n', pos), text.size());
      read_line(text.substr(pos, nl - pos), ++line_no);
      pos = nl + 1;
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const Entry& entry(const std::string& key) const { return entries_.at(key); }

  [[noreturn]] void fail(int line, int column, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const Entry& e = entry(key);
    fail(e.line, e.column, key + ": " + msg);
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = entry(key).value;
    double value = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(value))
      fail(key, "expected a finite number, got '" + s + "'");
    return value;
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = entry(key).value;
    long long value = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || end != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
    return value;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = entry(key).value;
    if (s == "true") return true;
    if (s == "false") return false;
    fail(key, "expected true or false, got '" + s + "'");
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? entry(key).value : fallback;
  }

  // Parses the value and checks that it only uses the allowed variables.
  Expr expression(const std::string& key, std::initializer_list<Var> allowed) const {
    const Entry& e = entry(key);
    Expr ex;
    try {
      ex = parse(e.value);
    } catch (const ParseError& pe) {
      std::string msg = pe.what();
      if (const auto colon = msg.find(": "); colon != std::string::npos) msg = msg.substr(colon + 2);
      fail(e.line, e.column + static_cast<int>(pe.offset()), key + ": " + msg);
    }
    for (Var v : {Var::x, Var::u, Var::v, Var::t}) {
      if (std::find(allowed.begin(), allowed.end(), v) == allowed.end() && ex.depends_on(v))
        fail(key, std::string("expression may not use '") + var_name(v) + "'");
    }
    return ex;
  }

 private:
  void read_line(std::string_view raw, int line_no) {
    bool in_quote = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') in_quote = !in_quote;
      if (raw[i] == '#' && !in_quote) {
        cut = i;
        break;
      }
    }
    const std::string_view line = raw.substr(0, cut);
    if (trim(line).empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, 1, "expected 'section.key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.find('.') == std::string::npos) fail(line_no, 1, "key '" + key + "' needs a section prefix");
    if (!known_keys().count(key)) fail(line_no, 1, "unknown key '" + key + "'");
    if (entries_.count(key))
      fail(line_no, 1, "duplicate key '" + key + "' (first set on line " + std::to_string(entries_[key].line) + ")");

    const std::string_view rest = line.substr(eq + 1);
    const std::string_view value = trim(rest);
    Entry e;
    e.line = line_no;
    e.column = static_cast<int>(eq + 1 + rest.find_first_not_of(" \t") + 1);
    if (value.empty()) fail(line_no, e.column, key + ": missing value");
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') fail(line_no, e.column, key + ": unterminated quote");
      e.value = std::string(value.substr(1, value.size() - 2));
      e.quoted = true;
      ++e.column;
    } else {
      e.value = std::string(value);
    }
    entries_[key] = e;
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
};

Coefficient coefficient(const ConfigReader& r, const std::string& key, std::initializer_list<Var> allowed) {
  return Coefficient(r.expression(key, allowed));
}

void read_model(const ConfigReader& r, RunConfig& c) {
  const std::string builtin = r.text("model.builtin", "");
  if (!builtin.empty()) {
    if (builtin != "example") r.fail("model.builtin", "unknown builtin model '" + builtin + "' (known: example)");
    const Example ex = builtin_example();
    c.model = ex.model;
    c.initial = ex.initial;
    c.controller.theta = ex.settings.theta;
    c.controller.delta = ex.settings.delta;
  } else {
    for (const char* key : {"model.lambda_u", "model.lambda_v", "model.f_u", "model.f_v", "model.g_u"})
      if (!r.has(key)) throw ConfigError(std::string("missing required key ") + key + " (or set model.builtin)");
    c.model.g_v = Coefficient::constant(0.0);
  }
  const std::initializer_list<Var> state_vars = {Var::x, Var::u, Var::v};
  if (r.has("model.lambda_u")) c.model.lambda_u = coefficient(r, "model.lambda_u", state_vars);
  if (r.has("model.lambda_v")) c.model.lambda_v = coefficient(r, "model.lambda_v", state_vars);
  if (r.has("model.f_u")) c.model.f_u = coefficient(r, "model.f_u", state_vars);
  if (r.has("model.f_v")) c.model.f_v = coefficient(r, "model.f_v", state_vars);
  if (r.has("model.g_u")) c.model.g_u = coefficient(r, "model.g_u", {Var::v, Var::t});
  if (r.has("model.g_v")) c.model.g_v = coefficient(r, "model.g_v", {Var::u, Var::t});
  c.model.input_gain = r.number("model.input_gain", c.model.input_gain);
  if (c.model.input_gain == 0.0) r.fail("model.input_gain", "must be nonzero");
  c.model.stabilizing = r.boolean("model.stabilizing", c.model.stabilizing);
  c.model.name = r.text("model.name", builtin.empty() ? "custom" : c.model.name);

  if (builtin.empty())
    for (const char* key : {"initial.u0", "initial.v0"})
      if (!r.has(key)) throw ConfigError(std::string("missing required key ") + key);
  if (r.has("initial.u0")) c.initial.u0 = coefficient(r, "initial.u0", {Var::x});
  if (r.has("initial.v0")) c.initial.v0 = coefficient(r, "initial.v0", {Var::x});
}

void read_controller(const ConfigReader& r, RunConfig& c) {
  c.controller.theta = r.number("controller.theta", c.controller.theta);
  if (!(c.controller.theta > 0.0)) r.fail("controller.theta", "sampling period must be positive");
  c.controller.delta = r.number("controller.delta", c.controller.delta);
  if (!(c.controller.delta > 0.0)) r.fail("controller.delta", "decay rate must be positive");
  c.controller.smoothing = r.number("controller.smoothing", c.controller.smoothing);
  c.t_end = r.number("controller.t_end", c.t_end);
  if (!(c.t_end > 0.0)) r.fail("controller.t_end", "must be positive");
  const std::string mode = r.text("controller.mode", "stabilize");
  if (mode == "stabilize") {
    c.controller.mode = ControlMode::stabilize;
  } else if (mode == "track") {
    c.controller.mode = ControlMode::track;
    if (!r.has("controller.reference")) r.fail("controller.mode", "tracking needs controller.reference");
  } else {
    r.fail("controller.mode", "expected stabilize or track, got '" + mode + "'");
  }
  if (r.has("controller.reference"))
    c.controller.reference = InputSignal::from_expr(r.expression("controller.reference", {Var::t}));
}

void read_numerics(const ConfigReader& r, RunConfig& c) {
  const long long m = r.integer("numerics.m", c.m);
  if (m < 2 || m > 100000) r.fail("numerics.m", "grid size must lie in [2, 100000]");
  c.m = static_cast<int>(m);
  c.tol = r.number("numerics.tol", c.tol);
  if (!(c.tol > 0.0)) r.fail("numerics.tol", "must be positive");
  c.sample_dt = r.number("numerics.sample_dt", c.sample_dt);
  if (!(c.sample_dt > 0.0)) r.fail("numerics.sample_dt", "must be positive");
}

void read_uncertainty(const ConfigReader& r, RunConfig& c) {
  UncertaintySpec& s = c.uncertainty;
  s.eps_F = r.number("uncertainty.eps_F", 0.0);
  s.eps_Lambda = r.number("uncertainty.eps_Lambda", 0.0);
  s.eps_gu = r.number("uncertainty.eps_gu", 0.0);
  s.eps_gv = r.number("uncertainty.eps_gv", 0.0);
  s.eps_w = r.number("uncertainty.eps_w", 0.0);
  s.eps_wt = r.number("uncertainty.eps_wt", 0.0);
  s.eps_U = r.number("uncertainty.eps_U", 0.0);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("uncertainty section: ") + e.what());
  }
  c.n_runs = static_cast<int>(r.integer("uncertainty.n_runs", c.n_runs));
  const long long seed = r.integer("uncertainty.seed", 0);
  if (seed < 0) r.fail("uncertainty.seed", "must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.threads = static_cast<int>(r.integer("uncertainty.threads", 0));
  if (c.threads < 0) r.fail("uncertainty.threads", "must be nonnegative");
}

void read_rest(const ConfigReader& r, RunConfig& c) {
  if (r.has("input.U")) c.input = r.expression("input.U", {Var::t});
  c.output_dir = r.text("output.dir", c.output_dir);

  if (r.has("bounds.box")) {
    StateBox box;
    box.radius = r.number("bounds.box", 1.0);
    if (!(box.radius > 0.0)) r.fail("bounds.box", "radius must be positive");
    box.t_min = r.number("bounds.t_min", 0.0);
    box.t_max = r.number("bounds.t_max", box.t_min);
    if (box.t_max < box.t_min) r.fail("bounds.t_max", "must not be smaller than bounds.t_min");
    c.box = box;
  } else if (r.has("bounds.t_min") || r.has("bounds.t_max")) {
    throw ConfigError("bounds.t_min and bounds.t_max need bounds.box");
  }
  const long long density = r.integer("bounds.density", c.density);
  if (density < 2 || density > 100000) r.fail("bounds.density", "must lie in [2, 100000]");
  c.density = static_cast<int>(density);
  c.horizon = r.number("bounds.horizon", 0.0);
  if (c.horizon < 0.0) r.fail("bounds.horizon", "must be nonnegative");
  c.existential.kappa6 = r.number("bounds.kappa6", 0.0);
  c.existential.kappa10_tilde = r.number("bounds.kappa10_tilde", 0.0);
  c.epsilon_target = r.number("bounds.epsilon_target", 0.0);

  const std::string scheme = r.text("predict.scheme", "lattice");
  if (scheme == "lattice") {
    c.predict_scheme = PredictionScheme::lattice;
  } else if (scheme == "method_of_lines") {
    c.predict_scheme = PredictionScheme::method_of_lines;
  } else {
    r.fail("predict.scheme", "expected lattice or method_of_lines, got '" + scheme + "'");
  }
  c.fill_in_a = r.has("predict.fill_in_a") ? r.expression("predict.fill_in_a", {Var::t}) : Expr::constant(0.0);
  c.fill_in_b = r.has("predict.fill_in_b") ? r.expression("predict.fill_in_b", {Var::t})
                                           : Expr::constant(0.5) * Expr::variable(Var::t);
  c.predict_threshold = r.number("predict.threshold", 0.0);
  if (c.predict_threshold < 0.0) r.fail("predict.threshold", "must be nonnegative");
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  const ConfigReader reader(text, source);
  RunConfig c;
  read_model(reader, c);
  read_controller(reader, c);
  read_numerics(reader, c);
  read_uncertainty(reader, c);
  read_rest(reader, c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + (dir / name).string());
  return f;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  if (!c.input) throw ConfigError("simulate needs an explicit input signal (input.U)");
  const InputSignal U = InputSignal::from_expr(*c.input);
  std::vector<double> samples;
  for (long j = 0; j * c.sample_dt <= c.t_end + 1e-12; ++j) samples.push_back(std::min(j * c.sample_dt, c.t_end));
  if (samples.back() < c.t_end) samples.push_back(c.t_end);
  IntegrateOptions opt;
  opt.sample_times = samples;
  const Trajectory traj = integrate(c.model, c.initial, U, 0.0, c.t_end, c.m, c.tol, opt);
  const fs::path dir = prepare_dir(c.output_dir);
  std::ofstream f = open_output(dir, "trajectory.csv");
  write_trajectory_csv(f, traj);
  out << "simulate: " << traj.snapshots.size() << " snapshots, final ||w||_inf = " << fmt(traj.snapshots.back().norm_inf())
      << "\nwrote " << (dir / "trajectory.csv").string() << '\n';
  return 0;
}

int cmd_control(const RunConfig& c, std::ostream& out) {
  ClosedLoopOptions opt;
  opt.sample_dt = c.sample_dt;
  const ClosedLoopResult r = run_closed_loop(c.model, c.initial, c.controller, c.t_end, c.m, c.tol, opt);
  const fs::path dir = prepare_dir(c.output_dir);
  {
    std::ofstream f = open_output(dir, "trajectory.csv");
    write_trajectory_csv(f, r.trajectory);
  }
  {
    std::ofstream f = open_output(dir, "input.csv");
    write_input_csv(f, r.input);
  }
  {
    std::ofstream f = open_output(dir, "diagnostics.csv");
    write_diagnostics_csv(f, r.steps);
  }
  {
    std::ofstream f = open_output(dir, "boundary.csv");
    write_boundary_csv(f, r);
  }
  out << "control: " << r.steps.size() << " sampling steps, final ||w||_inf = "
      << fmt(r.trajectory.snapshots.back().norm_inf()) << "\nwrote trajectory.csv, input.csv, diagnostics.csv, "
      << "boundary.csv to " << dir.string() << '\n';
  return 0;
}

int cmd_ensemble(const RunConfig& c, std::ostream& out, std::ostream& err) {
  EnsembleConfig cfg;
  cfg.controller = c.controller;
  cfg.m = c.m;
  cfg.tol = c.tol;
  cfg.t_end = c.t_end;
  cfg.sample_dt = c.sample_dt;
  cfg.threads = c.threads;
  const EnsembleResult r = run_ensemble(c.model, c.initial, cfg, c.uncertainty, c.n_runs, c.seed);
  const fs::path dir = prepare_dir(c.output_dir);
  {
    std::ofstream f = open_output(dir, "percentiles.csv");
    write_percentiles_csv(f, r);
  }
  {
    std::ofstream f = open_output(dir, "runs.csv");
    write_runs_csv(f, r);
  }
  double worst = 0.0;
  for (const RunRecord& rec : r.runs)
    if (rec.status == "ok") worst = std::max(worst, rec.final_norm);
  out << "ensemble: " << r.runs.size() << " runs, " << r.failures << " failures, max final ||w||_inf = " << fmt(worst)
      << "\nwrote percentiles.csv, runs.csv to " << dir.string() << '\n';
  if (r.failures > 0) {
    for (const RunRecord& rec : r.runs)
      if (rec.status != "ok") err << "run " << rec.run << ' ' << rec.status << ": " << rec.message << '\n';
    return 1;
  }
  return 0;
}

// ||w_t(., 0)||_inf from the PDE on the sampled initial data, and sup |d_t g_u|
// over the state box.
InitialNorms initial_norms(const RunConfig& c, const StateBox& box) {
  InitialNorms n;
  const StateGrid g = StateGrid::sample(c.initial, c.m, box.t_min);
  n.w = g.norm_inf();
  const StateGrid wt = time_derivative_field(c.model, g);
  n.w_t = wt.norm_inf();
  for (int i = 0; i <= c.density; ++i) {
    const double v = box.radius * (2.0 * i / c.density - 1.0);
    for (int j = 0; j <= 4; ++j) {
      const double t = box.t_min + (box.t_max - box.t_min) * j / 4.0;
      n.dt_gu = std::max(n.dt_gu, std::fabs(c.model.g_u.partial(Var::t, 0.0, 0.0, v, t)));
    }
  }
  return n;
}

int cmd_bounds(const RunConfig& c, std::ostream& out) {
  std::vector<std::string> notes;
  StateBox box;
  const double w0 = c.initial.sup_norm();
  if (c.box) {
    box = *c.box;
  } else {
    box.radius = std::max(1.0, 2.0 * w0);
    notes.push_back("bounds.box not set: using the default state box ||z||_inf <= " + fmt(box.radius) +
                    " (max(1, 2 ||w0||_inf)) with t in [0, 0]");
  }
  BoundsOptions opt;
  opt.uncertainty = c.uncertainty;
  opt.operating_delta = c.controller.delta;
  opt.horizon = c.horizon;
  opt.existential = c.existential;
  const BoundsReport report = compute_report(c.model, initial_norms(c, box), c.controller.theta, box, c.density, opt);

  std::ostringstream text;
  for (const std::string& n : notes) text << "note: " << n << '\n';
  write_report_text(text, report);
  if (c.existential.kappa6 > 0.0 && c.epsilon_target > 0.0)
    text << "epsilon_max = " << fmt(epsilon_max(report, c.existential.kappa6, c.controller.delta, c.epsilon_target, w0))
         << '\n';

  const fs::path dir = prepare_dir(c.output_dir);
  {
    std::ofstream f = open_output(dir, "bounds.txt");
    f << text.str();
  }
  {
    std::ofstream f = open_output(dir, "bounds.csv");
    write_report_csv(f, report);
  }
  out << text.str() << "wrote bounds.txt, bounds.csv to " << dir.string() << '\n';
  return 0;
}

int cmd_predict_check(const RunConfig& c, std::ostream& out) {
  const StateGrid W = StateGrid::sample(c.initial, c.m, 0.0);
  const double v1 = W.v[c.m];
  auto fill_in = [&](const Expr& shape) {
    const Expr e = Expr::constant(v1 - shape.eval(0.0, 0.0, 0.0, 0.0)) + shape;
    return InputSignal::from_expr(e);
  };
  PredictOptions a;
  a.scheme = c.predict_scheme;
  a.fill_in = fill_in(c.fill_in_a);
  PredictOptions b = a;
  b.fill_in = fill_in(c.fill_in_b);
  const PredictionBundle pa = predict(c.model, W, c.tol, a);
  const PredictionBundle pb = predict(c.model, W, c.tol, b);
  const double discrepancy = bundle_discrepancy(pa, pb);
  const double threshold = c.predict_threshold > 0.0 ? c.predict_threshold : 50.0 * c.tol;
  const bool pass = discrepancy <= threshold;

  std::ostringstream text;
  text << "scheme        = " << (c.predict_scheme == PredictionScheme::lattice ? "lattice" : "method_of_lines") << '\n'
       << "m             = " << c.m << '\n'
       << "fill_in_a     = v(1,0) + (" << c.fill_in_a.str() << ") - (" << fmt(c.fill_in_a.eval(0, 0, 0, 0)) << ")\n"
       << "fill_in_b     = v(1,0) + (" << c.fill_in_b.str() << ") - (" << fmt(c.fill_in_b.eval(0, 0, 0, 0)) << ")\n"
       << "tau_k         = " << fmt(pa.tau_k()) << '\n'
       << "v0_at_tau_k   = " << fmt(pa.v0_at_tauk()) << '\n'
       << "discrepancy   = " << fmt(discrepancy) << '\n'
       << "threshold     = " << fmt(threshold) << '\n'
       << (pass ? "PASS" : "FAIL") << " prediction independent of the fill-in input\n";
  const fs::path dir = prepare_dir(c.output_dir);
  {
    std::ofstream f = open_output(dir, "predict_check.txt");
    f << text.str();
  }
  {
    std::ofstream f = open_output(dir, "bundle_a.csv");
    write_bundle_csv(f, pa);
  }
  {
    std::ofstream f = open_output(dir, "bundle_b.csv");
    write_bundle_csv(f, pb);
  }
  out << text.str() << "wrote predict_check.txt, bundle_a.csv, bundle_b.csv to " << dir.string() << '\n';
  return pass ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and boundary control of 2x2 quasilinear hyperbolic systems", "hypcon"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs, m;
  std::optional<double> tol;
  app.add_option("--config", config_path, "Configuration file")->required();
  app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
  app.add_option("--seed", seed, "Ensemble seed (overrides uncertainty.seed)");
  app.add_option("--runs", runs, "Ensemble size (overrides uncertainty.n_runs)");
  app.add_option("--m", m, "Grid cells (overrides numerics.m)")->check(CLI::Range(2, 100000));
  app.add_option("--tol", tol, "Integrator tolerance (overrides numerics.tol)")->check(CLI::PositiveNumber);

  CLI::App* simulate = app.add_subcommand("simulate", "Open-loop simulation with input.U");
  CLI::App* control = app.add_subcommand("control", "Closed loop with the sampled predictive controller");
  CLI::App* ensemble = app.add_subcommand("ensemble", "Monte-Carlo robustness ensemble");
  CLI::App* bounds = app.add_subcommand("bounds", "Certificate constants and feasibility verdicts");
  CLI::App* predict_check = app.add_subcommand("predict-check", "Fill-in independence of the prediction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    app.exit(e, out, err);
    return 2;
  }

  try {
    RunConfig c = load_config(config_path);
    if (out_dir) c.output_dir = *out_dir;
    if (seed) c.seed = *seed;
    if (runs) c.n_runs = *runs;
    if (m) c.m = *m;
    if (tol) c.tol = *tol;

    if (simulate->parsed()) return cmd_simulate(c, out);
    if (control->parsed()) return cmd_control(c, out);
    if (ensemble->parsed()) return cmd_ensemble(c, out, err);
    if (bounds->parsed()) return cmd_bounds(c, out);
    if (predict_check->parsed()) return cmd_predict_check(c, out);
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hypcon
