#include "hypcon/uncertainty.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

#include "hypcon/errors.hpp"
#include "hypcon/io.hpp"

namespace hypcon {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_interval(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; }

}  // namespace

void UncertaintySpec::validate(bool certificate) const {
  const double all[] = {eps_Lambda, eps_F, eps_gu, eps_gv, eps_w, eps_wt, eps_U};
  for (double e : all)
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("uncertainty bounds must be finite and nonnegative");
  if (eps_w > 1.0 || eps_wt > 1.0) throw ConfigError("eps_w and eps_wt must not exceed 1");
  if (certificate && eps_U > 0.25) throw ConfigError("eps_U must not exceed 1/4 for the robustness certificate");
}

bool UncertaintySpec::is_zero() const {
  return eps_Lambda == 0.0 && eps_F == 0.0 && eps_gu == 0.0 && eps_gv == 0.0 && eps_w == 0.0 && eps_wt == 0.0 &&
         eps_U == 0.0;
}

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::f_u: return "eps_fu";
    case Channel::f_v: return "eps_fv";
    case Channel::lambda_u: return "eps_lambda_u";
    case Channel::lambda_v: return "eps_lambda_v";
    case Channel::g_u: return "eps_gu";
    case Channel::g_v: return "eps_gv";
    case Channel::w_u: return "eps_wu";
    case Channel::w_v: return "eps_wv";
    case Channel::U: return "eps_U";
  }
  return "?";
}

std::array<double, channel_count> channel_bounds(const UncertaintySpec& s) {
  return {s.eps_F, s.eps_F, s.eps_Lambda, s.eps_Lambda, s.eps_gu, s.eps_gv, s.eps_w, s.eps_w, s.eps_U};
}

Realization corner_realization(const UncertaintySpec& spec, std::uint64_t index) {
  const auto bounds = channel_bounds(spec);
  Realization r;
  r.corner = true;
  for (int j = 0; j < channel_count; ++j) r.eps[j] = (index >> j) & 1U ? bounds[j] : -bounds[j];
  return r;
}

Realization random_realization(const UncertaintySpec& spec, std::uint64_t seed) {
  const auto bounds = channel_bounds(spec);
  Realization r;
  r.seed = seed;
  std::uint64_t state = seed;
  for (int j = 0; j < channel_count; ++j) r.eps[j] = bounds[j] * (2.0 * unit_interval(state) - 1.0);
  return r;
}

SystemModel perturb_model(const SystemModel& model, const Realization& r) {
  const double su = 1.0 + r[Channel::lambda_u], sv = 1.0 + r[Channel::lambda_v];
  if (!(su > 0.0) || !(sv > 0.0)) throw ModelError("perturbed transport speed factor not positive");
  SystemModel p = model;
  p.lambda_u = model.lambda_u.scaled(su);
  p.lambda_v = model.lambda_v.scaled(sv);
  p.f_u = model.f_u.scaled(1.0 + r[Channel::f_u]);
  p.f_v = model.f_v.scaled(1.0 + r[Channel::f_v]);
  p.g_u = model.g_u.scaled(1.0 + r[Channel::g_u]);
  const double egv = r[Channel::g_v];
  if (egv != 0.0) {
    if (const Expr* e = model.g_v.expr()) {
      p.g_v = Coefficient(*e + Expr::constant(egv) * Expr::variable(Var::u));
    } else {
      const Coefficient inner = model.g_v;
      p.g_v = Coefficient::from_function(
          [inner, egv](double x, double u, double v, double t) { return inner(x, u, v, t) + egv * u; },
          model.g_v.describe());
    }
  }
  p.input_gain = model.input_gain * (1.0 + r[Channel::U]);
  p.name = model.name + " (perturbed)";
  return p;
}

StateGrid corrupt_measurement(const StateGrid& W, double eps_u, double eps_v, double U_value,
                              const SystemModel& model) {
  StateGrid out = W;
  const int m = W.m;
  for (int i = 0; i <= m; ++i) {
    out.u[i] *= 1.0 + eps_u;
    out.v[i] *= 1.0 + eps_v;
  }
  // The u correction vanishes at x = 1 and the v correction at x = 0, so the
  // two conditions do not interact.
  const double du = model.boundary_u(out.v[0], W.t) - out.u[0];
  const double dv = model.boundary_v(U_value, out.u[m], W.t) - out.v[m];
  for (int i = 0; i <= m; ++i) {
    const double x = W.x(i);
    out.u[i] += (1.0 - x) * du;
    out.v[i] += x * dv;
  }
  out.u[0] = model.boundary_u(out.v[0], W.t);
  out.v[m] = model.boundary_v(U_value, out.u[m], W.t);
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::vector<double> sample_grid(double t_end, double dt) {
  std::vector<double> t{0.0};
  for (long j = 1; j * dt <= t_end + 1e-12; ++j) t.push_back(std::min(j * dt, t_end));
  if (t.back() < t_end) t.push_back(t_end);
  return t;
}

RunRecord run_one(const SystemModel& model, const InitialData& w0, const EnsembleConfig& config,
                  const Realization& real, int index) {
  RunRecord rec;
  rec.run = index;
  rec.realization = real;
  SystemModel plant;
  try {
    plant = perturb_model(model, real);
  } catch (const ModelError& e) {
    rec.status = "skipped";
    rec.message = e.what();
    return rec;
  }
  const double eu = real[Channel::w_u], ev = real[Channel::w_v];
  StateGrid start = StateGrid::sample(w0, config.m, 0.0);
  if (config.scale_initial_state) {
    for (int i = 0; i <= config.m; ++i) {
      start.u[i] /= 1.0 + eu;
      start.v[i] /= 1.0 + ev;
    }
  }
  ClosedLoopOptions opt;
  opt.plant = &plant;
  opt.record_steps = false;
  opt.sample_dt = config.sample_dt;
  opt.measure = [&](const StateGrid& W, int, double U_applied) {
    return corrupt_measurement(W, eu, ev, U_applied, model);
  };
  try {
    const ClosedLoopResult r = run_closed_loop(model, start, config.controller, config.t_end, config.tol, opt);
    for (const auto& [t, n] : r.norm_trace) rec.norms.push_back(n);
    rec.final_norm = r.trajectory.snapshots.back().norm_inf();
    if (!std::isfinite(rec.final_norm)) throw IntegrationError(IntegrationError::Kind::non_finite, config.t_end,
                                                               "non-finite final state");
    rec.status = "ok";
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.message = e.what();
    rec.final_norm = std::nan("");
  }
  return rec;
}

}  // namespace

EnsembleResult run_ensemble(const SystemModel& model, const InitialData& w0, const EnsembleConfig& config,
                            const UncertaintySpec& spec, int n_runs, std::uint64_t seed) {
  if (n_runs < 2) throw ConfigError("an ensemble needs at least 2 runs");
  if (!(config.sample_dt > 0.0)) throw ConfigError("ensemble sample_dt must be positive");
  spec.validate();
  const std::uint64_t corners = std::uint64_t{1} << channel_count;
  std::vector<Realization> reals(static_cast<std::size_t>(n_runs));
  for (int r = 0; r < n_runs; ++r) {
    const auto ur = static_cast<std::uint64_t>(r);
    reals[static_cast<std::size_t>(r)] =
        ur < corners ? corner_realization(spec, ur) : random_realization(spec, seed ^ ur);
  }

  EnsembleResult result;
  result.times = sample_grid(config.t_end, config.sample_dt);
  result.runs.resize(reals.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < n_runs; r = next++)
      result.runs[static_cast<std::size_t>(r)] = run_one(model, w0, config, reals[static_cast<std::size_t>(r)], r);
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, n_runs);
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  for (const RunRecord& rec : result.runs)
    if (rec.status != "ok") ++result.failures;
  for (std::size_t j = 0; j < result.times.size(); ++j) {
    std::vector<double> column;
    for (const RunRecord& rec : result.runs)
      if (rec.status == "ok" && j < rec.norms.size()) column.push_back(rec.norms[j]);
    for (std::size_t p = 0; p < ensemble_levels.size(); ++p)
      result.percentiles[p].push_back(percentile(column, ensemble_levels[p]));
  }
  return result;
}

void write_percentiles_csv(std::ostream& out, const EnsembleResult& result) {
  out << "t,p01,p25,p50,p75,p99\n";
  for (std::size_t j = 0; j < result.times.size(); ++j) {
    write_row(out, {result.times[j], result.percentiles[0][j], result.percentiles[1][j], result.percentiles[2][j],
                    result.percentiles[3][j], result.percentiles[4][j]});
  }
}

void write_runs_csv(std::ostream& out, const EnsembleResult& result) {
  out << "run";
  for (int j = 0; j < channel_count; ++j) out << ',' << channel_name(static_cast<Channel>(j));
  out << ",final_norm,status\n";
  for (const RunRecord& rec : result.runs) {
    out << rec.run;
    for (double e : rec.realization.eps) out << ',' << fmt(e);
    out << ',' << fmt(rec.final_norm) << ',' << rec.status << '\n';
  }
}

}  // namespace hypcon
