#include "hypcon/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "hypcon/errors.hpp"
#include "hypcon/io.hpp"

namespace hypcon {

VirtualInput VirtualInput::stabilize(double v0k, double tau_k, double delta) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  VirtualInput U;
  U.tau_k_ = tau_k;
  U.delta_ = delta;
  if (std::fabs(v0k) < 1e-12) {
    U.t_meet_ = tau_k;
    return U;
  }
  U.v0k_ = v0k;
  U.slope_ = v0k > 0.0 ? -delta : delta;
  U.t_meet_ = tau_k + std::fabs(v0k) / delta;
  return U;
}

VirtualInput VirtualInput::track(double v0k, double tau_k, double delta, const InputSignal& reference,
                                 double horizon) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  VirtualInput U;
  U.v0k_ = v0k;
  U.tau_k_ = tau_k;
  U.delta_ = delta;
  U.reference_ = reference;
  const double e0 = v0k - reference.value(tau_k);
  if (std::fabs(e0) < 1e-12) {
    U.t_meet_ = tau_k;
    return U;
  }
  U.slope_ = e0 > 0.0 ? -delta : delta;
  auto gap = [&](double t) { return v0k + U.slope_ * (t - tau_k) - reference.value(t); };
  const double dt = std::fabs(e0) / delta / 256.0;
  double lo = tau_k;
  double hi = tau_k;
  bool crossed = false;
  while (hi < tau_k + horizon) {
    if (std::fabs(reference.rate(hi)) > delta * (1.0 + 1e-12)) {
      throw ConfigError("reference rate " + fmt(reference.rate(hi)) + " exceeds delta at t=" + fmt(hi));
    }
    lo = hi;
    hi += dt;
    if (gap(hi) * e0 <= 0.0) {
      crossed = true;
      break;
    }
  }
  if (!crossed) {
    U.t_meet_ = std::numeric_limits<double>::infinity();
    return U;
  }
  for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, std::fabs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) * e0 > 0.0) lo = mid;
    else hi = mid;
  }
  U.t_meet_ = hi;
  return U;
}

double VirtualInput::operator()(double t) const {
  if (t <= tau_k_) return v0k_;
  if (t >= t_meet_) return reference_ ? reference_->value(t) : 0.0;
  return v0k_ + slope_ * (t - tau_k_);
}

double VirtualInput::rate(double t) const {
  if (t < tau_k_) return 0.0;
  if (t >= t_meet_) return reference_ ? reference_->rate(t) : 0.0;
  return slope_;
}

// ---------------------------------------------------------------------------

namespace {

struct XSlopes {
  double v, v_t;
};

// d/dx of (v*, v*_t) along the input characteristic.
XSlopes x_slopes(const SystemModel& model, double x, double u, double v, double ut, double vt) {
  const Coeffs k = eval_coeffs(model, x, u, v);
  const CCoeffs c = eval_c_coeffs(model, x, u, v);
  return XSlopes{-k.f_v / k.lambda_v, -(c[4] * ut * vt + c[5] * vt * vt + c[6] * ut + c[7] * vt) / k.lambda_v};
}

// Heun march of v and v_t from x = 0 given u, u_t on the nodes.
void march_v(const SystemModel& model, const std::vector<double>& u, const std::vector<double>& ut,
             std::vector<double>& v, std::vector<double>& vt) {
  const int m = static_cast<int>(u.size()) - 1;
  const double h = 1.0 / m;
  for (int i = 0; i < m; ++i) {
    const auto a = static_cast<std::size_t>(i);
    const auto b = a + 1;
    const double xa = static_cast<double>(i) / m, xb = static_cast<double>(i + 1) / m;
    const XSlopes s0 = x_slopes(model, xa, u[a], v[a], ut[a], vt[a]);
    const double vp = v[a] + h * s0.v;
    const double vtp = vt[a] + h * s0.v_t;
    const XSlopes s1 = x_slopes(model, xb, u[b], vp, ut[b], vtp);
    v[b] = v[a] + 0.5 * h * (s0.v + s1.v);
    vt[b] = vt[a] + 0.5 * h * (s0.v_t + s1.v_t);
  }
}

double physical_input(const SystemModel& model, double v1, double u1, double t) {
  return (v1 - model.g_v(1.0, u1, 0.0, t)) / model.input_gain;
}

bool all_finite(const std::vector<double>& a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TargetState solve_target_dynamics(const SystemModel& model, const PredictionBundle& bundle, const VirtualInput& U_star,
                                  double t_end, double v1_measured, const TargetOptions& options) {
  const int m = bundle.m;
  const double h = 1.0 / m;
  const auto n = static_cast<std::size_t>(m) + 1;
  std::vector<double> u = bundle.u, ut = bundle.u_t, v(n), vt(n), g(n), nu(n), mu(n), lam_u(n), lam_v(n);
  double tau0 = bundle.tau_k();
  double s = bundle.t_k;
  TargetState out;
  bool first = true;

  for (;;) {
    const double Us = U_star(tau0);
    const double Us_t = U_star.rate(tau0);
    v[0] = Us;
    vt[0] = Us_t;
    u[0] = model.boundary_u(Us, tau0);
    ut[0] = model.g_u.partial(Var::v, 0.0, 0.0, Us, tau0) * Us_t + model.g_u.partial(Var::t, 0.0, 0.0, Us, tau0);
    march_v(model, u, ut, v, vt);

    // d/ds tau_v(s; x) = exp(-int_x^1 k) with k = (d_u lambda_v u_t + d_v lambda_v v_t) / lambda_v^2.
    std::vector<double> kk(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / m;
      const Coeffs k = eval_coeffs(model, x, u[i], v[i]);
      const CCoeffs c = eval_c_coeffs(model, x, u[i], v[i]);
      lam_u[i] = k.lambda_u;
      lam_v[i] = k.lambda_v;
      kk[i] = (c[4] * ut[i] + c[5] * vt[i]) / k.lambda_v;
    }
    double log_g = 0.0;
    g[n - 1] = 1.0;
    for (std::size_t i = n - 1; i-- > 0;) {
      log_g -= 0.5 * h * (kk[i] + kk[i + 1]);
      g[i] = std::exp(log_g);
    }
    double mu_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nu[i] = g[i] * lam_v[i] / (lam_u[i] + lam_v[i]);
      mu[i] = nu[i] * lam_u[i];
      mu_max = std::max(mu_max, mu[i]);
    }
    if (!all_finite(v) || !all_finite(vt) || !all_finite(g) || !all_finite(u) || !all_finite(ut)) {
      throw ControllerError(-1, "target dynamics produced non-finite values at s=" + fmt(s) +
                                    " (decay rate too large for the predicted state?)");
    }

    if (first) {
      out.offset = v1_measured - v[n - 1];
      first = false;
    }
    out.times.push_back(s);
    out.input.push_back(physical_input(model, v[n - 1] + out.offset, u[n - 1], s));
    if (options.keep_levels) out.levels.push_back(TargetLevel{s, tau0, u, v, ut, vt, g, nu, mu});

    const double remaining = t_end - s;
    if (remaining <= 1e-13 * std::max(1.0, std::fabs(t_end))) break;
    double dt = mu_max > 0.0 ? std::min(remaining, options.cfl * h / mu_max) : remaining;
    if (remaining - dt < 1e-9 * dt) dt = remaining;

    std::vector<double> ut_new(ut), u_new(u);
    for (std::size_t i = 1; i < n; ++i) {
      const double x = static_cast<double>(i) / m;
      const CCoeffs c = eval_c_coeffs(model, x, u[i], v[i]);
      const double Q = c[0] * ut[i] * ut[i] + c[1] * ut[i] * vt[i] + c[2] * ut[i] + c[3] * vt[i];
      ut_new[i] = ut[i] - dt * mu[i] * (ut[i] - ut[i - 1]) / h + dt * nu[i] * Q;
      u_new[i] = u[i] + dt * g[i] * ut[i];
    }
    u.swap(u_new);
    ut.swap(ut_new);
    tau0 += dt * g[0];
    s = dt == remaining ? t_end : s + dt;
  }
  return out;
}

ControlSignal control_segment(const TargetState& target) {
  if (target.times.size() == 1) return ControlSignal({target.times[0]}, {target.input[0]});
  return ControlSignal(target.times, target.input);
}

// ---------------------------------------------------------------------------

ClosedLoopResult run_closed_loop(const SystemModel& model, const StateGrid& w0, const ControllerConfig& config,
                                 double t_end, double tol, const ClosedLoopOptions& options) {
  if (!(config.theta > 0.0)) throw ConfigError("theta must be positive");
  if (!(config.delta > 0.0)) throw ConfigError("delta must be positive");
  if (config.mode == ControlMode::track && !config.reference) throw ConfigError("tracking mode needs a reference");
  const SystemModel& plant = options.plant ? *options.plant : model;
  const int m = w0.m;

  ClosedLoopResult result;
  StateGrid W = w0;
  double t_k = w0.t;
  double U_applied = physical_input(plant, W.v[m], W.u[m], t_k);
  result.trajectory.push(W);
  std::set<double> grid_times;
  if (options.sample_dt > 0.0) result.norm_trace.emplace_back(t_k, W.norm_inf());

  for (int k = 0; t_k < t_end - 1e-12 * std::max(1.0, t_end); ++k) {
    double t_next = std::min(t_k + config.theta, t_end);
    if (t_end - t_next < 1e-9 * config.theta) t_next = t_end;

    const StateGrid meas = options.measure ? options.measure(W, k, U_applied) : W;
    PredictionBundle bundle;
    VirtualInput U_star;
    TargetState target;
    try {
      bundle = predict(model, meas, tol, config.prediction);
      if (config.mode == ControlMode::track)
        U_star = VirtualInput::track(bundle.v0_at_tauk(), bundle.tau_k(), config.delta, *config.reference);
      else
        U_star = VirtualInput::stabilize(bundle.v0_at_tauk(), bundle.tau_k(), config.delta);
      target = solve_target_dynamics(model, bundle, U_star, t_next, meas.v[m]);
    } catch (const ControllerError& e) {
      throw ControllerError(k, e.what());
    } catch (const std::runtime_error& e) {
      throw ControllerError(k, e.what());
    }
    const ControlSignal seg = control_segment(target);

    StepDiagnostics d;
    d.k = k;
    d.t_k = t_k;
    d.tau_k = bundle.tau_k();
    d.v0k = bundle.v0_at_tauk();
    d.norm_w_inf = meas.norm_inf();
    d.norm_wt_inf = time_derivative_field(model, meas).norm_inf();
    d.U_at_tk = seg(t_k);
    result.steps.push_back(d);
    result.virtual_inputs.push_back(U_star);
    if (k == 0) result.trajectory.input.append(t_k, seg(t_k));

    IntegrateOptions io;
    io.record_steps = options.record_steps;
    if (options.sample_dt > 0.0) {
      const double dt = options.sample_dt;
      for (long j = static_cast<long>(std::floor(t_k / dt)) + 1; j * dt <= t_next + 1e-12; ++j) {
        const double ts = std::min(j * dt, t_next);
        if (ts > t_k) {
          io.sample_times.push_back(ts);
          grid_times.insert(ts);
        }
      }
    }
    if (io.sample_times.empty() || io.sample_times.back() != t_next) io.sample_times.push_back(t_next);
    const Trajectory tr = integrate(plant, W, InputSignal::from(seg), t_k, t_next, tol, io);
    for (const StateGrid& g : tr.snapshots) {
      if (g.t <= t_k) continue;
      result.trajectory.push(g);
      result.trajectory.input.append(g.t, seg(g.t));
      if (grid_times.count(g.t) && (result.norm_trace.empty() || result.norm_trace.back().first < g.t))
        result.norm_trace.emplace_back(g.t, g.norm_inf());
    }
    result.input.extend(seg);
    W = tr.snapshots.back();
    W.t = t_next;
    U_applied = seg(t_next);
    t_k = t_next;
  }
  return result;
}

ClosedLoopResult run_closed_loop(const SystemModel& model, const InitialData& w0, const ControllerConfig& config,
                                 double t_end, int m, double tol, const ClosedLoopOptions& options) {
  const StateGrid g = StateGrid::sample(w0, m, 0.0);
  const double defect = w0.compatibility_defect(model);
  if (defect > std::max(tol, 1e-12))
    throw ConfigError("initial data violate u0(0) = g_u(v0(0)) (defect " + fmt(defect) + ")");
  return run_closed_loop(model, g, config, t_end, tol, options);
}

double continuous_law_step(const SystemModel& model, const StateGrid& W_t, double delta, double smoothing,
                           double tol) {
  const PredictionBundle b = predict(model, W_t, tol);
  const double v0 = b.v0_at_tauk();
  const double sgn = smoothing > 0.0 ? std::tanh(v0 / smoothing) : (v0 > 0.0) - (v0 < 0.0);
  std::vector<double> v = b.v, vt(v.size(), 0.0);
  vt[0] = -delta * sgn;
  // v is taken from the prediction; only v_t is marched.
  const int m = b.m;
  const double h = 1.0 / m;
  for (int i = 0; i < m; ++i) {
    const auto a = static_cast<std::size_t>(i);
    const XSlopes s0 = x_slopes(model, static_cast<double>(i) / m, b.u[a], v[a], b.u_t[a], vt[a]);
    const double vtp = vt[a] + h * s0.v_t;
    const XSlopes s1 = x_slopes(model, static_cast<double>(i + 1) / m, b.u[a + 1], v[a + 1], b.u_t[a + 1], vtp);
    vt[a + 1] = vt[a] + 0.5 * h * (s0.v_t + s1.v_t);
  }
  const auto e = static_cast<std::size_t>(m);
  const double dgv = model.g_v.partial(Var::u, 1.0, b.u[e], 0.0, W_t.t) * b.u_t[e] +
                     model.g_v.partial(Var::t, 1.0, b.u[e], 0.0, W_t.t);
  return (vt[e] - dgv) / model.input_gain;
}

void write_diagnostics_csv(std::ostream& out, const std::vector<StepDiagnostics>& steps) {
  out << "k,t_k,tau_k,v0k,norm_w_inf,norm_wt_inf,U_at_tk\n";
  for (const StepDiagnostics& d : steps) {
    out << d.k << ',';
    write_row(out, {d.t_k, d.tau_k, d.v0k, d.norm_w_inf, d.norm_wt_inf, d.U_at_tk});
  }
}

void write_boundary_csv(std::ostream& out, const ClosedLoopResult& result) {
  out << "t,U,v0,norm_inf\n";
  for (const StateGrid& g : result.trajectory.snapshots)
    write_row(out, {g.t, result.trajectory.input(g.t), g.v[0], g.norm_inf()});
}

void write_input_csv(std::ostream& out, const ControlSignal& input) {
  out << "t,U\n";
  for (std::size_t j = 0; j < input.times().size(); ++j) write_row(out, {input.times()[j], input.values()[j]});
}

}  // namespace hypcon
