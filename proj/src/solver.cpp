#include "hypcon/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include "hypcon/errors.hpp"
#include "hypcon/io.hpp"

namespace hypcon {

double StateGrid::norm_inf() const {
  double s = 0.0;
  for (int i = 0; i <= m; ++i) s = std::max({s, std::fabs(u[i]), std::fabs(v[i])});
  return s;
}

bool StateGrid::finite() const {
  for (int i = 0; i <= m; ++i)
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) return false;
  return true;
}

StateGrid StateGrid::sample(const InitialData& data, int m, double t) {
  StateGrid g(m, t);
  for (int i = 0; i <= m; ++i) {
    g.u[i] = data.u_at(g.x(i));
    g.v[i] = data.v_at(g.x(i));
  }
  return g;
}

StateGrid StateGrid::constant(int m, double u, double v, double t) {
  StateGrid g(m, t);
  std::fill(g.u.begin(), g.u.end(), u);
  std::fill(g.v.begin(), g.v.end(), v);
  return g;
}

// ---------------------------------------------------------------------------

ControlSignal::ControlSignal(std::vector<double> times, std::vector<double> values)
    : t_(std::move(times)), u_(std::move(values)) {
  if (t_.size() != u_.size()) throw std::invalid_argument("ControlSignal: size mismatch");
  for (std::size_t j = 1; j < t_.size(); ++j)
    if (!(t_[j] > t_[j - 1])) throw std::invalid_argument("ControlSignal: times must increase");
}

ControlSignal ControlSignal::constant(double value, double t0, double t1) {
  if (t1 > t0) return ControlSignal({t0, t1}, {value, value});
  return ControlSignal({t0}, {value});
}

void ControlSignal::append(double t, double value) {
  if (!t_.empty()) {
    if (t == t_.back()) return;
    if (t < t_.back()) throw std::invalid_argument("ControlSignal: appended time precedes the end");
  }
  t_.push_back(t);
  u_.push_back(value);
}

void ControlSignal::extend(const ControlSignal& other) {
  for (std::size_t j = 0; j < other.t_.size(); ++j) append(other.t_[j], other.u_[j]);
}

double ControlSignal::operator()(double t) const {
  if (t_.empty()) return 0.0;
  if (t <= t_.front()) return u_.front();
  if (t >= t_.back()) return u_.back();
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - t_.begin()) - 1;
  const double s = (t - t_[j]) / (t_[j + 1] - t_[j]);
  return u_[j] + s * (u_[j + 1] - u_[j]);
}

double ControlSignal::rate(double t) const {
  if (t_.size() < 2 || t < t_.front() || t >= t_.back()) return 0.0;
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - t_.begin()) - 1;
  return (u_[j + 1] - u_[j]) / (t_[j + 1] - t_[j]);
}

double ControlSignal::lipschitz() const {
  double l = 0.0;
  for (std::size_t j = 1; j < t_.size(); ++j) l = std::max(l, std::fabs((u_[j] - u_[j - 1]) / (t_[j] - t_[j - 1])));
  return l;
}

InputSignal InputSignal::from(ControlSignal signal) {
  auto shared = std::make_shared<const ControlSignal>(std::move(signal));
  return InputSignal{[shared](double t) { return (*shared)(t); }, [shared](double t) { return shared->rate(t); }};
}

InputSignal InputSignal::constant(double c) {
  return InputSignal{[c](double) { return c; }, [](double) { return 0.0; }};
}

InputSignal InputSignal::from_expr(const Expr& e) {
  const Expr de = differentiate(e, Var::t);
  return InputSignal{[e](double t) { return e.eval(0.0, 0.0, 0.0, t); },
                     [de](double t) { return de.eval(0.0, 0.0, 0.0, t); }};
}

// ---------------------------------------------------------------------------

std::size_t Trajectory::bracket(double t) const {
  if (snapshots.size() < 2 || t <= snapshots.front().t) return 0;
  if (t >= snapshots.back().t) return snapshots.size() - 2;
  const auto it = std::upper_bound(snapshots.begin(), snapshots.end(), t,
                                   [](double value, const StateGrid& g) { return value < g.t; });
  return static_cast<std::size_t>(it - snapshots.begin()) - 1;
}

double Trajectory::u_at(int i, double t) const {
  if (snapshots.size() == 1) return snapshots.front().u[i];
  const std::size_t j = bracket(t);
  const StateGrid& a = snapshots[j];
  const StateGrid& b = snapshots[j + 1];
  const double s = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  return a.u[i] + s * (b.u[i] - a.u[i]);
}

double Trajectory::v_at(int i, double t) const {
  if (snapshots.size() == 1) return snapshots.front().v[i];
  const std::size_t j = bracket(t);
  const StateGrid& a = snapshots[j];
  const StateGrid& b = snapshots[j + 1];
  const double s = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  return a.v[i] + s * (b.v[i] - a.v[i]);
}

void Trajectory::w_at(double x, double t, double& u, double& v) const {
  const int mm = m();
  const double pos = std::clamp(x, 0.0, 1.0) * mm;
  const int i = std::min(static_cast<int>(pos), mm - 1);
  const double r = pos - i;
  u = (1.0 - r) * u_at(i, t) + r * u_at(i + 1, t);
  v = (1.0 - r) * v_at(i, t) + r * v_at(i + 1, t);
}

StateGrid Trajectory::at(double t) const {
  StateGrid g(m(), t);
  for (int i = 0; i <= g.m; ++i) {
    g.u[i] = u_at(i, t);
    g.v[i] = v_at(i, t);
  }
  return g;
}

void Trajectory::push(const StateGrid& g) {
  if (!snapshots.empty() && !(g.t > snapshots.back().t)) return;
  snapshots.push_back(g);
}

// ---------------------------------------------------------------------------

void impose_boundary(const SystemModel& model, StateGrid& grid, double U, double t) {
  grid.u[0] = model.boundary_u(grid.v[0], t);
  grid.v[grid.m] = model.boundary_v(U, grid.u[grid.m], t);
}

namespace {

// State layout for the integrator: y = (u_0..u_m, v_0..v_m).
struct Layout {
  int m;
  std::size_t size() const { return 2 * static_cast<std::size_t>(m + 1); }
  std::size_t u(int i) const { return static_cast<std::size_t>(i); }
  std::size_t v(int i) const { return static_cast<std::size_t>(m + 1 + i); }
};

void impose_flat(const SystemModel& model, const Layout& L, double* y, double U, double t) {
  y[L.u(0)] = model.boundary_u(y[L.v(0)], t);
  y[L.v(L.m)] = model.boundary_v(U, y[L.u(L.m)], t);
}

[[noreturn]] void non_finite(double t, const char* field, int i, int m) {
  throw IntegrationError(IntegrationError::Kind::non_finite, t,
                         std::string("non-finite ") + field + " at node " + std::to_string(i) + " (x=" +
                             std::to_string(static_cast<double>(i) / m) + ", t=" + std::to_string(t) + ")");
}

// Returns false if any derivative is non-finite.
bool rhs_flat(const SystemModel& model, const Layout& L, const double* y, double* dy, double U_t, double t) {
  const int m = L.m;
  const double inv_h = static_cast<double>(m);
  bool ok = true;
  for (int i = 0; i <= m; ++i) {
    const double x = static_cast<double>(i) / m;
    const double ui = y[L.u(i)];
    const double vi = y[L.v(i)];
    const Coeffs c = eval_coeffs(model, x, ui, vi);
    if (i > 0) dy[L.u(i)] = -c.lambda_u * (ui - y[L.u(i - 1)]) * inv_h + c.f_u;
    if (i < m) dy[L.v(i)] = c.lambda_v * (y[L.v(i + 1)] - vi) * inv_h + c.f_v;
  }
  dy[L.u(0)] = model.g_u.partial(Var::v, 0.0, 0.0, y[L.v(0)], t) * dy[L.v(0)] +
               model.g_u.partial(Var::t, 0.0, 0.0, y[L.v(0)], t);
  dy[L.v(m)] = model.input_gain * U_t + model.g_v.partial(Var::u, 1.0, y[L.u(m)], 0.0, t) * dy[L.u(m)] +
               model.g_v.partial(Var::t, 1.0, y[L.u(m)], 0.0, t);
  for (std::size_t k = 0; k < L.size(); ++k)
    if (!std::isfinite(dy[k])) ok = false;
  return ok;
}

void to_flat(const StateGrid& g, const Layout& L, std::vector<double>& y) {
  y.resize(L.size());
  for (int i = 0; i <= L.m; ++i) {
    y[L.u(i)] = g.u[i];
    y[L.v(i)] = g.v[i];
  }
}

StateGrid from_flat(const std::vector<double>& y, const Layout& L, double t) {
  StateGrid g(L.m, t);
  for (int i = 0; i <= L.m; ++i) {
    g.u[i] = y[L.u(i)];
    g.v[i] = y[L.v(i)];
  }
  return g;
}

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

StateGrid rhs(const SystemModel& model, const StateGrid& grid, double U_t, double t) {
  const Layout L{grid.m};
  std::vector<double> y;
  to_flat(grid, L, y);
  std::vector<double> dy(L.size(), 0.0);
  if (!rhs_flat(model, L, y.data(), dy.data(), U_t, t)) {
    for (int i = 0; i <= L.m; ++i) {
      if (!std::isfinite(dy[L.u(i)])) non_finite(t, "u_t", i, L.m);
      if (!std::isfinite(dy[L.v(i)])) non_finite(t, "v_t", i, L.m);
    }
  }
  return from_flat(dy, L, t);
}

void node_time_derivative(const SystemModel& model, const StateGrid& g, int i, double& ut, double& vt) {
  const int m = g.m;
  const double inv_h = static_cast<double>(m);
  const Coeffs c = eval_coeffs(model, g.x(i), g.u[i], g.v[i]);
  const double ux = i > 0 ? (g.u[i] - g.u[i - 1]) * inv_h : (g.u[1] - g.u[0]) * inv_h;
  const double vx = i < m ? (g.v[i + 1] - g.v[i]) * inv_h : (g.v[m] - g.v[m - 1]) * inv_h;
  ut = -c.lambda_u * ux + c.f_u;
  vt = c.lambda_v * vx + c.f_v;
}

StateGrid time_derivative_field(const SystemModel& model, const StateGrid& grid) {
  StateGrid d(grid.m, grid.t);
  for (int i = 0; i <= grid.m; ++i) node_time_derivative(model, grid, i, d.u[i], d.v[i]);
  return d;
}

Trajectory integrate(const SystemModel& model, const StateGrid& w0, const InputSignal& U, double t0, double t1,
                     double tol, const IntegrateOptions& options) {
  const Layout L{w0.m};
  const std::size_t n = L.size();
  const int m = L.m;
  Trajectory out;

  std::vector<double> y, ynew(n), ystage(n), err(n);
  std::vector<std::vector<double>> k(7, std::vector<double>(n, 0.0));
  to_flat(w0, L, y);
  double t = t0;
  impose_flat(model, L, y.data(), U.value(t), t);

  if (!rhs_flat(model, L, y.data(), k[0].data(), U.rate(t), t)) {
    const StateGrid g = from_flat(k[0], L, t);
    for (int i = 0; i <= m; ++i)
      if (!std::isfinite(g.u[i]) || !std::isfinite(g.v[i])) non_finite(t, "derivative", i, m);
  }

  std::vector<double> samples = options.sample_times;
  std::sort(samples.begin(), samples.end());
  std::size_t next_sample = 0;
  while (next_sample < samples.size() && samples[next_sample] < t0) ++next_sample;

  auto record = [&](const std::vector<double>& state, double time) {
    out.push(from_flat(state, L, time));
    out.input.append(time, U.value(time));
  };

  if (options.record_steps || (next_sample < samples.size() && samples[next_sample] == t0)) record(y, t0);
  while (next_sample < samples.size() && samples[next_sample] <= t0) ++next_sample;

  std::vector<double> stops = options.stops;
  std::sort(stops.begin(), stops.end());

  double h = options.initial_step;
  if (!(h > 0.0)) {
    double lmax = 0.0;
    for (int i = 0; i <= m; ++i) {
      const Coeffs c = eval_coeffs(model, w0.x(i), y[L.u(i)], y[L.v(i)]);
      lmax = std::max({lmax, c.lambda_u, c.lambda_v});
    }
    h = 0.5 / (m * lmax);
  }
  if (t1 <= t0) {
    if (out.empty()) record(y, t0);
    return out;
  }

  IntegrateStats local;
  IntegrateStats& stats = options.stats ? *options.stats : local;
  bool last_rejected = false;
  std::optional<std::string> stage_failure;
  const double span = t1 - t0;

  auto stage = [&](int s, double ts, std::initializer_list<std::pair<int, double>> terms, double hh) -> bool {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = y[j];
      for (const auto& [idx, a] : terms) acc += hh * a * k[idx][j];
      ystage[j] = acc;
    }
    impose_flat(model, L, ystage.data(), U.value(ts), ts);
    try {
      return rhs_flat(model, L, ystage.data(), k[s].data(), U.rate(ts), ts);
    } catch (const ModelError& e) {
      stage_failure = e.what();
      return false;
    }
  };

  while (t < t1) {
    double t_target = t1;
    for (double s : stops) {
      if (s > t * (1.0 + 1e-15) + 1e-15 && s < t_target) {
        t_target = s;
        break;
      }
    }
    bool land = false;
    const double h_free = h;
    if (t + h >= t_target - 1e-12 * std::max(1.0, std::fabs(t_target))) {
      h = t_target - t;
      land = true;
    }
    if (h < 1e-13 * std::max(1.0, std::fabs(t)) || h < 1e-14 * span) {
      if (stage_failure) throw ModelError("step size underflow at t=" + std::to_string(t) + ": " + *stage_failure);
      throw IntegrationError(IntegrationError::Kind::step_underflow, t,
                             "step size underflow at t=" + std::to_string(t) + " (gradient blow-up suspected)");
    }

    bool ok = true;
    ok = ok && stage(1, t + c2 * h, {{0, a21}}, h);
    ok = ok && stage(2, t + c3 * h, {{0, a31}, {1, a32}}, h);
    ok = ok && stage(3, t + c4 * h, {{0, a41}, {1, a42}, {2, a43}}, h);
    ok = ok && stage(4, t + c5 * h, {{0, a51}, {1, a52}, {2, a53}, {3, a54}}, h);
    ok = ok && stage(5, t + h, {{0, a61}, {1, a62}, {2, a63}, {3, a64}, {4, a65}}, h);
    const double t_new = land ? t_target : t + h;
    double err_norm = std::numeric_limits<double>::infinity();
    if (ok) {
      for (std::size_t j = 0; j < n; ++j)
        ynew[j] = y[j] + h * (b1 * k[0][j] + b3 * k[2][j] + b4 * k[3][j] + b5 * k[4][j] + b6 * k[5][j]);
      impose_flat(model, L, ynew.data(), U.value(t_new), t_new);
      try {
        ok = rhs_flat(model, L, ynew.data(), k[6].data(), U.rate(t_new), t_new);
      } catch (const ModelError& e) {
        stage_failure = e.what();
        ok = false;
      }
    }
    if (ok) {
      err_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == L.u(0) || j == L.v(m)) continue;
        const double e = h * (e1 * k[0][j] + e3 * k[2][j] + e4 * k[3][j] + e5 * k[4][j] + e6 * k[5][j] +
                              e7 * k[6][j]);
        const double scale = tol + tol * std::max(std::fabs(y[j]), std::fabs(ynew[j]));
        err_norm = std::max(err_norm, std::fabs(e) / scale);
      }
      if (!std::isfinite(err_norm)) err_norm = std::numeric_limits<double>::infinity();
    }

    if (err_norm <= 1.0) {
      while (next_sample < samples.size() && samples[next_sample] <= t_new) {
        const double ts = samples[next_sample];
        if (ts > t) {
          const double th = (ts - t) / h;
          const double h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
          const double h10 = th * (1.0 - th) * (1.0 - th);
          const double h01 = th * th * (3.0 - 2.0 * th);
          const double h11 = th * th * (th - 1.0);
          for (std::size_t j = 0; j < n; ++j)
            ystage[j] = h00 * y[j] + h10 * h * k[0][j] + h01 * ynew[j] + h11 * h * k[6][j];
          impose_flat(model, L, ystage.data(), U.value(ts), ts);
          if (ts == t_new) record(ynew, ts);
          else record(ystage, ts);
        }
        ++next_sample;
      }
      t = t_new;
      y.swap(ynew);
      std::swap(k[0], k[6]);
      ++stats.accepted;
      stats.last_step = h;
      stage_failure.reset();
      if (options.record_steps) record(y, t);
      if (options.on_step) options.on_step(from_flat(y, L, t));
      double factor = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
      factor = std::clamp(factor, 0.2, 5.0);
      if (last_rejected) factor = std::min(factor, 1.0);
      h *= factor;
      // A step shortened to land on a stop says little about the attainable size.
      if (land && factor >= 1.0) h = std::max(h, h_free);
      last_rejected = false;
    } else {
      ++stats.rejected;
      const double factor = std::isfinite(err_norm) ? std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 1.0) : 0.25;
      h *= factor;
      last_rejected = true;
    }
  }
  if (out.empty()) record(y, t);
  return out;
}

Trajectory integrate(const SystemModel& model, const InitialData& w0, const InputSignal& U, double t0, double t1,
                     int m, double tol, const IntegrateOptions& options) {
  const StateGrid g = StateGrid::sample(w0, m, t0);
  const double input_defect = std::fabs(model.boundary_v(U.value(t0), g.u[m], t0) - g.v[m]);
  const double output_defect = std::fabs(model.boundary_u(g.v[0], t0) - g.u[0]);
  const double allowed = std::max(tol, 1e-12);
  if (input_defect > allowed)
    throw ConfigError("input incompatible with v0(1) at t0 (defect " + fmt(input_defect) + ")");
  if (output_defect > allowed)
    throw ConfigError("initial data violate u0(0) = g_u(v0(0)) (defect " + fmt(output_defect) + ")");
  return integrate(model, g, U, t0, t1, tol, options);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,x,u,v\n";
  for (const StateGrid& g : trajectory.snapshots)
    for (int i = 0; i <= g.m; ++i) write_row(out, {g.t, g.x(i), g.u[i], g.v[i]});
}

}  // namespace hypcon
