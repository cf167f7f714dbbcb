#include "hypcon/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hypcon/errors.hpp"
#include "hypcon/io.hpp"

namespace hypcon {

namespace {

void require_time(const Trajectory& tr, double t, const char* what) {
  if (t > tr.t_end() * (1.0 + 1e-14) + 1e-14) {
    throw HorizonError(std::string(what) + " reaches t=" + fmt(t) + " beyond the stored trajectory (ends at " +
                       fmt(tr.t_end()) + "); extend the horizon");
  }
}

double speed_at_node(const SystemModel& model, const Trajectory& tr, int i, double t, Family family) {
  const double x = static_cast<double>(i) / tr.m();
  const Coeffs c = eval_coeffs(model, x, tr.u_at(i, t), tr.v_at(i, t));
  return family == Family::u ? c.lambda_u : c.lambda_v;
}

// March tau along the nodes in the order given by `nodes`, trapezoidal in x.
std::vector<double> march_tau(const SystemModel& model, const Trajectory& tr, double t, Family family) {
  if (tr.empty()) throw HorizonError("empty trajectory");
  const int m = tr.m();
  const double dx = 1.0 / m;
  std::vector<double> tau(static_cast<std::size_t>(m) + 1);
  const int start = family == Family::v ? m : 0;
  const int step = family == Family::v ? -1 : 1;
  const char* what = family == Family::v ? "tau_v" : "tau_u";
  tau[static_cast<std::size_t>(start)] = t;
  require_time(tr, t, what);
  for (int k = 0; k < m; ++k) {
    const int i = start + k * step;
    const int j = i + step;
    const double inv_i = 1.0 / speed_at_node(model, tr, i, tau[static_cast<std::size_t>(i)], family);
    double next = tau[static_cast<std::size_t>(i)] + dx * inv_i;
    for (int it = 0; it < 2; ++it) {
      require_time(tr, next, what);
      const double inv_j = 1.0 / speed_at_node(model, tr, j, next, family);
      next = tau[static_cast<std::size_t>(i)] + 0.5 * dx * (inv_i + inv_j);
    }
    require_time(tr, next, what);
    tau[static_cast<std::size_t>(j)] = next;
  }
  return tau;
}

double signed_speed(const SystemModel& model, const Trajectory& tr, double x, double s, Family family) {
  double u = 0.0, v = 0.0;
  tr.w_at(x, s, u, v);
  const Coeffs c = eval_coeffs(model, x, u, v);
  return family == Family::u ? c.lambda_u : -c.lambda_v;
}

// --- characteristic lattice -------------------------------------------------

struct Lattice {
  const SystemModel& model;
  const InputSignal* fill_in;  // rectangle variant when set

  // u-characteristic from A (left) meets the v-characteristic from B (right).
  LatticePoint meet(const LatticePoint& A, const LatticePoint& B) const {
    const Coeffs ka = eval_coeffs(model, A.x, A.u, A.v);
    const Coeffs kb = eval_coeffs(model, B.x, B.u, B.v);
    double a = ka.lambda_u, b = kb.lambda_v, fa = ka.f_u, fb = kb.f_v;
    LatticePoint C{};
    for (int it = 0; it < 3; ++it) {
      C.t = (B.x - A.x + a * A.t + b * B.t) / (a + b);
      C.x = A.x + a * (C.t - A.t);
      C.u = A.u + (C.t - A.t) * fa;
      C.v = B.v + (C.t - B.t) * fb;
      if (it == 2) break;
      const Coeffs kc = eval_coeffs(model, C.x, C.u, C.v);
      a = 0.5 * (ka.lambda_u + kc.lambda_u);
      b = 0.5 * (kb.lambda_v + kc.lambda_v);
      fa = 0.5 * (ka.f_u + kc.f_u);
      fb = 0.5 * (kb.f_v + kc.f_v);
    }
    if (!(C.x > A.x && C.x < B.x && C.t >= A.t && C.t >= B.t) || !std::isfinite(C.u) || !std::isfinite(C.v)) {
      throw BlowUpError("characteristics cross between x=" + fmt(A.x) + " and x=" + fmt(B.x) + " near t=" +
                        fmt(std::max(A.t, B.t)) + " (predicted gradient blow-up)");
    }
    return C;
  }

  // v-characteristic from A down to x = 0, where u = g_u(v, t).
  LatticePoint left_boundary(const LatticePoint& A) const {
    const Coeffs ka = eval_coeffs(model, A.x, A.u, A.v);
    double b = ka.lambda_v, fb = ka.f_v;
    LatticePoint B{};
    B.x = 0.0;
    for (int it = 0; it < 3; ++it) {
      B.t = A.t + A.x / b;
      B.v = A.v + (B.t - A.t) * fb;
      B.u = model.boundary_u(B.v, B.t);
      if (it == 2) break;
      const Coeffs kb = eval_coeffs(model, 0.0, B.u, B.v);
      b = 0.5 * (ka.lambda_v + kb.lambda_v);
      fb = 0.5 * (ka.f_v + kb.f_v);
    }
    if (!std::isfinite(B.u) || !std::isfinite(B.v)) throw BlowUpError("non-finite state at x=0, t=" + fmt(B.t));
    return B;
  }

  // u-characteristic from A up to x = 1, where v follows the fill-in input.
  LatticePoint right_boundary(const LatticePoint& A) const {
    const Coeffs ka = eval_coeffs(model, A.x, A.u, A.v);
    double a = ka.lambda_u, fa = ka.f_u;
    LatticePoint B{};
    B.x = 1.0;
    for (int it = 0; it < 3; ++it) {
      B.t = A.t + (1.0 - A.x) / a;
      B.u = A.u + (B.t - A.t) * fa;
      B.v = model.boundary_v(fill_in->value(B.t), B.u, B.t);
      if (it == 2) break;
      const Coeffs kb = eval_coeffs(model, 1.0, B.u, B.v);
      a = 0.5 * (ka.lambda_u + kb.lambda_u);
      fa = 0.5 * (ka.f_u + kb.f_u);
    }
    if (!std::isfinite(B.u) || !std::isfinite(B.v)) throw BlowUpError("non-finite state at x=1, t=" + fmt(B.t));
    return B;
  }
};

// Derivative at xe of the parabola through three points.
double parabola_slope(const double* x, const double* y, double xe) {
  return y[0] * (2 * xe - x[1] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2])) +
         y[1] * (2 * xe - x[0] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2])) +
         y[2] * (2 * xe - x[0] - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
}

// Curve points ordered by decreasing x (from (1, t_k) to x = 0).
PredictionBundle bundle_from_curve(const SystemModel& model, std::vector<LatticePoint> curve, double t_k, int m) {
  // Drop points that crowd a neighbour; they add nothing but conditioning
  // trouble to the difference quotients.
  const double min_gap = 0.05 / m;
  std::vector<LatticePoint> pts;
  for (std::size_t j = 0; j < curve.size(); ++j) {
    const bool last = j + 1 == curve.size();
    if (!pts.empty() && pts.back().x - curve[j].x < min_gap) {
      if (!last) continue;
      if (pts.size() > 1) pts.pop_back();
    }
    pts.push_back(curve[j]);
  }
  const std::size_t n = pts.size();

  std::vector<double> ut(n, 0.0);
  if (n >= 3) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t c = std::clamp<std::size_t>(j, 1, n - 2);
      const double xs[3] = {pts[c - 1].x, pts[c].x, pts[c + 1].x};
      const double us[3] = {pts[c - 1].u, pts[c].u, pts[c + 1].u};
      const double D = parabola_slope(xs, us, pts[j].x);
      const Coeffs k = eval_coeffs(model, pts[j].x, pts[j].u, pts[j].v);
      ut[j] = k.lambda_v * (k.f_u - k.lambda_u * D) / (k.lambda_u + k.lambda_v);
    }
  } else {
    const double D = n == 2 ? (pts[0].u - pts[1].u) / (pts[0].x - pts[1].x) : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const Coeffs k = eval_coeffs(model, pts[j].x, pts[j].u, pts[j].v);
      ut[j] = k.lambda_v * (k.f_u - k.lambda_u * D) / (k.lambda_u + k.lambda_v);
    }
  }

  PredictionBundle b;
  b.t_k = t_k;
  b.m = m;
  b.tau_v.resize(static_cast<std::size_t>(m) + 1);
  b.u.resize(b.tau_v.size());
  b.v.resize(b.tau_v.size());
  b.u_t.resize(b.tau_v.size());
  std::size_t seg = 0;  // pts[seg].x >= x >= pts[seg+1].x
  for (int i = m; i >= 0; --i) {
    const double x = static_cast<double>(i) / m;
    const auto k = static_cast<std::size_t>(i);
    if (n == 1) {
      b.tau_v[k] = pts[0].t;
      b.u[k] = pts[0].u;
      b.v[k] = pts[0].v;
      b.u_t[k] = ut[0];
      continue;
    }
    while (seg + 2 < n && pts[seg + 1].x > x) ++seg;
    const LatticePoint& p = pts[seg];
    const LatticePoint& q = pts[seg + 1];
    const double r = std::clamp((p.x - x) / (p.x - q.x), 0.0, 1.0);
    b.tau_v[k] = p.t + r * (q.t - p.t);
    b.u[k] = p.u + r * (q.u - p.u);
    b.v[k] = p.v + r * (q.v - p.v);
    b.u_t[k] = ut[seg] + r * (ut[seg + 1] - ut[seg]);
  }
  // Endpoints are exact lattice points.
  b.tau_v[static_cast<std::size_t>(m)] = t_k;
  b.tau_v[0] = pts.back().t;
  b.u[0] = pts.back().u;
  b.v[0] = pts.back().v;
  return b;
}

PredictionBundle predict_lattice(const SystemModel& model, const StateGrid& W, const PredictOptions& options) {
  const int m = W.m;
  Lattice lat{model, options.fill_in ? &*options.fill_in : nullptr};
  std::vector<LatticePoint> level(static_cast<std::size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) level[static_cast<std::size_t>(i)] = LatticePoint{W.x(i), W.t, W.u[i], W.v[i]};
  std::vector<LatticePoint> all;
  if (options.keep_lattice) all = level;

  std::size_t idx = static_cast<std::size_t>(m);
  std::vector<LatticePoint> curve{level[idx]};
  std::vector<LatticePoint> next;
  while (curve.back().x > 0.0) {
    next.clear();
    const bool left_added = level.front().x > 0.0;
    if (left_added) next.push_back(lat.left_boundary(level.front()));
    if (idx == 0) {
      curve.push_back(next.front());
      if (options.keep_lattice) all.push_back(next.front());
      break;
    }
    // Only points up to the curve index can influence it; skip the rest.
    const std::size_t upper = lat.fill_in ? level.size() - 1 : idx;
    for (std::size_t j = 0; j < upper; ++j) next.push_back(lat.meet(level[j], level[j + 1]));
    if (lat.fill_in && level.back().x < 1.0) next.push_back(lat.right_boundary(level.back()));
    idx = idx - 1 + (left_added ? 1 : 0);
    curve.push_back(next[idx]);
    if (options.keep_lattice) all.insert(all.end(), next.begin(), next.end());
    level.swap(next);
  }
  PredictionBundle b = bundle_from_curve(model, std::move(curve), W.t, m);
  b.lattice = std::move(all);
  return b;
}

PredictionBundle predict_mol(const SystemModel& model, const StateGrid& W, double tol, const PredictOptions& options) {
  const int m = W.m;
  const double norm = W.norm_inf();
  const double radius = options.box_radius > 0.0 ? options.box_radius : (norm > 0.0 ? 1.5 * norm : 1.0);
  double horizon = options.horizon;
  if (!(horizon > 0.0)) {
    double sup_inv = 0.0;
    for_each_sample(StateBox{radius, W.t, W.t}, options.density, depends_on_x(model),
                    [&](double x, double u, double v) {
                      sup_inv = std::max(sup_inv, 1.0 / eval_coeffs(model, x, u, v).lambda_v);
                    });
    horizon = 1.1 * sup_inv;
  }
  IntegrateOptions io;
  io.record_steps = true;
  Trajectory tr = integrate(model, W, *options.fill_in, W.t, W.t + horizon, tol, io);
  PredictionBundle b;
  b.t_k = W.t;
  b.m = m;
  b.tau_v = tau_v(model, tr, W.t);
  b.u.resize(b.tau_v.size());
  b.v.resize(b.tau_v.size());
  b.u_t.resize(b.tau_v.size());
  for (int i = 0; i <= m; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double t = b.tau_v[k];
    b.u[k] = tr.u_at(i, t);
    b.v[k] = tr.v_at(i, t);
    const std::size_t j = tr.bracket(t);
    const StateGrid& g0 = tr.snapshots[j];
    const StateGrid& g1 = tr.snapshots[std::min(j + 1, tr.snapshots.size() - 1)];
    double ut0 = 0.0, vt0 = 0.0, ut1 = 0.0, vt1 = 0.0;
    node_time_derivative(model, g0, i, ut0, vt0);
    node_time_derivative(model, g1, i, ut1, vt1);
    const double r = g1.t > g0.t ? std::clamp((t - g0.t) / (g1.t - g0.t), 0.0, 1.0) : 0.0;
    b.u_t[k] = ut0 + r * (ut1 - ut0);
  }
  b.rectangle = std::move(tr);
  return b;
}

}  // namespace

std::vector<double> tau_v(const SystemModel& model, const Trajectory& trajectory, double t) {
  return march_tau(model, trajectory, t, Family::v);
}

std::vector<double> tau_u(const SystemModel& model, const Trajectory& trajectory, double t) {
  return march_tau(model, trajectory, t, Family::u);
}

CharCurve trace_xi(const SystemModel& model, const Trajectory& tr, double x0, double t0, Family family,
                   bool backward) {
  if (tr.empty()) throw HorizonError("empty trajectory");
  const double dir = backward ? -1.0 : 1.0;
  // Boundary the curve travels toward (in x) as s moves in direction `dir`.
  const double target = (family == Family::u) == !backward ? 1.0 : 0.0;
  const double dx = 1.0 / tr.m();
  CharCurve c;
  c.family = family;
  c.s.push_back(t0);
  c.xi.push_back(x0);
  double x = x0, s = t0;
  while (x != target) {
    if (backward && s <= tr.t_begin()) break;
    require_time(tr, s, "characteristic");
    const double k1 = dir * signed_speed(model, tr, x, s, family);
    double ds = dx / std::fabs(k1);
    if (std::fabs(target - x) <= std::fabs(k1) * ds) ds = (target - x) / k1;
    if (backward) ds = std::min(ds, s - tr.t_begin());
    const double xp = std::clamp(x + ds * k1, 0.0, 1.0);
    require_time(tr, s + dir * ds, "characteristic");
    const double k2 = dir * signed_speed(model, tr, xp, s + dir * ds, family);
    double xn = x + 0.5 * ds * (k1 + k2);
    if ((target - xn) * (target - x) <= 0.0) {
      ds *= (target - x) / (xn - x);
      xn = target;
    }
    x = xn;
    s += dir * ds;
    c.s.push_back(s);
    c.xi.push_back(x);
  }
  return c;
}

PredictionBundle predict(const SystemModel& model, const StateGrid& W_k, double tol, const PredictOptions& options) {
  const double defect = std::fabs(W_k.u[0] - model.boundary_u(W_k.v[0], W_k.t));
  if (defect > std::max(tol, 1e-12)) {
    throw ConfigError("measurement violates u(0) = g_u(v(0), t_k) (defect " + fmt(defect) + ")");
  }
  if (!W_k.finite()) throw ConfigError("measurement contains non-finite values");
  if (options.scheme == PredictionScheme::lattice) return predict_lattice(model, W_k, options);

  PredictOptions opt = options;
  if (!opt.fill_in) {
    const double u1 = W_k.u[W_k.m];
    const double U = (W_k.v[W_k.m] - model.g_v(1.0, u1, 0.0, W_k.t)) / model.input_gain;
    opt.fill_in = InputSignal::constant(U);
  }
  const double in_defect = std::fabs(model.boundary_v(opt.fill_in->value(W_k.t), W_k.u[W_k.m], W_k.t) - W_k.v[W_k.m]);
  if (in_defect > std::max(tol, 1e-12)) {
    throw ConfigError("fill-in input incompatible with v(1, t_k) (defect " + fmt(in_defect) + ")");
  }
  return predict_mol(model, W_k, tol, opt);
}

double bundle_discrepancy(const PredictionBundle& a, const PredictionBundle& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.tau_v.size() && i < b.tau_v.size(); ++i) {
    d = std::max({d, std::fabs(a.tau_v[i] - b.tau_v[i]), std::fabs(a.u[i] - b.u[i]), std::fabs(a.v[i] - b.v[i]),
                  std::fabs(a.u_t[i] - b.u_t[i])});
  }
  return d;
}

void write_bundle_csv(std::ostream& out, const PredictionBundle& bundle) {
  out << "x,tau_v,u,v,u_t\n";
  for (int i = 0; i <= bundle.m; ++i) {
    const auto k = static_cast<std::size_t>(i);
    write_row(out, {static_cast<double>(i) / bundle.m, bundle.tau_v[k], bundle.u[k], bundle.v[k], bundle.u_t[k]});
  }
}

}  // namespace hypcon
