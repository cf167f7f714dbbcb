#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hypcon/controller.hpp"

using namespace hypcon;

namespace {

double sup_over(const ClosedLoopResult& r, double t0, double t1, const std::function<double(const StateGrid&)>& f) {
  double s = 0.0;
  for (const StateGrid& g : r.trajectory.snapshots)
    if (g.t >= t0 && g.t <= t1) s = std::max(s, f(g));
  return s;
}

}  // namespace

TEST_CASE("virtual input ramps to zero at rate delta") {
  const VirtualInput a = VirtualInput::stabilize(1.0, 3.0, 0.2);
  CHECK(a(3.0 + 2.0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(a(3.0) == 1.0);
  CHECK(a(9.0) == 0.0);
  CHECK(a.rate(4.0) == -0.2);
  CHECK(a.rate(8.5) == 0.0);
  CHECK(a.ramp_end() == 8.0);

  const VirtualInput b = VirtualInput::stabilize(-0.5, 0.0, 0.2);
  CHECK(b(1.0) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(b(2.5) == 0.0);

  const VirtualInput z = VirtualInput::stabilize(0.0, 1.0, 0.2);
  CHECK(z(1.0) == 0.0);
  CHECK(z(5.0) == 0.0);
  CHECK(z.rate(2.0) == 0.0);
  CHECK_THROWS_AS(VirtualInput::stabilize(1.0, 0.0, 0.0), ConfigError);
}

TEST_CASE("tracking virtual input") {
  const InputSignal half = InputSignal::constant(0.5);
  const VirtualInput a = VirtualInput::track(1.0, 1.0, 0.25, half);
  CHECK(a.ramp_end() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(a(2.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(a(3.5) == 0.5);
  CHECK(a(10.0) == 0.5);

  const VirtualInput same = VirtualInput::track(0.5, 1.0, 0.25, half);
  CHECK(same(1.0) == 0.5);
  CHECK(same(4.0) == 0.5);
  CHECK(same.rate(2.0) == 0.0);

  const VirtualInput zero_ref = VirtualInput::track(1.0, 3.0, 0.2, InputSignal::constant(0.0));
  const VirtualInput plain = VirtualInput::stabilize(1.0, 3.0, 0.2);
  for (double t = 3.0; t < 10.0; t += 0.37) CHECK(zero_ref(t) == doctest::Approx(plain(t)).epsilon(1e-12));

  const InputSignal fast = InputSignal::from_expr(parse("sin(t)"));
  CHECK_THROWS_AS(VirtualInput::track(2.0, 0.0, 0.5, fast), ConfigError);
}

TEST_CASE("target dynamics of the zero bundle produce zero input") {
  const Example ex = builtin_example();
  const PredictionBundle b = predict(ex.model, StateGrid::constant(30, 0.0, 0.0, 0.0), 1e-7);
  const VirtualInput U = VirtualInput::stabilize(0.0, b.tau_k(), 0.2);
  const TargetState t = solve_target_dynamics(ex.model, b, U, 0.25, 0.0);
  CHECK(t.times.front() == 0.0);
  CHECK(t.times.back() == 0.25);
  for (double x : t.input) CHECK(x == 0.0);
  const ControlSignal seg = control_segment(t);
  CHECK(seg(0.1) == 0.0);
}

TEST_CASE("target dynamics of a constant-speed linear model match the closed form") {
  // v_x = -(b/lambda_v) v along the input characteristic, so
  // U(s) = U*(s + 1/lambda_v) * exp(-b/lambda_v).
  const double lu = 1.3, lv = 0.8, b = 0.6;
  SystemModel m;
  m.lambda_u = Coefficient::constant(lu);
  m.lambda_v = Coefficient::constant(lv);
  m.f_u = Coefficient::parse("0.4*v");
  m.f_v = Coefficient::parse("0.6*v");
  m.g_u = Coefficient::parse("0.5*v");
  const int n = 100;
  PredictionBundle bundle;
  bundle.t_k = 0.0;
  bundle.m = n;
  bundle.tau_v.resize(n + 1);
  bundle.u.assign(n + 1, 0.0);
  bundle.v.assign(n + 1, 0.0);
  bundle.u_t.assign(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    bundle.tau_v[i] = (1.0 - x) / lv;
    bundle.u[i] = 0.3 * x;
  }
  const VirtualInput U = VirtualInput::stabilize(0.9, bundle.tau_k(), 0.2);
  const double decay = std::exp(-b / lv);
  auto exact = [&](double s) { return U(s + 1.0 / lv) * decay; };
  TargetOptions opt;
  opt.keep_levels = true;
  const TargetState t = solve_target_dynamics(m, bundle, U, 1.0, exact(0.0), opt);
  double worst = 0.0;
  for (std::size_t j = 0; j < t.times.size(); ++j) worst = std::max(worst, std::fabs(t.input[j] - exact(t.times[j])));
  CHECK(worst < 1e-5);
  for (const TargetLevel& level : t.levels)
    for (double g : level.dtau) CHECK(g == 1.0);
}

TEST_CASE("closed loop on the reference example") {
  const Example ex = builtin_example();
  ControllerConfig cfg;
  cfg.theta = ex.settings.theta;
  cfg.delta = ex.settings.delta;
  const double tol = 1e-7;
  const ClosedLoopResult r = run_closed_loop(ex.model, ex.initial, cfg, 10.0, 100, tol);
  REQUIRE(!r.steps.empty());
  CHECK(r.steps[0].tau_k == doctest::Approx(2.0).epsilon(0.01));
  CHECK(r.steps[0].v0k == doctest::Approx(1.0).epsilon(0.01));
  CHECK(r.steps[0].U_at_tk == 1.0);
  CHECK(sup_over(r, 2.1, 6.9, [](const StateGrid& g) { return std::fabs(g.v[0] - (1.0 - 0.2 * (g.t - 2.0))); }) <=
        0.05);
  CHECK(sup_over(r, 8.5, 10.0, [](const StateGrid& g) { return g.norm_inf(); }) <= 0.02);

  // Slope bound, continuity of U* at tau_k, and continuity of the input.
  for (std::size_t k = 0; k < r.virtual_inputs.size(); ++k) {
    const VirtualInput& U = r.virtual_inputs[k];
    CHECK(U(U.tau_k()) == r.steps[k].v0k);
    for (double s = U.tau_k(); s < U.tau_k() + 8.0; s += 0.01) CHECK(std::fabs(U.rate(s)) <= cfg.delta);
    if (k > 0) CHECK(std::fabs(r.steps[k].U_at_tk - r.input(r.steps[k].t_k)) <= 10 * tol);
  }
  // Round trip: the plant's v(0, .) follows U*_k between consecutive tau_k.
  for (std::size_t k = 0; k + 1 < r.steps.size() && r.steps[k + 1].tau_k <= 10.0; ++k) {
    const double e = sup_over(r, r.steps[k].tau_k, r.steps[k + 1].tau_k,
                              [&](const StateGrid& g) { return std::fabs(g.v[0] - r.virtual_inputs[k](g.t)); });
    CHECK(e <= 5.0 / 100);
  }
  // Non-crossing: later input characteristics lie above earlier ones.
  const std::vector<double> a = tau_v(ex.model, r.trajectory, 1.0);
  const std::vector<double> b = tau_v(ex.model, r.trajectory, 1.5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] > a[i]);
}

TEST_CASE("closed loop from rest stays at rest") {
  const Example ex = builtin_example();
  InitialData zero{Coefficient::constant(0.0), Coefficient::constant(0.0)};
  ControllerConfig cfg;
  const ClosedLoopResult r = run_closed_loop(ex.model, zero, cfg, 2.0, 40, 1e-7);
  for (double U : r.input.values()) CHECK(U == 0.0);
  CHECK(sup_over(r, 0.0, 2.0, [](const StateGrid& g) { return g.norm_inf(); }) == 0.0);
}

TEST_CASE("tracking a constant reference") {
  const Example ex = builtin_example();
  ControllerConfig cfg;
  cfg.mode = ControlMode::track;
  cfg.reference = InputSignal::constant(0.5);
  const ClosedLoopResult r = run_closed_loop(ex.model, ex.initial, cfg, 9.0, 60, 1e-7);
  CHECK(sup_over(r, 5.0, 9.0, [](const StateGrid& g) { return std::fabs(g.v[0] - 0.5); }) <= 0.02);
}

TEST_CASE("invalid controller settings") {
  const Example ex = builtin_example();
  ControllerConfig cfg;
  cfg.theta = 0.0;
  CHECK_THROWS_AS(run_closed_loop(ex.model, ex.initial, cfg, 1.0, 20, 1e-7), ConfigError);
  cfg.theta = 0.25;
  cfg.mode = ControlMode::track;
  CHECK_THROWS_AS(run_closed_loop(ex.model, ex.initial, cfg, 1.0, 20, 1e-7), ConfigError);
}

TEST_CASE("continuous-time law") {
  const Example ex = builtin_example();
  CHECK(continuous_law_step(ex.model, StateGrid::constant(50, 0.0, 0.0, 0.0), 0.2, 1e-3) == 0.0);
  CHECK(std::fabs(continuous_law_step(ex.model, StateGrid::constant(50, 1.0, 1.0, 0.0), 0.0, 1e-3)) < 1e-12);

  // At the equilibrium v_t solves v_t' = 2 v_t^2 - (4/3) v_t from v_t(0) = -0.2,
  // i.e. 1/v_t = 1.5 - 6.5 exp(4x/3).
  const double rate = continuous_law_step(ex.model, StateGrid::constant(100, 1.0, 1.0, 0.0), 0.2, 1e-3);
  const double exact = 1.0 / (1.5 - 6.5 * std::exp(4.0 / 3.0));
  CHECK(rate == doctest::Approx(exact).epsilon(1e-4));

  // The sampled law starts with the same slope.
  ControllerConfig cfg;
  const ClosedLoopResult r = run_closed_loop(ex.model, ex.initial, cfg, 0.25, 100, 1e-7);
  const auto& T = r.input.times();
  const auto& V = r.input.values();
  const double slope = (V[1] - V[0]) / (T[1] - T[0]);
  CHECK(slope == doctest::Approx(rate).epsilon(0.05));
}

TEST_CASE("diagnostics CSV layout") {
  std::vector<StepDiagnostics> steps(1);
  steps[0].k = 3;
  steps[0].t_k = 0.75;
  std::ostringstream out;
  write_diagnostics_csv(out, steps);
  CHECK(out.str().rfind("k,t_k,tau_k,v0k,norm_w_inf,norm_wt_inf,U_at_tk\n3,7.500000000000e-01,", 0) == 0);
}
