#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hypcon/solver.hpp"

using namespace hypcon;

namespace {

SystemModel transport_model() {
  SystemModel m;
  m.lambda_u = Coefficient::constant(1.0);
  m.lambda_v = Coefficient::constant(1.0);
  m.f_u = Coefficient::constant(0.0);
  m.f_v = Coefficient::constant(0.0);
  m.g_u = Coefficient::parse("v");
  return m;
}

// Smooth profile a(s); the transport solution is u = a(t - x), v = a(x + t).
const char* kProfile = "sin(2*S) + 0.5*cos(3*S)";

std::string profile(const std::string& arg) {
  std::string s = kProfile;
  std::string out;
  for (char c : s) {
    if (c == 'S') out += "(" + arg + ")";
    else out += c;
  }
  return out;
}

double a(double s) { return std::sin(2 * s) + 0.5 * std::cos(3 * s); }

double transport_error(int m, double t_end) {
  InitialData w0{Coefficient::parse(profile("-x")), Coefficient::parse(profile("x"))};
  const InputSignal U = InputSignal::from_expr(parse(profile("1+t")));
  IntegrateOptions opt;
  opt.sample_times = {t_end};
  const Trajectory tr = integrate(transport_model(), w0, U, 0.0, t_end, m, 1e-10, opt);
  const StateGrid& g = tr.snapshots.back();
  REQUIRE(g.t == t_end);
  double err = 0.0;
  for (int i = 0; i <= m; ++i) {
    err = std::max(err, std::fabs(g.u[i] - a(t_end - g.x(i))));
    err = std::max(err, std::fabs(g.v[i] - a(g.x(i) + t_end)));
  }
  return err;
}

double max_deviation(const Trajectory& tr, const StateGrid& ref) {
  double d = 0.0;
  for (const StateGrid& g : tr.snapshots)
    for (int i = 0; i <= g.m; ++i) d = std::max({d, std::fabs(g.u[i] - ref.u[i]), std::fabs(g.v[i] - ref.v[i])});
  return d;
}

}  // namespace

TEST_CASE("rhs vanishes at equilibria") {
  const Example ex = builtin_example();
  const StateGrid zero = StateGrid::constant(20, 0.0, 0.0);
  const StateGrid dz = rhs(ex.model, zero, 0.0, 0.0);
  const StateGrid one = StateGrid::constant(20, 1.0, 1.0);
  const StateGrid d1 = rhs(ex.model, one, 0.0, 0.0);
  for (int i = 0; i <= 20; ++i) {
    CHECK(dz.u[i] == 0.0);
    CHECK(dz.v[i] == 0.0);
    CHECK(d1.u[i] == 0.0);
    CHECK(d1.v[i] == 0.0);
  }
  const StateGrid f1 = time_derivative_field(ex.model, one);
  for (int i = 0; i <= 20; ++i) {
    CHECK(f1.u[i] == 0.0);
    CHECK(f1.v[i] == 0.0);
  }
}

TEST_CASE("rhs of pure transport is the upwind difference") {
  SystemModel m = transport_model();
  m.lambda_u = Coefficient::constant(2.0);
  m.lambda_v = Coefficient::constant(0.5);
  StateGrid g(4, 0.0);
  for (int i = 0; i <= 4; ++i) {
    g.u[i] = i * i;
    g.v[i] = 3.0 * i;
  }
  g.u[0] = g.v[0];
  const StateGrid d = rhs(m, g, 0.0, 0.0);
  for (int i = 1; i <= 4; ++i) CHECK(d.u[i] == doctest::Approx(-2.0 * (g.u[i] - g.u[i - 1]) * 4.0));
  for (int i = 0; i < 4; ++i) CHECK(d.v[i] == doctest::Approx(0.5 * (g.v[i + 1] - g.v[i]) * 4.0));
  // boundary maps: u(0) = v(0) follows v's derivative; v(1) follows U_t
  CHECK(d.u[0] == doctest::Approx(d.v[0]));
  CHECK(rhs(m, g, 0.75, 0.0).v[4] == doctest::Approx(0.75));
}

TEST_CASE("time_derivative_field converges for a manufactured state") {
  const Example ex = builtin_example();
  auto residual = [&](int m) {
    StateGrid g(m, 0.0);
    for (int i = 0; i <= m; ++i) {
      g.u[i] = 0.3 * std::sin(2.0 * g.x(i)) + 0.1;
      g.v[i] = 0.4 * std::cos(g.x(i));
    }
    const StateGrid f = time_derivative_field(ex.model, g);
    double err = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double x = g.x(i);
      const double u = 0.3 * std::sin(2.0 * x) + 0.1, v = 0.4 * std::cos(x);
      const Coeffs c = eval_coeffs(ex.model, x, u, v);
      const double ut = -c.lambda_u * 0.6 * std::cos(2.0 * x) + c.f_u;
      const double vt = c.lambda_v * (-0.4 * std::sin(x)) + c.f_v;
      err = std::max({err, std::fabs(f.u[i] - ut), std::fabs(f.v[i] - vt)});
    }
    return err;
  };
  const double e1 = residual(100), e2 = residual(200);
  CHECK(e1 < 2.0 / 100);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("equilibria are preserved") {
  const Example ex = builtin_example();
  IntegrateOptions opt;
  opt.record_steps = true;
  const Trajectory ones = integrate(ex.model, ex.initial, InputSignal::constant(1.0), 0.0, 5.0, 50, 1e-7, opt);
  CHECK(ones.t_end() == 5.0);
  CHECK(max_deviation(ones, StateGrid::constant(50, 1.0, 1.0)) <= 1e-10);

  InitialData zero{Coefficient::constant(0.0), Coefficient::constant(0.0)};
  const Trajectory zeros = integrate(ex.model, zero, InputSignal::constant(0.0), 0.0, 5.0, 50, 1e-7, opt);
  CHECK(max_deviation(zeros, StateGrid::constant(50, 0.0, 0.0)) <= 1e-12);
}

TEST_CASE("first-order convergence to the transport solution") {
  double prev = transport_error(50, 0.5);
  for (int m = 100; m <= 400; m *= 2) {
    const double err = transport_error(m, 0.5);
    INFO("m=" << m << " err=" << err << " ratio=" << prev / err);
    CHECK(prev / err >= 1.6);
    CHECK(prev / err <= 2.4);
    prev = err;
  }
}

TEST_CASE("boundary conditions hold after every accepted step") {
  const Example ex = builtin_example();
  InitialData w0{Coefficient::parse("1 - 0.5*x"), Coefficient::parse("1 - 0.3*x*x")};
  // match g_u at x = 0: u0(0) = 1 = g_u(1)
  ControlSignal signal({0.0, 1.0, 2.0}, {0.7, 0.2, -0.4});
  int steps = 0;
  double worst = 0.0;
  IntegrateOptions opt;
  opt.on_step = [&](const StateGrid& g) {
    ++steps;
    worst = std::max(worst, std::fabs(g.u[0] - ex.model.boundary_u(g.v[0], g.t)));
    worst = std::max(worst, std::fabs(g.v[g.m] - signal(g.t)));
  };
  integrate(ex.model, w0, InputSignal::from(signal), 0.0, 2.5, 40, 1e-7, opt);
  CHECK(steps > 10);
  CHECK(worst <= 1e-12);
}

TEST_CASE("dense output lands on the requested instants and stops are respected") {
  const Example ex = builtin_example();
  InitialData w0{Coefficient::parse("1 - 0.5*x"), Coefficient::parse("1 - 0.3*x*x")};
  IntegrateOptions opt;
  opt.sample_times = {0.0, 0.125, 0.3, 1.0};
  opt.stops = {0.5};
  bool hit_stop = false;
  opt.on_step = [&](const StateGrid& g) { hit_stop = hit_stop || g.t == 0.5; };
  const Trajectory tr = integrate(ex.model, w0, InputSignal::constant(0.7), 0.0, 1.0, 40, 1e-7, opt);
  REQUIRE(tr.snapshots.size() == 4);
  CHECK(tr.snapshots[1].t == 0.125);
  CHECK(tr.snapshots[3].t == 1.0);
  CHECK(hit_stop);
  CHECK(tr.snapshots[2].v[40] == 0.7);
}

TEST_CASE("incompatible data are rejected") {
  const Example ex = builtin_example();
  CHECK_THROWS_AS(integrate(ex.model, ex.initial, InputSignal::constant(0.5), 0.0, 1.0, 20, 1e-7), ConfigError);
}

TEST_CASE("finite-time blow-up aborts the integration") {
  SystemModel m = transport_model();
  m.stabilizing = false;
  m.f_u = Coefficient::parse("u*u");
  m.g_u = Coefficient::parse("2 + v");
  const StateGrid w0 = StateGrid::constant(20, 2.0, 0.0);
  bool threw = false;
  try {
    integrate(m, w0, InputSignal::constant(0.0), 0.0, 2.0, 1e-7);
  } catch (const IntegrationError&) {
    threw = true;
  } catch (const ModelError&) {
    threw = true;
  }
  CHECK(threw);
}

TEST_CASE("loss of hyperbolicity is reported as a model error") {
  SystemModel m = transport_model();
  m.stabilizing = false;
  m.lambda_u = Coefficient::parse("1.5 - u");
  m.f_u = Coefficient::parse("3");
  m.g_u = Coefficient::parse("v");
  const StateGrid w0 = StateGrid::constant(20, 0.0, 0.0);
  CHECK_THROWS_AS(integrate(m, w0, InputSignal::constant(0.0), 0.0, 4.0, 1e-7), ModelError);
}

TEST_CASE("control signal interpolation") {
  ControlSignal s({0.0, 1.0, 3.0}, {0.0, 2.0, 1.0});
  CHECK(s(0.5) == 1.0);
  CHECK(s(2.0) == 1.5);
  CHECK(s(-1.0) == 0.0);
  CHECK(s(5.0) == 1.0);
  CHECK(s.rate(0.5) == 2.0);
  CHECK(s.rate(1.0) == -0.5);
  CHECK(s.lipschitz() == 2.0);
  s.append(3.0, 1.0);
  CHECK(s.times().size() == 3);
  CHECK_THROWS(s.append(2.0, 0.0));
}

TEST_CASE("trajectory CSV layout") {
  Trajectory tr;
  tr.push(StateGrid::constant(2, 1.0, 0.5, 0.0));
  std::ostringstream out;
  write_trajectory_csv(out, tr);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x,u,v");
  std::getline(in, line);
  CHECK(line == "0.000000000000e+00,0.000000000000e+00,1.000000000000e+00,5.000000000000e-01");
}
