#include <cmath>
#include <random>

#include "doctest.h"
#include "hypcon/model.hpp"

using namespace hypcon;

namespace {

SystemModel linear_model(double a) {
  SystemModel m;
  m.lambda_u = Coefficient::constant(1.5);
  m.lambda_v = Coefficient::constant(0.7);
  m.f_u = Coefficient::parse(std::to_string(a) + "*v");
  m.f_v = Coefficient::parse("0.25*u");
  m.g_u = Coefficient::parse("v");
  return m;
}

SystemModel smooth_model() {
  SystemModel m;
  m.lambda_u = Coefficient::parse("1.5 + 0.3*sin(u + 2*v) + 0.1*x");
  m.lambda_v = Coefficient::parse("1 + 0.2*cos(u*v) + 0.1*exp(0.5*u)");
  m.f_u = Coefficient::parse("u*v - 0.5*sin(v) + x*u");
  m.f_v = Coefficient::parse("-u + 0.3*v*v*u");
  m.g_u = Coefficient::parse("0.5*v");
  return m;
}

}  // namespace

TEST_CASE("coefficients of the reference example") {
  const Example ex = builtin_example();
  const Coeffs a = eval_coeffs(ex.model, 0.3, 1.0, 1.0);
  CHECK(a.lambda_u == 1.0);
  CHECK(a.lambda_v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.f_u == 0.0);
  CHECK(a.f_v == 0.0);

  const Coeffs b = eval_coeffs(ex.model, 0.7, 1.0, 0.0);
  CHECK(b.lambda_u == 1.0);
  CHECK(b.lambda_v == 1.0);
  CHECK(b.f_u == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(b.f_v == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));

  const Coeffs z = eval_coeffs(ex.model, 0.5, 0.0, 0.0);
  CHECK(z.f_u == 0.0);
  CHECK(z.f_v == 0.0);
}

TEST_CASE("non-positive speed is rejected with the offending point") {
  SystemModel m = linear_model(1.0);
  m.lambda_v = Coefficient::parse("v");
  CHECK_THROWS_AS(eval_coeffs(m, 0.25, 0.0, -1.0), ModelError);
  try {
    eval_coeffs(m, 0.25, 0.0, -1.0);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("x=0.25") != std::string::npos);
  }
}

TEST_CASE("c-coefficients of the reference example at (1,1)") {
  const Example ex = builtin_example();
  const CCoeffs c = eval_c_coeffs(ex.model, 0.5, 1.0, 1.0);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.0);
  CHECK(c[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c[3] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(c[4] == 0.0);
  CHECK(c[5] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(c[6] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(c[7] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("c-coefficients of constant-speed and linear models") {
  const SystemModel m = linear_model(-0.8);
  const CCoeffs c = eval_c_coeffs(m, 0.1, 0.4, -0.9);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.0);
  CHECK(c[4] == 0.0);
  CHECK(c[5] == 0.0);
  CHECK(c[2] == 0.0);
  CHECK(c[3] == doctest::Approx(-0.8));
  CHECK(c[6] == doctest::Approx(0.25));
  CHECK(c[7] == 0.0);
}

TEST_CASE("property: c-coefficients match centred differences of the coefficients") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> pos(0.0, 1.0), st(-1.0, 1.0);
  const SystemModel smooth = smooth_model();
  const SystemModel ref = builtin_example().model;
  const double h = 1e-5;
  int checked = 0;
  for (const SystemModel* model : {&smooth, &ref}) {
    for (int k = 0; k < 100; ++k) {
      const double x = pos(rng), u = st(rng);
      double v = st(rng);
      // keep away from the kinks of the reference speed at v = 0
      if (model == &ref && std::fabs(v) < 0.01) v = 0.5;
      const Coeffs w = eval_coeffs(*model, x, u, v);
      const Coeffs up = eval_coeffs(*model, x, u + h, v), um = eval_coeffs(*model, x, u - h, v);
      const Coeffs vp = eval_coeffs(*model, x, u, v + h), vm = eval_coeffs(*model, x, u, v - h);
      auto d = [&](double Coeffs::*field, const Coeffs& p, const Coeffs& q) { return (p.*field - q.*field) / (2 * h); };
      CCoeffs fd;
      fd[0] = d(&Coeffs::lambda_u, up, um) / w.lambda_u;
      fd[1] = d(&Coeffs::lambda_u, vp, vm) / w.lambda_u;
      fd[2] = d(&Coeffs::f_u, up, um) - fd[0] * w.f_u;
      fd[3] = d(&Coeffs::f_u, vp, vm) - fd[1] * w.f_u;
      fd[4] = d(&Coeffs::lambda_v, up, um) / w.lambda_v;
      fd[5] = d(&Coeffs::lambda_v, vp, vm) / w.lambda_v;
      fd[6] = d(&Coeffs::f_v, up, um) - fd[4] * w.f_v;
      fd[7] = d(&Coeffs::f_v, vp, vm) - fd[5] * w.f_v;
      const CCoeffs c = eval_c_coeffs(*model, x, u, v);
      for (int i = 0; i < 8; ++i) {
        INFO("c" << i + 1 << " at " << x << "," << u << "," << v);
        CHECK(std::fabs(c[i] - fd[i]) <= 1e-6 * std::max(1.0, std::fabs(c[i])));
        ++checked;
      }
    }
  }
  CHECK(checked == 1600);
}

TEST_CASE("programmatic coefficients fall back to centred differences") {
  const Coefficient c = Coefficient::from_function([](double, double u, double v, double) { return u * u * v; });
  CHECK(c.partial(Var::u, 0.0, 1.5, 2.0) == doctest::Approx(6.0).epsilon(1e-8));
  CHECK(c.partial(Var::v, 0.0, 1.5, 2.0) == doctest::Approx(2.25).epsilon(1e-8));
  CHECK(c.depends_on(Var::x));
  CHECK_FALSE(c.symbolic());
}

TEST_CASE("Lipschitz estimates of the reference example") {
  const Example ex = builtin_example();
  const StateBox box{2.0, 0.0, 0.0};
  const LipschitzConstants l = estimate_lipschitz(ex.model, box);
  CHECK(l.l_Lambda_inv == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(l.l_F == 4.0 / 3.0);
  CHECK(l.l_Lambda == doctest::Approx(0.5));
  CHECK(l.lambda_max == 1.0);
  // |d/dv g_u| = |2 sin(2v) + cos 2| peaks at 2 + |cos 2| on |v| <= 2, at a point
  // that the lattice need not hit; the gap shrinks with the lattice spacing.
  const double peak = 2.0 + std::fabs(std::cos(2.0));
  CHECK(l.l_gu <= peak + 1e-12);
  CHECK(l.l_gu >= peak - 2.0 * (4.0 / 100.0) * (4.0 / 100.0));
}

TEST_CASE("constant-coefficient model has zero speed Lipschitz constant") {
  const LipschitzConstants l = estimate_lipschitz(linear_model(1.0), StateBox{1.0, 0, 0}, 10);
  CHECK(l.l_Lambda == 0.0);
  CHECK(l.l_Lambda_inv == doctest::Approx(1.0 / 0.7));
  CHECK(l.l_F == doctest::Approx(1.0));
}

TEST_CASE("property: Lipschitz estimates never decrease when the density doubles") {
  const SystemModel models[] = {builtin_example().model, smooth_model()};
  for (const auto& model : models) {
    for (double radius : {0.3, 1.0, 2.5}) {
      LipschitzConstants prev = estimate_lipschitz(model, StateBox{radius, 0, 0}, 3);
      for (int density = 6; density <= 96; density *= 2) {
        const LipschitzConstants next = estimate_lipschitz(model, StateBox{radius, 0, 0}, density);
        CHECK(next.l_Lambda >= prev.l_Lambda);
        CHECK(next.l_F >= prev.l_F);
        CHECK(next.l_gu >= prev.l_gu);
        CHECK(next.l_Lambda_inv >= prev.l_Lambda_inv);
        CHECK(next.lambda_max >= prev.lambda_max);
        prev = next;
      }
    }
  }
}

TEST_CASE("builtin example") {
  const Example ex = builtin_example();
  CHECK(ex.settings.theta == 0.25);
  CHECK(ex.settings.delta == 0.2);
  CHECK(ex.model.boundary_u(1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ex.model.boundary_u(0.0, 0.0) == 0.0);
  CHECK(ex.model.f_u(0.2, 0.4, 0.4) == 0.0);
  CHECK(ex.initial.u_at(0.0) == 1.0);
  CHECK(ex.initial.v_at(0.0) == 1.0);
  // 1 - cos 2 + cos 2 is exact in binary floating point.
  CHECK(ex.initial.compatibility_defect(ex.model) == 0.0);
  CHECK(check_model(ex.model, StateBox{2.0, 0, 0}).empty());
}

TEST_CASE("check_model warns about a missing equilibrium") {
  SystemModel m = linear_model(1.0);
  m.f_u = Coefficient::parse("1 + u");
  const auto warnings = check_model(m, StateBox{1.0, 0, 0});
  CHECK_FALSE(warnings.empty());
}
