#include "hypcon/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hypcon/errors.hpp"

namespace hypcon {

namespace {
constexpr std::array<Var, 4> kVars = {Var::x, Var::u, Var::v, Var::t};

std::string point_text(double x, double u, double v) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "(x=%.6g, u=%.6g, v=%.6g)", x, u, v);
  return buf;
}
}  // namespace

Coefficient::Coefficient() : Coefficient(Expr::constant(0.0)) {}

Coefficient::Coefficient(Expr e) : expr_(std::move(e)) {
  for (std::size_t i = 0; i < kVars.size(); ++i) partials_[i] = differentiate(*expr_, kVars[i]);
}

Coefficient Coefficient::parse(std::string_view source) { return Coefficient(hypcon::parse(source)); }

Coefficient Coefficient::constant(double c) { return Coefficient(Expr::constant(c)); }

Coefficient Coefficient::from_function(Function f, std::string label) {
  Coefficient c;
  c.expr_.reset();
  c.fn_ = std::move(f);
  c.label_ = std::move(label);
  return c;
}

double Coefficient::operator()(double x, double u, double v, double t) const {
  return expr_ ? expr_->eval(x, u, v, t) : fn_(x, u, v, t);
}

double Coefficient::partial(Var var, double x, double u, double v, double t) const {
  if (expr_) return partials_[static_cast<std::size_t>(var)].eval(x, u, v, t);
  double args[4] = {x, u, v, t};
  double& arg = args[static_cast<std::size_t>(var)];
  const double h = 1e-6 * std::max(1.0, std::fabs(arg));
  const double centre = arg;
  arg = centre + h;
  const double fp = fn_(args[0], args[1], args[2], args[3]);
  arg = centre - h;
  const double fm = fn_(args[0], args[1], args[2], args[3]);
  return (fp - fm) / (2.0 * h);
}

bool Coefficient::depends_on(Var var) const { return expr_ ? expr_->depends_on(var) : true; }

std::string Coefficient::describe() const { return expr_ ? expr_->str() : label_; }

Coefficient Coefficient::scaled(double factor) const {
  if (expr_) return Coefficient(Expr::constant(factor) * *expr_);
  Function inner = fn_;
  return from_function([inner, factor](double x, double u, double v, double t) { return factor * inner(x, u, v, t); },
                       label_);
}

Coeffs eval_coeffs(const SystemModel& model, double x, double u, double v) {
  Coeffs c{model.lambda_u(x, u, v), model.lambda_v(x, u, v), model.f_u(x, u, v), model.f_v(x, u, v)};
  if (!(c.lambda_u > 0.0) || !(c.lambda_v > 0.0)) {
    throw ModelError("transport speed not positive at " + point_text(x, u, v) +
                     ": lambda_u=" + std::to_string(c.lambda_u) + ", lambda_v=" + std::to_string(c.lambda_v));
  }
  if (!std::isfinite(c.lambda_u) || !std::isfinite(c.lambda_v) || !std::isfinite(c.f_u) || !std::isfinite(c.f_v)) {
    throw ModelError("non-finite coefficient at " + point_text(x, u, v));
  }
  return c;
}

CoeffPartials eval_partials(const SystemModel& model, double x, double u, double v) {
  return CoeffPartials{
      model.lambda_u.partial(Var::u, x, u, v), model.lambda_u.partial(Var::v, x, u, v),
      model.lambda_v.partial(Var::u, x, u, v), model.lambda_v.partial(Var::v, x, u, v),
      model.f_u.partial(Var::u, x, u, v),      model.f_u.partial(Var::v, x, u, v),
      model.f_v.partial(Var::u, x, u, v),      model.f_v.partial(Var::v, x, u, v),
  };
}

CCoeffs eval_c_coeffs(const SystemModel& model, double x, double u, double v) {
  const Coeffs k = eval_coeffs(model, x, u, v);
  const CoeffPartials p = eval_partials(model, x, u, v);
  CCoeffs c{};
  c[0] = p.dlu_du / k.lambda_u;
  c[1] = p.dlu_dv / k.lambda_u;
  c[2] = p.dfu_du - c[0] * k.f_u;
  c[3] = p.dfu_dv - c[1] * k.f_u;
  c[4] = p.dlv_du / k.lambda_v;
  c[5] = p.dlv_dv / k.lambda_v;
  c[6] = p.dfv_du - c[4] * k.f_v;
  c[7] = p.dfv_dv - c[5] * k.f_v;
  return c;
}

void for_each_sample(const StateBox& box, int density, bool need_x,
                     const std::function<void(double, double, double)>& fn) {
  const int n = std::max(density, 2);
  const int nx = need_x ? n : 0;
  for (int ix = 0; ix <= nx; ++ix) {
    const double x = need_x ? static_cast<double>(ix) / n : 0.5;
    for (int iu = 0; iu <= n; ++iu) {
      const double u = box.radius * (2.0 * iu / n - 1.0);
      for (int iv = 0; iv <= n; ++iv) {
        const double v = box.radius * (2.0 * iv / n - 1.0);
        fn(x, u, v);
      }
    }
  }
}

bool depends_on_x(const SystemModel& model) {
  return model.lambda_u.depends_on(Var::x) || model.lambda_v.depends_on(Var::x) ||
         model.f_u.depends_on(Var::x) || model.f_v.depends_on(Var::x);
}

LipschitzConstants estimate_lipschitz(const SystemModel& model, const StateBox& box, int density) {
  LipschitzConstants l;
  for_each_sample(box, density, depends_on_x(model), [&](double x, double u, double v) {
    const Coeffs k = eval_coeffs(model, x, u, v);
    const CoeffPartials p = eval_partials(model, x, u, v);
    l.l_Lambda = std::max({l.l_Lambda, std::fabs(p.dlu_du), std::fabs(p.dlv_du), std::fabs(p.dlu_dv),
                           std::fabs(p.dlv_dv)});
    l.l_F = std::max({l.l_F, std::fabs(p.dfu_du) + std::fabs(p.dfu_dv), std::fabs(p.dfv_du) + std::fabs(p.dfv_dv)});
    l.l_Lambda_inv = std::max({l.l_Lambda_inv, 1.0 / k.lambda_u, 1.0 / k.lambda_v});
    l.lambda_max = std::max({l.lambda_max, k.lambda_u, k.lambda_v});
  });
  const int n = std::max(density, 2);
  const bool need_t = model.g_u.depends_on(Var::t) && box.t_max > box.t_min;
  const int nt = need_t ? n : 0;
  for (int it = 0; it <= nt; ++it) {
    const double t = need_t ? box.t_min + (box.t_max - box.t_min) * it / n : box.t_min;
    for (int iv = 0; iv <= n; ++iv) {
      const double v = box.radius * (2.0 * iv / n - 1.0);
      l.l_gu = std::max(l.l_gu, std::fabs(model.g_u.partial(Var::v, 0.0, 0.0, v, t)));
    }
  }
  return l;
}

std::vector<std::string> check_model(const SystemModel& model, const StateBox& box, int density) {
  std::vector<std::string> warnings;
  bool reported_speed = false;
  for_each_sample(box, density, depends_on_x(model), [&](double x, double u, double v) {
    if (reported_speed) return;
    const double lu = model.lambda_u(x, u, v);
    const double lv = model.lambda_v(x, u, v);
    if (!(lu > 0.0) || !(lv > 0.0)) {
      warnings.push_back("transport speed not positive at " + point_text(x, u, v));
      reported_speed = true;
    }
  });
  if (model.stabilizing) {
    bool reported_f = false;
    for (int i = 0; i <= density && !reported_f; ++i) {
      const double x = static_cast<double>(i) / density;
      if (model.f_u(x, 0.0, 0.0) != 0.0 || model.f_v(x, 0.0, 0.0) != 0.0) {
        warnings.push_back("F(x,0) is not zero at x=" + std::to_string(x));
        reported_f = true;
      }
    }
    if (model.boundary_u(0.0, box.t_min) != 0.0) warnings.push_back("g_u(0,t) is not zero");
  }
  return warnings;
}

double InitialData::sup_norm(int samples) const {
  double s = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = static_cast<double>(i) / (samples - 1);
    s = std::max({s, std::fabs(u_at(x)), std::fabs(v_at(x))});
  }
  return s;
}

double InitialData::lipschitz(int samples) const {
  double l = 0.0;
  const double h = 1.0 / (samples - 1);
  for (int i = 1; i < samples; ++i) {
    const double x0 = (i - 1) * h;
    const double x1 = i * h;
    l = std::max({l, std::fabs(u_at(x1) - u_at(x0)) / h, std::fabs(v_at(x1) - v_at(x0)) / h});
  }
  return l;
}

double InitialData::compatibility_defect(const SystemModel& model, double t0) const {
  return std::fabs(u_at(0.0) - model.boundary_u(v_at(0.0), t0));
}

Example builtin_example() {
  Example ex;
  ex.model.lambda_u = Coefficient::parse("1");
  ex.model.lambda_v = Coefficient::parse("max(1-0.5*abs(v),0.2)");
  ex.model.f_u = Coefficient::parse("2/3*(u-v)");
  ex.model.f_v = Coefficient::parse("-2/3*(u-v)");
  ex.model.g_u = Coefficient::parse("1-cos(2*v)+v*cos(2)");
  ex.model.g_v = Coefficient::constant(0.0);
  ex.model.stabilizing = true;
  ex.model.name = "builtin";
  ex.initial.u0 = Coefficient::constant(1.0);
  ex.initial.v0 = Coefficient::constant(1.0);
  ex.settings = ExampleSettings{0.25, 0.2};
  return ex;
}

}  // namespace hypcon
