#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hypcon/expr.hpp"

namespace hypcon {

// A scalar coefficient of (x, u, v, t). Parsed coefficients carry exact
// symbolic partials; programmatic ones fall back to centred differences.
class Coefficient {
 public:
  using Function = std::function<double(double x, double u, double v, double t)>;

  Coefficient();  // identically zero
  explicit Coefficient(Expr e);
  static Coefficient parse(std::string_view source);
  static Coefficient constant(double c);
  static Coefficient from_function(Function f, std::string label = "<function>");

  double operator()(double x, double u, double v, double t = 0.0) const;
  double partial(Var var, double x, double u, double v, double t = 0.0) const;

  // Conservative for programmatic coefficients (always true).
  bool depends_on(Var var) const;
  bool symbolic() const { return expr_.has_value(); }
  const Expr* expr() const { return expr_ ? &*expr_ : nullptr; }
  std::string describe() const;

  Coefficient scaled(double factor) const;

 private:
  std::optional<Expr> expr_;
  std::array<Expr, 4> partials_{};
  Function fn_;
  std::string label_;
};

struct SystemModel {
  Coefficient lambda_u;
  Coefficient lambda_v;
  Coefficient f_u;
  Coefficient f_v;
  Coefficient g_u;  // u(0,t) = g_u(v(0,t), t); written in v and t
  Coefficient g_v;  // reflection added at x = 1, written in u and t; zero for the nominal model
  double input_gain = 1.0;  // actuator map: v(1,t) = input_gain * U(t) + g_v(u(1,t), t)
  bool stabilizing = true;  // require F(x,0) = 0 and g_u(0,t) = 0
  std::string name = "custom";

  double boundary_u(double v, double t) const { return g_u(0.0, 0.0, v, t); }
  double boundary_v(double U, double u1, double t) const { return input_gain * U + g_v(1.0, u1, 0.0, t); }
};

struct Coeffs {
  double lambda_u, lambda_v, f_u, f_v;
};

struct CoeffPartials {
  double dlu_du, dlu_dv, dlv_du, dlv_dv;
  double dfu_du, dfu_dv, dfv_du, dfv_dv;
};

// c[0] .. c[7] hold c1 .. c8 of the integral equations for the time derivatives.
using CCoeffs = std::array<double, 8>;

// Throws ModelError naming the point when a speed is not strictly positive or
// any value is non-finite.
Coeffs eval_coeffs(const SystemModel& model, double x, double u, double v);
CoeffPartials eval_partials(const SystemModel& model, double x, double u, double v);
CCoeffs eval_c_coeffs(const SystemModel& model, double x, double u, double v);

// Sup-norm box ||z||_inf <= radius for the state, plus a time window for the
// boundary maps (which may depend on t).
struct StateBox {
  double radius = 1.0;
  double t_min = 0.0;
  double t_max = 0.0;
};

struct LipschitzConstants {
  double l_Lambda = 0.0;      // sup max(|d_u Lambda|, |d_v Lambda|)
  double l_F = 0.0;           // sup of the row-sum norm of dF/dw
  double l_gu = 0.0;          // sup |d_v g_u|
  double l_Lambda_inv = 0.0;  // sup max(1/lambda_u, 1/lambda_v)
  double lambda_max = 0.0;    // sup max(lambda_u, lambda_v)
};

// Calls fn(x, u, v) on the sampling lattice of the box. `density` counts
// subintervals per axis, so doubling it yields a superset of points. Axes the
// coefficients provably ignore collapse to a single sample.
void for_each_sample(const StateBox& box, int density, bool need_x,
                     const std::function<void(double x, double u, double v)>& fn);
bool depends_on_x(const SystemModel& model);

LipschitzConstants estimate_lipschitz(const SystemModel& model, const StateBox& box, int density = 100);

// Warnings for assumptions that fail on the sampled box (positivity,
// equilibrium at the origin when the model is flagged stabilizing).
std::vector<std::string> check_model(const SystemModel& model, const StateBox& box, int density = 20);

struct InitialData {
  Coefficient u0;  // written in x
  Coefficient v0;  // written in x

  double u_at(double x) const { return u0(x, 0.0, 0.0, 0.0); }
  double v_at(double x) const { return v0(x, 0.0, 0.0, 0.0); }
  double sup_norm(int samples = 1001) const;
  double lipschitz(int samples = 1001) const;
  // |u0(0) - g_u(v0(0), t0)|
  double compatibility_defect(const SystemModel& model, double t0 = 0.0) const;
};

struct ExampleSettings {
  double theta = 0.25;
  double delta = 0.2;
};

struct Example {
  SystemModel model;
  InitialData initial;
  ExampleSettings settings;
};

// The two-state example with a clamped speed and a trigonometric reflection.
Example builtin_example();

}  // namespace hypcon
