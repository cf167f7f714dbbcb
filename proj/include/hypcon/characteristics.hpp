#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "hypcon/solver.hpp"

namespace hypcon {

enum class Family { u, v };

// Path s -> xi(s) of one characteristic, stored as breakpoints. u-curves move
// toward larger x as s grows, v-curves toward smaller x.
struct CharCurve {
  Family family = Family::u;
  std::vector<double> s;
  std::vector<double> xi;

  double t_end() const { return s.back(); }
  double x_end() const { return xi.back(); }
};

// tau(t; x_i) at the nodes of the trajectory grid. tau_v marches down from
// tau_v(t;1) = t, tau_u up from tau_u(t;0) = t, both with the trapezoidal rule
// and w interpolated linearly in t. Throws HorizonError when the curve leaves
// the stored time range.
std::vector<double> tau_v(const SystemModel& model, const Trajectory& trajectory, double t);
std::vector<double> tau_u(const SystemModel& model, const Trajectory& trajectory, double t);

// Heun integration of d(xi)/ds = +lambda_u (u-family) or -lambda_v (v-family)
// from (x0, t0) until xi reaches the boundary it travels toward. With
// `backward` the curve is followed into the past until it meets x = 0, x = 1
// or the start of the trajectory.
CharCurve trace_xi(const SystemModel& model, const Trajectory& trajectory, double x0, double t0, Family family,
                   bool backward = false);

enum class PredictionScheme {
  // Characteristic lattice built from the measured grid; the input curve is
  // the right edge of the lattice, so the fill-in input never enters.
  lattice,
  // Method of lines on the rectangle with a compatible fill-in input, then
  // interpolation along tau_v.
  method_of_lines,
};

struct PredictOptions {
  PredictionScheme scheme = PredictionScheme::lattice;
  // Fill-in input U(t) for t >= t_k. For the lattice this switches to the
  // rectangle variant (right-boundary points are added). Defaults to the
  // constant continuation of v(1, t_k).
  std::optional<InputSignal> fill_in;
  double horizon = 0.0;     // method of lines only; 0 selects 1.1 * sup 1/lambda_v on the box
  double box_radius = 0.0;  // 0 selects 1.5 * ||W_k||_inf (1 for the zero state)
  int density = 100;
  bool keep_lattice = false;
};

struct LatticePoint {
  double x, t, u, v;
};

struct PredictionBundle {
  double t_k = 0.0;
  int m = 0;
  // On the nodes x_i = i/m, all along the curve (x, tau_v(t_k; x)).
  std::vector<double> tau_v;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> u_t;
  // Lattice points (keep_lattice) or the rectangle solution (method of lines).
  std::vector<LatticePoint> lattice;
  Trajectory rectangle;

  double tau_k() const { return tau_v.front(); }
  double v0_at_tauk() const { return v.front(); }
};

// Predicts the state on the input characteristic through (1, t_k) from the
// measurement W_k (W_k.t is t_k). Throws ConfigError when W_k violates
// u(0) = g_u(v(0), t_k) by more than tol, BlowUpError when characteristics of
// one family cross, ModelError on loss of hyperbolicity.
PredictionBundle predict(const SystemModel& model, const StateGrid& W_k, double tol,
                         const PredictOptions& options = {});

// Largest absolute difference over tau_v, u, v and u_t.
double bundle_discrepancy(const PredictionBundle& a, const PredictionBundle& b);

// CSV `x,tau_v,u,v,u_t`.
void write_bundle_csv(std::ostream& out, const PredictionBundle& bundle);

}  // namespace hypcon
