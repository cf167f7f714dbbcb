#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "hypcon/model.hpp"

namespace hypcon {

// Nodal values at x_i = i/m, i = 0..m, at one instant.
struct StateGrid {
  int m = 0;
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> v;

  StateGrid() = default;
  StateGrid(int cells, double time) : m(cells), t(time), u(cells + 1, 0.0), v(cells + 1, 0.0) {}

  double x(int i) const { return static_cast<double>(i) / m; }
  double dx() const { return 1.0 / m; }
  double norm_inf() const;
  bool finite() const;

  static StateGrid sample(const InitialData& data, int m, double t = 0.0);
  static StateGrid constant(int m, double u, double v, double t = 0.0);
};

// Continuous piecewise-linear input through breakpoints (t_j, U_j); constant
// extension outside the breakpoint range.
class ControlSignal {
 public:
  ControlSignal() = default;
  ControlSignal(std::vector<double> times, std::vector<double> values);
  static ControlSignal constant(double value, double t0, double t1);

  // Appends a breakpoint; a repeated final time is ignored.
  void append(double t, double value);
  // Appends every breakpoint of `other` after the current end.
  void extend(const ControlSignal& other);

  double operator()(double t) const;
  double rate(double t) const;  // right derivative
  double lipschitz() const;
  bool empty() const { return t_.empty(); }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }
  const std::vector<double>& times() const { return t_; }
  const std::vector<double>& values() const { return u_; }

 private:
  std::vector<double> t_;
  std::vector<double> u_;
};

// Boundary input used by the integrator; `rate` feeds the boundary-node
// derivative of rhs().
struct InputSignal {
  std::function<double(double)> value;
  std::function<double(double)> rate;

  static InputSignal from(ControlSignal signal);
  static InputSignal constant(double c);
  static InputSignal from_expr(const Expr& e);  // expression in t
};

struct Trajectory {
  std::vector<StateGrid> snapshots;
  ControlSignal input;

  bool empty() const { return snapshots.empty(); }
  double t_begin() const { return snapshots.front().t; }
  double t_end() const { return snapshots.back().t; }
  int m() const { return snapshots.front().m; }
  // Linear interpolation in time at node i.
  double u_at(int i, double t) const;
  double v_at(int i, double t) const;
  // Bilinear interpolation in x and t.
  void w_at(double x, double t, double& u, double& v) const;
  StateGrid at(double t) const;
  // Index j with snapshots[j].t <= t <= snapshots[j+1].t (clamped).
  std::size_t bracket(double t) const;
  void push(const StateGrid& g);
};

// Writes u(0) = g_u(v(0), t) and v(1) = gain*U + g_v(u(1), t) into the grid.
void impose_boundary(const SystemModel& model, StateGrid& grid, double U, double t);

// Semi-discrete right-hand side with first-order upwinding: u travels toward
// larger x and uses the backward difference, v travels toward smaller x and
// uses the forward difference. Boundary nodes receive the derivative of the
// boundary maps.
StateGrid rhs(const SystemModel& model, const StateGrid& grid, double U_t, double t);

// The PDE residual Lambda w_x + F at every node, using the upwind difference in
// the interior and the one-sided difference available at the boundary nodes.
// Agrees with rhs() at interior nodes.
StateGrid time_derivative_field(const SystemModel& model, const StateGrid& grid);

// (u_t, v_t) at a single node, as in time_derivative_field().
void node_time_derivative(const SystemModel& model, const StateGrid& grid, int i, double& ut, double& vt);

struct IntegrateStats {
  long accepted = 0;
  long rejected = 0;
  double last_step = 0.0;
};

struct IntegrateOptions {
  std::vector<double> sample_times;  // dense output instants inside [t0, t1]
  bool record_steps = false;         // keep every accepted step as a snapshot
  std::vector<double> stops;         // steps never cross these instants
  std::function<void(const StateGrid&)> on_step;  // called after every accepted step
  double initial_step = 0.0;
  IntegrateStats* stats = nullptr;
};

// Dormand-Prince 5(4) with absolute and relative tolerance `tol` on the
// semi-discrete system; boundary nodes are re-imposed at every stage. The
// initial grid is included as the first snapshot when record_steps is set or
// t0 is a sample time.
Trajectory integrate(const SystemModel& model, const StateGrid& w0, const InputSignal& U, double t0, double t1,
                     double tol, const IntegrateOptions& options = {});

// Convenience overload that samples the initial data and checks compatibility
// of the input with v0(1) and of u0(0) with g_u (ConfigError otherwise).
Trajectory integrate(const SystemModel& model, const InitialData& w0, const InputSignal& U, double t0, double t1,
                     int m, double tol, const IntegrateOptions& options = {});

// CSV `t,x,u,v`, one row per node per snapshot.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace hypcon
