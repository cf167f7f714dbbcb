#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hypcon/characteristics.hpp"

namespace hypcon {

// The desired trace of v(0, .) from tau_k on. In stabilization mode it ramps
// linearly from v0k to zero at rate delta; in tracking mode it ramps toward
// the reference and then follows it.
class VirtualInput {
 public:
  VirtualInput() = default;
  static VirtualInput stabilize(double v0k, double tau_k, double delta);
  // Throws ConfigError when the reference moves faster than delta on the
  // sampled window [tau_k, tau_k + horizon].
  static VirtualInput track(double v0k, double tau_k, double delta, const InputSignal& reference,
                            double horizon = 100.0);

  double operator()(double t) const;
  double rate(double t) const;

  double v0k() const { return v0k_; }
  double tau_k() const { return tau_k_; }
  double delta() const { return delta_; }
  // End of the ramp (the reference is followed afterwards).
  double ramp_end() const { return t_meet_; }

 private:
  double v0k_ = 0.0;
  double tau_k_ = 0.0;
  double delta_ = 0.0;
  double slope_ = 0.0;
  double t_meet_ = 0.0;
  std::optional<InputSignal> reference_;
};

// One time level of the target dynamics: fields along the curve
// (x, tau_v(s; x)) at the nodes x_i = i/m.
struct TargetLevel {
  double s = 0.0;
  double tau0 = 0.0;  // tau_v(s; 0)
  std::vector<double> u, v, u_t, v_t;
  std::vector<double> dtau;  // d/ds tau_v(s; x)
  std::vector<double> nu, mu;
};

struct TargetState {
  std::vector<TargetLevel> levels;  // empty unless keep_levels
  std::vector<double> times;
  std::vector<double> input;  // physical input U at `times`
  double offset = 0.0;        // added so that U(t_k) continues the measured v(1, t_k)
};

struct TargetOptions {
  bool keep_levels = false;
  double cfl = 0.5;
};

// Solves the target dynamics from t_k to t_end: x-marches for v* and v*_t
// from the boundary data U*(tau0) at x = 0, explicit Euler in s for u* and the
// upwinded advection of u*_t. `v1_measured` is v(1, t_k) of the measurement
// used for the continuity offset. Throws ControllerError(-1, ...) on
// non-finite values.
TargetState solve_target_dynamics(const SystemModel& model, const PredictionBundle& bundle, const VirtualInput& U_star,
                                  double t_end, double v1_measured, const TargetOptions& options = {});

// The physical input on [t_k, t_{k+1}], piecewise linear in the target levels.
ControlSignal control_segment(const TargetState& target);

enum class ControlMode { stabilize, track };

struct ControllerConfig {
  double theta = 0.25;
  double delta = 0.2;
  ControlMode mode = ControlMode::stabilize;
  std::optional<InputSignal> reference;  // tracking mode
  double smoothing = 1e-3;               // continuous-time law
  PredictOptions prediction;
};

struct StepDiagnostics {
  int k = 0;
  double t_k = 0.0;
  double tau_k = 0.0;
  double v0k = 0.0;
  double norm_w_inf = 0.0;
  double norm_wt_inf = 0.0;
  double U_at_tk = 0.0;
};

struct ClosedLoopOptions {
  // Plant actually simulated (the controller always uses the nominal model).
  const SystemModel* plant = nullptr;
  // Maps the plant state at t_k to the measurement handed to the controller;
  // the last argument is the input value currently applied.
  std::function<StateGrid(const StateGrid& plant_state, int k, double U_applied)> measure;
  bool record_steps = true;  // keep every accepted plant step
  double sample_dt = 0.0;    // also sample the plant on this uniform grid (0: off)
};

struct ClosedLoopResult {
  Trajectory trajectory;  // plant snapshots; trajectory.input holds U at their times
  ControlSignal input;
  std::vector<StepDiagnostics> steps;
  std::vector<VirtualInput> virtual_inputs;
  std::vector<std::pair<double, double>> norm_trace;  // (t, ||w||_inf) on the sample_dt grid
};

// Algorithm: at t_k = k*theta measure, predict, build U*, solve the target
// dynamics and apply the extracted segment until t_{k+1}. Errors carry the
// step index (ControllerError) unless they come from the plant integration.
ClosedLoopResult run_closed_loop(const SystemModel& model, const StateGrid& w0, const ControllerConfig& config,
                                 double t_end, double tol, const ClosedLoopOptions& options = {});
ClosedLoopResult run_closed_loop(const SystemModel& model, const InitialData& w0, const ControllerConfig& config,
                                 double t_end, int m, double tol, const ClosedLoopOptions& options = {});

// Continuous-time law: predicts from the current state, imposes
// d/dt U* = -delta * tanh(v(0, tau)/smoothing) at x = 0 and returns the
// matching input rate from the x-march of v_t.
double continuous_law_step(const SystemModel& model, const StateGrid& W_t, double delta, double smoothing,
                           double tol = 1e-7);

// CSV `k,t_k,tau_k,v0k,norm_w_inf,norm_wt_inf,U_at_tk`.
void write_diagnostics_csv(std::ostream& out, const std::vector<StepDiagnostics>& steps);
// CSV `t,U,v0,norm_inf`, one row per plant snapshot.
void write_boundary_csv(std::ostream& out, const ClosedLoopResult& result);
// CSV `t,U`.
void write_input_csv(std::ostream& out, const ControlSignal& input);

}  // namespace hypcon
