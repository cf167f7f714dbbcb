#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hypcon/controller.hpp"

namespace hypcon {

// Relative error bounds. eps_wt is tied to eps_w: the measured time
// derivative is always the nominal right-hand side of the measured state.
struct UncertaintySpec {
  double eps_Lambda = 0.0;
  double eps_F = 0.0;
  double eps_gu = 0.0;
  double eps_gv = 0.0;
  double eps_w = 0.0;
  double eps_wt = 0.0;
  double eps_U = 0.0;

  // Throws ConfigError for negative entries or eps_w, eps_wt > 1; with
  // `certificate` also for eps_U > 1/4.
  void validate(bool certificate = false) const;
  bool is_zero() const;
};

// Sign channels of one realization: F and Lambda are split per component and
// the state measurement per field.
enum class Channel : int { f_u, f_v, lambda_u, lambda_v, g_u, g_v, w_u, w_v, U };
inline constexpr int channel_count = 9;
const char* channel_name(Channel c);
std::array<double, channel_count> channel_bounds(const UncertaintySpec& spec);

struct Realization {
  std::array<double, channel_count> eps{};
  std::uint64_t seed = 0;  // 0 for corner realizations
  bool corner = false;

  double operator[](Channel c) const { return eps[static_cast<int>(c)]; }
};

// Corner `index` sets channel j to +bound when bit j is set, else -bound.
Realization corner_realization(const UncertaintySpec& spec, std::uint64_t index);
// Uniform on [-bound, bound] per channel, a deterministic function of `seed`.
Realization random_realization(const UncertaintySpec& spec, std::uint64_t seed);

// Scales every coefficient by (1 + eps), adds eps_gv * u to g_v and scales the
// actuator gain by (1 + eps_U). Throws ModelError if a speed factor is not
// positive.
SystemModel perturb_model(const SystemModel& model, const Realization& r);

// Scales u and v by (1 + eps_u) and (1 + eps_v), then adds affine corrections
// (1 - x) du and x dv so that u(0) = g_u(v(0)) and v(1) matches the nominal
// boundary value of `U_value`.
StateGrid corrupt_measurement(const StateGrid& W, double eps_u, double eps_v, double U_value,
                              const SystemModel& model);
inline StateGrid corrupt_measurement(const StateGrid& W, double eps_w, double U_value, const SystemModel& model) {
  return corrupt_measurement(W, eps_w, eps_w, U_value, model);
}

struct EnsembleConfig {
  ControllerConfig controller;
  int m = 50;
  double tol = 1e-7;
  double t_end = 15.0;
  double sample_dt = 0.05;
  int threads = 0;  // 0: hardware concurrency
  // Start the plant from w0 / (1 + eps_w) so that the first measurement
  // returns w0.
  bool scale_initial_state = true;
};

struct RunRecord {
  int run = 0;
  Realization realization;
  double final_norm = 0.0;
  std::string status;  // "ok", "failed" or "skipped"
  std::string message;
  std::vector<double> norms;  // at EnsembleResult::times (truncated on failure)
};

struct EnsembleResult {
  std::vector<double> times;
  // 1st, 25th, 50th, 75th and 99th percentiles of ||w(., t)||_inf over the
  // successful runs.
  std::array<std::vector<double>, 5> percentiles;
  std::vector<RunRecord> runs;
  int failures = 0;  // failed or skipped runs
};

inline constexpr std::array<double, 5> ensemble_levels{0.01, 0.25, 0.50, 0.75, 0.99};

// Linear interpolation between order statistics at position p * (n - 1).
double percentile(std::vector<double> values, double p);

// The first min(n_runs, 2^9) runs are the corner realizations, the rest are
// random with per-run seeds derived from seed ^ run. The controller always
// uses the nominal model.
EnsembleResult run_ensemble(const SystemModel& model, const InitialData& w0, const EnsembleConfig& config,
                            const UncertaintySpec& spec, int n_runs, std::uint64_t seed);

// CSV `t,p01,p25,p50,p75,p99`.
void write_percentiles_csv(std::ostream& out, const EnsembleResult& result);
// CSV `run,<channels>,final_norm,status`.
void write_runs_csv(std::ostream& out, const EnsembleResult& result);

}  // namespace hypcon
