#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hypcon/model.hpp"
#include "hypcon/uncertainty.hpp"

namespace hypcon {

// Bound on solutions of |a(t)| <= |a0| + int_0^t gamma (|a|^2 + |a|) ds,
// valid while |a0| <= exp(-gamma T).
struct ComparisonBound {
  double alpha0 = 0.0;
  double gamma = 0.0;
  double T = 0.0;
  bool precondition_ok = false;
  std::string failure;  // why the precondition fails
  double coarse = 0.0;  // |a0| exp(2 gamma T)

  // |a0| / (-|a0| + (|a0| + 1) exp(-gamma t))
  double operator()(double t) const;
};

ComparisonBound comparison_bound(double alpha0, double gamma, double T);

struct InitialNorms {
  double w = 0.0;      // ||w0||_inf
  double w_t = 0.0;    // ||w_t(., 0)||_inf
  double dt_gu = 0.0;  // sup |d_t g_u|
};

// Existential constants of the robustness proof that the report cannot
// compute. A value <= 0 means "not supplied" and skips the checks that use it.
struct ExistentialConstants {
  double kappa6 = 0.0;       // prediction-to-boundary error gain
  double kappa10_tilde = 0.0;  // second bound on eps_gv
};

struct BoundsOptions {
  UncertaintySpec uncertainty;  // defines the perturbed coefficient family
  double operating_delta = 0.0;  // compared against the rate limits when > 0
  double horizon = 0.0;          // T of the semi-global estimate; 0 uses l_{Lambda^-1}
  ExistentialConstants existential;
};

struct ConditionCheck {
  std::string name;
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string detail;
};

struct BoundsReport {
  StateBox state_box;
  int grid_density = 0;
  double theta = 0.0;
  InitialNorms norms;
  double horizon = 0.0;
  LipschitzConstants lip;
  double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
  double gamma1 = 0.0, gamma1_tilde = 0.0, gamma2 = 0.0, gamma3 = 0.0, gamma4 = 0.0, gamma5 = 0.0;
  double gamma1_semiglobal = 0.0;
  double ctilde_prime_semiglobal = 0.0;
  double ctilde_prime_global = 0.0;
  double ctilde_prime_D0 = 0.0;
  double ctilde_prime_feedback = 0.0;  // w_t threshold of the nominal convergence theorem
  double delta_max_nominal = 0.0;
  double delta_bar_max = 0.0;
  double delta_bar_max1 = 0.0;
  double delta_max_robust = 0.0;
  double sigma = 0.0;
  std::vector<ConditionCheck> conditions;
  std::vector<std::string> warnings;
};

// Certificate constants from sampled sups of the model on the grids of
// `box` (Lipschitz constants) and on balls of the radii the theory asks for
// (the gamma's), sampled on dyadic shells down to radius 1. The perturbed
// coefficients range over the multiplicative family (1 + e) with e = +-eps
// per speed and source component.
BoundsReport compute_report(const SystemModel& model, const InitialNorms& norms, double theta, const StateBox& box,
                            int density, const BoundsOptions& options = {});

// Largest admissible eps_sum for a target ball of radius epsilon_target.
double epsilon_max(const BoundsReport& report, double kappa6, double delta, double epsilon_target, double w0_norm);

// Aligned `key = value` lines, then the condition verdicts and warnings.
void write_report_text(std::ostream& out, const BoundsReport& report);
// CSV `key,value`.
void write_report_csv(std::ostream& out, const BoundsReport& report);

}  // namespace hypcon
