#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hypcon/bounds.hpp"
#include "hypcon/controller.hpp"
#include "hypcon/uncertainty.hpp"

namespace hypcon {

struct RunConfig {
  SystemModel model;
  InitialData initial;
  ControllerConfig controller;
  double t_end = 15.0;
  int m = 100;
  double tol = 1e-7;
  double sample_dt = 0.05;

  UncertaintySpec uncertainty;
  int n_runs = 1024;
  std::uint64_t seed = 0;
  int threads = 0;

  std::optional<Expr> input;  // open-loop input U(t) for `simulate`
  std::string output_dir = "out";

  std::optional<StateBox> box;  // unset: the bounds subcommand picks and announces a default
  int density = 100;
  double horizon = 0.0;
  ExistentialConstants existential;
  double epsilon_target = 0.0;

  PredictionScheme predict_scheme = PredictionScheme::lattice;
  Expr fill_in_a;                // offsets added to v(1, 0); only U(t) - U(0) matters
  Expr fill_in_b;
  double predict_threshold = 0.0;  // 0 selects 50 * tol
};

// Line-based `section.key = value` text; `#` starts a comment outside quotes
// and expressions may be quoted. Errors are ConfigError with `source:line:col`.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

// Exit codes: 0 success, 1 numerical failure, 2 configuration or parse error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hypcon
