#include "hypcon/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <utility>

#include "hypcon/errors.hpp"
#include "hypcon/io.hpp"

namespace hypcon {

double ComparisonBound::operator()(double t) const {
  const double a = std::fabs(alpha0);
  return a / (-a + (a + 1.0) * std::exp(-gamma * t));
}

ComparisonBound comparison_bound(double alpha0, double gamma, double T) {
  ComparisonBound b;
  b.alpha0 = alpha0;
  b.gamma = gamma;
  b.T = T;
  b.coarse = std::fabs(alpha0) * std::exp(2.0 * gamma * T);
  if (!(gamma > 0.0)) {
    b.failure = "gamma must be positive";
  } else if (!(T > 0.0)) {
    b.failure = "T must be positive";
  } else if (!(std::fabs(alpha0) <= std::exp(-gamma * T))) {
    b.failure = "|alpha0| = " + fmt(std::fabs(alpha0)) + " exceeds exp(-gamma T) = " + fmt(std::exp(-gamma * T));
  } else {
    b.precondition_ok = true;
  }
  return b;
}

namespace {

// Products where a zero factor wins over an infinite one.
double mul0(double a, double b) { return a == 0.0 || b == 0.0 ? 0.0 : a * b; }

struct Sups {
  double pair_sum = 0.0;         // max |c1+c2|, |c3+c4|, |c5+c6|, |c7+c8|
  double pair_sum_scaled = 0.0;  // the same pairs divided by lambda_u (first two) or lambda_v
  double c68 = 0.0;              // max |c6/lambda_v|, |c8/lambda_v|
  double c57 = 0.0;              // max |c5/lambda_v|, |c7/lambda_v|
};

// Non-finite samples count as an infinite sup.
void raise(double& sup, double value) {
  if (std::isnan(value)) value = std::numeric_limits<double>::infinity();
  sup = std::max(sup, std::fabs(value));
}

void absorb(Sups& s, const CCoeffs& c, const Coeffs& k) {
  for (int j = 0; j < 8; j += 2) {
    raise(s.pair_sum, c[j] + c[j + 1]);
    raise(s.pair_sum_scaled, (c[j] + c[j + 1]) / (j < 4 ? k.lambda_u : k.lambda_v));
  }
  raise(s.c68, c[5] / k.lambda_v);
  raise(s.c68, c[7] / k.lambda_v);
  raise(s.c57, c[4] / k.lambda_v);
  raise(s.c57, c[6] / k.lambda_v);
}

Sups sample_sups(const std::vector<SystemModel>& family, double radius, int density) {
  if (!std::isfinite(radius)) {
    const double inf = std::numeric_limits<double>::infinity();
    return Sups{inf, inf, inf, inf};
  }
  // Dyadic shells c, c/2, ... down to radius 1 keep features near the origin
  // visible when c is large, and stay nested under density doubling.
  Sups s;
  for (double r = radius;; r *= 0.5) {
    for (const SystemModel& m : family) {
      for_each_sample(StateBox{r, 0.0, 0.0}, density, depends_on_x(m), [&](double x, double u, double v) {
        absorb(s, eval_c_coeffs(m, x, u, v), eval_coeffs(m, x, u, v));
      });
    }
    if (r <= 1.0) break;
  }
  return s;
}

std::vector<SystemModel> perturbed_family(const SystemModel& model, const UncertaintySpec& spec) {
  // Each perturbed coefficient is linear in a factor or in its reciprocal, so
  // the sups are attained at the sign corners.
  auto factors = [](double eps) { return eps > 0.0 ? std::set<double>{1.0 - eps, 1.0 + eps} : std::set<double>{1.0}; };
  std::vector<SystemModel> family;
  for (double lu : factors(spec.eps_Lambda))
    for (double lv : factors(spec.eps_Lambda))
      for (double fu : factors(spec.eps_F))
        for (double fv : factors(spec.eps_F)) {
          SystemModel m = model;
          m.lambda_u = model.lambda_u.scaled(lu);
          m.lambda_v = model.lambda_v.scaled(lv);
          m.f_u = model.f_u.scaled(fu);
          m.f_v = model.f_v.scaled(fv);
          family.push_back(std::move(m));
        }
  return family;
}

// Smallest gamma >= lower with gamma exp(-4 gamma) >= rhs, if any. The left
// side increases up to gamma = 1/4 and decreases afterwards.
std::pair<double, bool> smallest_gamma(double lower, double rhs) {
  auto g = [](double x) { return x * std::exp(-4.0 * x); };
  if (rhs <= 0.0) return {lower, true};
  if (!(rhs <= g(0.25))) return {lower, false};
  double lo = 0.0, hi = 0.25;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= rhs ? hi : lo) = mid;
  }
  const double left = hi;
  lo = 0.25;
  hi = 1.0;
  while (g(hi) >= rhs) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= rhs ? lo : hi) = mid;
  }
  const double right = lo;
  const double best = std::max(lower, left);
  return {best, best <= right};
}

ConditionCheck leq(std::string name, double lhs, double rhs, std::string detail = {}) {
  return ConditionCheck{std::move(name), lhs <= rhs, lhs, rhs, std::move(detail)};
}

}  // namespace

BoundsReport compute_report(const SystemModel& model, const InitialNorms& norms, double theta, const StateBox& box,
                            int density, const BoundsOptions& options) {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (!(box.radius > 0.0)) throw ConfigError("state box radius must be positive");
  if (density < 2) throw ConfigError("grid density must be at least 2");
  if (norms.w < 0.0 || norms.w_t < 0.0 || norms.dt_gu < 0.0) throw ConfigError("norms must be nonnegative");
  options.uncertainty.validate();

  BoundsReport r;
  r.state_box = box;
  r.grid_density = density;
  r.theta = theta;
  r.norms = norms;
  r.lip = estimate_lipschitz(model, box, density);
  const LipschitzConstants& l = r.lip;
  const double mg = std::max(1.0, l.l_gu);
  const double w0 = norms.w;
  const std::vector<SystemModel> nominal{model};
  const std::vector<SystemModel> family = perturbed_family(model, options.uncertainty);

  r.kappa1 = mg * std::exp(mul0(l.l_F, l.l_Lambda_inv));

  // Determinate set of the initial state.
  r.gamma1 = sample_sups(nominal, r.kappa1 * w0, density).pair_sum;
  r.ctilde_prime_D0 = std::exp(-2.0 * mul0(r.gamma1, l.l_Lambda_inv)) / (2.0 * mg);

  // Semi-global solution up to the horizon T.
  r.horizon = options.horizon > 0.0 ? options.horizon : l.l_Lambda_inv;
  const double reflections = std::ceil(l.lambda_max * r.horizon / 2.0);
  const double c_semiglobal = std::pow(mg, reflections) * std::exp(mul0(l.l_F, r.horizon)) * w0;
  r.gamma1_semiglobal = sample_sups(nominal, c_semiglobal, density).pair_sum;
  double geometric = 0.0;
  for (int i = 0; i <= static_cast<int>(reflections); ++i) geometric += std::pow(mg, i);
  r.ctilde_prime_semiglobal = std::exp(-2.0 * mul0(r.gamma1_semiglobal, r.horizon)) / geometric;

  // Global solution and nominal feedback; v(0, .) is bounded by kappa1 ||w0||.
  r.gamma2 = sample_sups(nominal, r.kappa1 * r.kappa1 * w0, density).pair_sum_scaled;
  r.ctilde_prime_global = std::exp(-r.gamma2) / (2.0 * mg);
  r.delta_max_nominal = r.ctilde_prime_global;
  r.ctilde_prime_feedback = std::exp(-2.0 * mul0(r.gamma1, r.gamma2)) / (4.0 * mg * mg);

  // Robustness certificate.
  const double c = 1.5 * r.kappa1 * r.kappa1 * w0;
  const Sups perturbed = sample_sups(family, c, density);
  r.gamma3 = perturbed.pair_sum;
  r.kappa2 = mg * std::exp(2.0 * mul0(r.gamma3, l.l_Lambda_inv));
  const double c_tilde = 2.0 * r.kappa1 * c;
  const Sups wide = sample_sups(nominal, c_tilde, density);
  r.gamma1_tilde = wide.pair_sum;
  const double growth = std::exp(2.0 * mul0(r.gamma1_tilde, l.l_Lambda_inv));
  r.delta_bar_max1 = 1.0 / (2.0 * r.kappa2 * mg * growth);
  r.kappa3 = 2.0 * r.kappa2 * mg * growth;
  const double speed_term = 1.0 / (r.kappa2 * mul0(l.l_Lambda_inv * l.l_Lambda_inv, l.l_Lambda));
  r.delta_bar_max =
      0.5 * std::min({speed_term, 1.0 / (r.kappa2 * mg * growth), w0 / (theta + l.l_Lambda_inv)});

  const double rhs4 = mul0(perturbed.c57, r.kappa2);
  const auto [g4, ok4] = smallest_gamma(perturbed.c68, rhs4);
  r.gamma4 = g4;
  const double rhs5 = mul0(mul0(wide.c57, r.kappa3), r.kappa2);
  const auto [g5, ok5] = smallest_gamma(wide.c68, rhs5);
  r.gamma5 = g5;
  r.delta_max_robust = 2.0 / 3.0 * std::exp(-4.0 * (r.gamma4 + r.gamma5)) * r.delta_bar_max;
  r.sigma = std::exp(-mul0(mul0(l.l_Lambda_inv * l.l_Lambda_inv, l.l_Lambda), mul0(r.kappa2, r.delta_bar_max))) *
            theta;

  // Hypotheses.
  const double wt = std::max(norms.w_t, norms.dt_gu);
  r.conditions.push_back(leq("state box covers 1.5 kappa1^2 ||w0||", c, box.radius,
                             "Lipschitz constants are sampled on the box only"));
  r.conditions.push_back(leq("w_t(.,0) and d_t g_u within the determinate-set threshold", wt, r.ctilde_prime_D0));
  r.conditions.push_back(leq("w_t(.,0) and d_t g_u within the semi-global threshold", wt, r.ctilde_prime_semiglobal,
                             "horizon T = " + fmt(r.horizon)));
  r.conditions.push_back(leq("w_t(.,0) and d_t g_u within the global-existence threshold", wt,
                             r.ctilde_prime_global));
  r.conditions.push_back(leq("w_t(.,0) within the nominal feedback threshold", wt, r.ctilde_prime_feedback));
  r.conditions.push_back(leq("coupling condition for gamma4", rhs4, mul0(r.gamma4, std::exp(-4.0 * r.gamma4)),
                             ok4 ? "gamma4 >= sup |c6|,|c8| over lambda_v" : "no feasible gamma4"));
  r.conditions.push_back(leq("coupling condition for gamma5", rhs5, mul0(r.gamma5, std::exp(-4.0 * r.gamma5)),
                             ok5 ? "gamma5 >= sup |c6|,|c8| over lambda_v" : "no feasible gamma5"));
  const UncertaintySpec& u = options.uncertainty;
  r.conditions.push_back(leq("eps_w <= 1", u.eps_w, 1.0));
  r.conditions.push_back(leq("eps_wt <= 1", u.eps_wt, 1.0));
  r.conditions.push_back(leq("eps_gv reflection bound", u.eps_gv, std::exp(-4.0 * r.gamma4) / (6.0 * r.kappa2)));
  if (options.existential.kappa10_tilde > 0.0)
    r.conditions.push_back(leq("eps_gv <= 1/kappa10~", u.eps_gv, 1.0 / options.existential.kappa10_tilde));
  r.conditions.push_back(leq("eps_U <= 1/4", u.eps_U, 0.25));
  r.conditions.push_back(leq("w_t(.,0) within delta_bar_max / kappa2", norms.w_t, r.delta_bar_max / r.kappa2));
  if (options.operating_delta > 0.0) {
    const double d = options.operating_delta;
    r.conditions.push_back(leq("operating delta <= delta_max_nominal", d, r.delta_max_nominal));
    r.conditions.push_back(leq("operating delta <= delta_max_robust", d, r.delta_max_robust));
    if (d > r.delta_max_nominal)
      r.warnings.push_back("operating delta " + fmt(d) + " exceeds the certified nominal rate limit " +
                           fmt(r.delta_max_nominal));
  }
  r.warnings.push_back("sampled, not certified: sups are taken on a grid of density " + std::to_string(density));
  return r;
}

double epsilon_max(const BoundsReport& report, double kappa6, double delta, double epsilon_target, double w0_norm) {
  if (!(kappa6 > 0.0) || !(delta > 0.0) || !(epsilon_target > 0.0) || !(w0_norm > 0.0))
    throw ConfigError("epsilon_max needs positive kappa6, delta, epsilon and ||w0||");
  const double k1 = report.kappa1;
  const double num = std::min({delta * report.sigma, epsilon_target / k1, k1 * w0_norm});
  return num / (2.0 * k1 * kappa6 * (k1 * w0_norm + 2.0 * report.lip.l_Lambda_inv * report.delta_bar_max));
}

namespace {

std::vector<std::pair<std::string, double>> report_values(const BoundsReport& r) {
  return {
      {"state_box_radius", r.state_box.radius},
      {"grid_density", static_cast<double>(r.grid_density)},
      {"theta", r.theta},
      {"norm_w0", r.norms.w},
      {"norm_wt0", r.norms.w_t},
      {"norm_dt_gu", r.norms.dt_gu},
      {"horizon", r.horizon},
      {"l_Lambda", r.lip.l_Lambda},
      {"l_F", r.lip.l_F},
      {"l_gu", r.lip.l_gu},
      {"l_Lambda_inv", r.lip.l_Lambda_inv},
      {"lambda_max", r.lip.lambda_max},
      {"kappa1", r.kappa1},
      {"kappa2", r.kappa2},
      {"kappa3", r.kappa3},
      {"gamma1", r.gamma1},
      {"gamma1_semiglobal", r.gamma1_semiglobal},
      {"gamma1_tilde", r.gamma1_tilde},
      {"gamma2", r.gamma2},
      {"gamma3", r.gamma3},
      {"gamma4", r.gamma4},
      {"gamma5", r.gamma5},
      {"ctilde_prime_semiglobal", r.ctilde_prime_semiglobal},
      {"ctilde_prime_global", r.ctilde_prime_global},
      {"ctilde_prime_D0", r.ctilde_prime_D0},
      {"ctilde_prime_feedback", r.ctilde_prime_feedback},
      {"delta_max_nominal", r.delta_max_nominal},
      {"delta_bar_max", r.delta_bar_max},
      {"delta_bar_max1", r.delta_bar_max1},
      {"delta_max_robust", r.delta_max_robust},
      {"sigma", r.sigma},
  };
}

}  // namespace

void write_report_text(std::ostream& out, const BoundsReport& r) {
  const auto values = report_values(r);
  std::size_t width = 0;
  for (const auto& [k, v] : values) width = std::max(width, k.size());
  for (const auto& [k, v] : values) out << std::left << std::setw(static_cast<int>(width)) << k << " = " << fmt(v) << '\n';
  out << '\n';
  for (const ConditionCheck& c : r.conditions) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << fmt(c.lhs) << " <= " << fmt(c.rhs);
    if (!c.detail.empty()) out << " (" << c.detail << ')';
    out << '\n';
  }
  for (const std::string& w : r.warnings) out << "warning: " << w << '\n';
}

void write_report_csv(std::ostream& out, const BoundsReport& r) {
  out << "key,value\n";
  for (const auto& [k, v] : report_values(r)) out << k << ',' << fmt(v) << '\n';
  for (const ConditionCheck& c : r.conditions) out << '"' << c.name << "\"," << (c.pass ? "pass" : "fail") << '\n';
}

}  // namespace hypcon
