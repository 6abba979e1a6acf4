#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "minimax/problems.hpp"

namespace minimax {

/// Gradient moments at the population saddle plus the constants every bound consumes.
struct BoundInputs {
  double e_gx2 = 0;     // E|grad_x f(x*, y*; z)|^2
  double e_gy2 = 0;     // E|grad_y f(x*, y*; z)|^2
  double B_x_star = 0;  // Bernstein constants
  double B_y_star = 0;
  double sigma2 = 0;    // sup of E|grad f(w; z) - grad F(w)|^2 over probed w
  double C = 1.0;       // absolute constant of the localization term
  double delta = 0.05;
  ProblemConstants constants;

  // Monte Carlo diagnostics, unset when the inputs were supplied directly.
  std::int64_t mc_samples = 0;
  double e_gx2_stderr = 0;
  double e_gy2_stderr = 0;
  std::optional<double> analytic_e_gx2;
  std::optional<double> analytic_e_gy2;
};

struct BoundReport {
  std::string name;
  double value = 0;
  std::vector<std::pair<std::string, double>> terms;
  std::int64_t n = 0;
  double x_dist = 0;
  // Sample-size-conditioned bounds only.
  std::optional<std::int64_t> n_min;
  bool threshold_ok = true;
};

/// Moments by Monte Carlo at (x*, y*); B constants are the largest observed
/// gradient norms there (valid for bounded noise).
BoundInputs estimate_inputs(const ProblemInstance& problem, std::int64_t mc_samples,
                            std::uint64_t seed);

/// Closed-form E|grad_x f|^2, E|grad_y f|^2 at the saddle where the family allows it.
std::optional<std::pair<double, double>> analytic_moments(const ProblemInstance& problem);

/// Uniform gradient-gap bound: moment terms plus the localization term
/// C beta (mu_y + beta)^2 / mu_y^2 max{|x - x*|, 1/n} (sqrt(K/n) + K/n),
/// K = d + log(16 log2(sqrt(2) R1 n + 1) / delta).
BoundReport eval_uniform_gap(const BoundInputs& inputs, std::int64_t n, double x_dist);

/// Dimension-free gradient-gap bound under the x-side PL condition. Throws
/// ThresholdError below sample_size_threshold unless enforce_threshold is false.
BoundReport eval_pl_gap(const BoundInputs& inputs, std::int64_t n, double emp_grad_norm,
                          bool enforce_threshold = true);

/// Excess primal risk bound derived from eval_pl_gap.
BoundReport eval_excess_pl(const BoundInputs& inputs, std::int64_t n, double emp_grad_norm,
                           bool enforce_threshold = true);

/// Order-only comparison L (mu_y + beta) / mu_y sqrt(d / n) times `tilde_constant`.
BoundReport eval_lipschitz_gap(const ProblemConstants& constants, std::int64_t n,
                       double tilde_constant = 1.0);

/// c = max(16 C^2, 1).
double threshold_constant(double C);

/// Right-hand side of the sample-size condition, evaluated at n.
double threshold_rhs(const BoundInputs& inputs, double n);

/// Smallest integer n with n >= threshold_rhs(n).
std::int64_t sample_size_threshold(const BoundInputs& inputs);

struct CalibrationOptions {
  std::optional<Vec> fixed_x;  // default: the origin
  double delta = 0.05;
  std::int64_t mc_samples = 100000;
  std::uint64_t mc_seed = 0x5eed;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Smallest C such that eval_uniform_gap dominates the measured gap in at least
/// target_coverage of the trials at every grid n. Trial i at size n uses the
/// dataset seed trial_seed(seed, n, i), so seed = 1 with 10 trials covers
/// seeds 1..10.
double calibrate_constant(const ProblemInstance& problem, const std::vector<std::int64_t>& n_grid,
                          int trials, double target_coverage, std::uint64_t seed,
                          const CalibrationOptions& options = {});

/// Dataset seed of trial `trial` at sample size n: a hash of (n, base_seed + trial).
std::uint64_t trial_seed(std::uint64_t base_seed, std::int64_t n, std::int64_t trial);

}  // namespace minimax
