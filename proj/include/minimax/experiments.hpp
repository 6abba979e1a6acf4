#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "minimax/bounds.hpp"
#include "minimax/problems.hpp"
#include "minimax/solvers.hpp"

namespace minimax {

/// Iteration budget as a function of n; k defaults to 1.
struct TRule {
  enum class Kind { Const, Linear, Quadratic, SqrtOverD };
  Kind kind = Kind::Const;
  double k = 1.0;

  std::int64_t at(std::int64_t n, int d) const;
};

std::string to_string(TRule::Kind kind);
TRule::Kind t_rule_from_string(const std::string& name);

enum class Measurement { ExcessRisk, GenGapAtOutput, GenGapAtFixedX, EmpOpt, PopStationarity };

std::string to_string(Measurement m);
Measurement measurement_from_string(const std::string& name);

enum class OutputIterate { Average, Last };

struct ExperimentConfig {
  explicit ExperimentConfig(ProblemInstance p) : problem(std::move(p)) {}

  ProblemInstance problem;
  SolverConfig solver;
  std::vector<std::int64_t> n_grid;
  int trials = 1;
  TRule t_rule;
  std::vector<Measurement> measurements;
  std::uint64_t base_seed = 0;
  std::optional<Vec> fixed_x;  // default: the origin
  OutputIterate output = OutputIterate::Average;

  // Bound rows ("bound:<name>") evaluated at each trial's output. Thresholds are
  // reported, not enforced.
  std::vector<std::string> bounds;
  double bound_C = 1.0;
  double bound_delta = 0.05;
  std::int64_t bound_mc_samples = 100000;
  std::optional<BoundInputs> bound_inputs;  // overrides the Monte Carlo estimate

  unsigned threads = 0;  // 0: hardware concurrency
  // Measured run time in the wall_ms column. Off by default so tables are byte-reproducible.
  bool record_wall_time = false;
};

void validate(const ExperimentConfig& config);

struct RateRow {
  std::int64_t n = 0;
  int trial = 0;
  std::string measurement;
  double value = 0;
  std::int64_t T = 0;
  double wall_ms = 0;
  bool diverged = false;
};

struct RateTable {
  std::vector<RateRow> rows;
  int diverged_trials = 0;

  /// Header n,trial,measurement,value,T,wall_ms,diverged; %.17g floats, LF endings.
  std::string to_csv() const;
  static RateTable from_csv(const std::string& text);
};

/// Rows ordered by (n in grid order, trial, measurement in config order, bounds).
/// Dataset of trial i at size n: trial_seed(base_seed, n, i).
RateTable run_experiment(const ExperimentConfig& config);

struct RateFit {
  std::string measurement;
  double slope = 0;
  double intercept = 0;
  double stderr_slope = 0;
  int points_used = 0;
  int points_excluded = 0;          // per-n means below 1e-14
  std::vector<std::int64_t> dropped_n;  // more than 10% divergent trials
  double r_squared = 1;
  std::vector<std::int64_t> n;
  std::vector<double> mean;
  std::vector<double> median;
};

/// OLS of log(mean) on log(n). Throws ConfigError with fewer than 4 usable points.
RateFit fit_rate(const RateTable& table, const std::string& measurement);
/// Same fit on explicit (n, value) pairs.
RateFit fit_power_law(const std::vector<double>& n, const std::vector<double>& values);

struct CoverageResult {
  std::string bound;
  double C = 0;
  double coverage = 0;
  std::vector<std::int64_t> n;
  std::vector<double> per_n;
};

/// Fraction of trials where the named bound dominates the quantity it controls:
///   uniform_gap, lipschitz_gap  |grad Phi(x) - grad Phi_S(x)|
///   pl_gap                      |grad Phi(x)|
///   excess_pl                   Phi(x) - Phi(x*)
/// x is config.fixed_x when set, else the solver output.
CoverageResult coverage_study(const ExperimentConfig& config, const std::string& bound_name,
                              double C, const std::optional<BoundInputs>& inputs = std::nullopt);

unsigned resolve_threads(unsigned requested);

}  // namespace minimax
