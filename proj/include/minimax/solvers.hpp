#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "minimax/oracles.hpp"
#include "minimax/problems.hpp"

namespace minimax {

enum class Algorithm { ESP, GDA, SGDA, AGDA };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

/// eta(t) = scale for a constant schedule, scale / (t + offset) otherwise.
struct StepSchedule {
  double scale = 0;
  double offset = 0;
  bool decaying = false;

  double at(std::int64_t t) const { return decaying ? scale / (static_cast<double>(t) + offset) : scale; }

  static StepSchedule constant(double eta) { return {eta, 0, false}; }
  static StepSchedule inverse_time(double scale, double offset) { return {scale, offset, true}; }
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::GDA;
  std::int64_t T = 1000;
  // Explicit constant step sizes; unset means the published default for the algorithm.
  std::optional<double> eta_x;
  std::optional<double> eta_y;
  // Full schedule overrides, taking precedence over eta_x / eta_y.
  std::optional<StepSchedule> schedule_x;
  std::optional<StepSchedule> schedule_y;
  // SGDA offset; default ceil(beta / min(mu_x, mu_y)).
  std::optional<std::int64_t> t0;
  // Proportionality constants of the AGDA schedules.
  double agda_cx = 1.0;
  double agda_cy = 1.0;
  std::uint64_t seed = 0;
  std::optional<DomainRadii> projection;
  std::int64_t record_every = 1;
  bool record_stationarity = false;
  // ESP solve tolerance.
  double tol = 1e-10;
};

struct ResolvedSteps {
  StepSchedule x;
  StepSchedule y;
  std::int64_t t0 = 0;
};

/// Published step-size schedules:
///   GDA   eta_x = 1/(16 (beta/mu_y + 1)^2 beta), eta_y = 1/beta
///   SGDA  eta_x,t = 1/(mu_x (t + t0)),           eta_y,t = 1/(mu_y (t + t0))
///   AGDA  eta_x,t = cx/(mu_x t),                  eta_y,t = cy/(mu_x mu_y^2 t)
ResolvedSteps resolve_steps(const SolverConfig& config, const ProblemConstants& k);

struct IterateRecord {
  std::int64_t t = 0;
  Vec x;
  Vec y;
  double grad_phi_s_norm = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
  Algorithm algorithm = Algorithm::GDA;
  std::int64_t T = 0;
  ResolvedSteps steps;
  /// (t, x_t, y_t) for t = 1, 1 + stride, ... <= T.
  std::vector<IterateRecord> iterates;
  /// (1/T) sum_{t=1}^T x_t over every iterate, independent of the record stride.
  Vec x_bar;
  /// (x_{T+1}, y_{T+1}).
  Point final;
  double wall_ms = 0;
};

/// Full-batch simultaneous two-timescale GDA from (0, 0).
Trajectory run_gda(const ProblemInstance& problem, const Dataset& dataset,
                   const SolverConfig& config);
/// Single-sample simultaneous SGDA; the index stream is a pure function of config.seed.
Trajectory run_sgda(const ProblemInstance& problem, const Dataset& dataset,
                    const SolverConfig& config);
/// Single-sample alternating GDA: the y-step reads x_{t+1}.
Trajectory run_agda(const ProblemInstance& problem, const Dataset& dataset,
                    const SolverConfig& config);
/// Empirical saddle point; throws RuntimeFailure if the residual exceeds tol.
SaddlePoint run_esp(const ProblemInstance& problem, const Dataset& dataset, double tol);

/// Dispatch on config.algorithm; ESP yields a one-record trajectory at the saddle.
Trajectory run_solver(const ProblemInstance& problem, const Dataset& dataset,
                      const SolverConfig& config);

}  // namespace minimax
