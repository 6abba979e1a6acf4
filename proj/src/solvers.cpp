#include "minimax/solvers.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include <fmt/core.h>

#include "minimax/errors.hpp"

namespace minimax {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::ESP:
      return "ESP";
    case Algorithm::GDA:
      return "GDA";
    case Algorithm::SGDA:
      return "SGDA";
    case Algorithm::AGDA:
      return "AGDA";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "ESP") return Algorithm::ESP;
  if (name == "GDA") return Algorithm::GDA;
  if (name == "SGDA") return Algorithm::SGDA;
  if (name == "AGDA") return Algorithm::AGDA;
  throw ConfigError("unknown algorithm '" + name + "' (expected ESP, GDA, SGDA or AGDA)");
}

ResolvedSteps resolve_steps(const SolverConfig& config, const ProblemConstants& k) {
  ResolvedSteps steps;
  steps.t0 = config.t0.value_or(
      static_cast<std::int64_t>(std::ceil(k.beta / std::min(k.mu_x, k.mu_y))));
  if (steps.t0 < 0) throw ConfigError("t0 must be nonnegative");
  switch (config.algorithm) {
    case Algorithm::ESP:
    case Algorithm::GDA: {
      const double ratio = k.beta / k.mu_y + 1.0;
      steps.x = StepSchedule::constant(1.0 / (16.0 * ratio * ratio * k.beta));
      steps.y = StepSchedule::constant(1.0 / k.beta);
      break;
    }
    case Algorithm::SGDA:
      steps.x = StepSchedule::inverse_time(1.0 / k.mu_x, static_cast<double>(steps.t0));
      steps.y = StepSchedule::inverse_time(1.0 / k.mu_y, static_cast<double>(steps.t0));
      break;
    case Algorithm::AGDA:
      if (!(k.mu_x > 0)) throw ConfigError("AGDA requires a positive PL constant mu_x");
      steps.x = StepSchedule::inverse_time(config.agda_cx / k.mu_x, 0.0);
      steps.y = StepSchedule::inverse_time(config.agda_cy / (k.mu_x * k.mu_y * k.mu_y), 0.0);
      break;
  }
  if (config.eta_x) steps.x = StepSchedule::constant(*config.eta_x);
  if (config.eta_y) steps.y = StepSchedule::constant(*config.eta_y);
  if (config.schedule_x) steps.x = *config.schedule_x;
  if (config.schedule_y) steps.y = *config.schedule_y;
  if (!(steps.x.scale > 0) || !(steps.y.scale > 0)) {
    throw ConfigError("step sizes must be positive");
  }
  return steps;
}

namespace {

enum class Update { Simultaneous, Alternating };

void validate(const ProblemInstance& problem, const Dataset& dataset, const SolverConfig& config) {
  if (config.T < 1) throw ConfigError("T must be at least 1");
  if (config.record_every < 1) throw ConfigError("record_every must be at least 1");
  if (dataset.size() == 0) throw ConfigError("empty dataset");
  for (const Sample& s : dataset.samples) {
    if (s.payload.size() != problem.payload_dim()) {
      throw ConfigError("dataset payload does not match the problem");
    }
  }
}

void project(Vec& v, double radius) {
  const double norm = v.norm();
  if (norm > radius) v *= radius / norm;
}

// Shared driver. `pick(t)` yields the objective whose gradient drives step t (F_S for
// GDA, f(.; z_{i_t}) otherwise). The y-gradient is taken at (x_t, y_t) for simultaneous
// and at (x_{t+1}, y_t) for alternating updates.
template <class SampleObjective>
Trajectory drive(const ProblemInstance& problem, const Dataset& dataset,
                 const SolverConfig& config, Update update, SampleObjective&& pick) {
  validate(problem, dataset, config);
  const auto start = std::chrono::steady_clock::now();
  const ProblemConstants k = constants(problem);

  Trajectory traj;
  traj.algorithm = config.algorithm;
  traj.T = config.T;
  traj.steps = resolve_steps(config, k);

  std::optional<PrimalModel> stationarity;
  if (config.record_stationarity) stationarity.emplace(empirical_objective(problem, dataset));

  const int d = problem.dim_x();
  const int dp = problem.dim_y();
  Vec x = Vec::Zero(d);
  Vec y = Vec::Zero(dp);
  Vec x_sum = Vec::Zero(d);
  Vec gx(d);
  Vec gy(dp);
  Vec x_next(d);
  const double guard = 1e6 * std::max(1.0, std::sqrt(k.D_X + k.D_Y));

  for (std::int64_t t = 1; t <= config.T; ++t) {
    if ((t - 1) % config.record_every == 0) {
      IterateRecord rec{t, x, y};
      if (stationarity) rec.grad_phi_s_norm = stationarity->grad(x).norm();
      traj.iterates.push_back(std::move(rec));
    }
    x_sum += x;

    const Objective& f = pick(t);
    const double eta_x = traj.steps.x.at(t);
    const double eta_y = traj.steps.y.at(t);
    gx.noalias() = f.hxx() * x;
    gx.noalias() += f.hxy() * y;
    gx += f.gx();
    x_next = x - eta_x * gx;
    const Vec& x_for_y = update == Update::Simultaneous ? x : x_next;
    gy.noalias() = f.hyx() * x_for_y;
    gy.noalias() += f.hyy() * y;
    gy += f.gy();
    y += eta_y * gy;
    x.swap(x_next);

    if (config.projection) {
      project(x, config.projection->radius_x);
      project(y, config.projection->radius_y);
    }
    const double norm = std::sqrt(x.squaredNorm() + y.squaredNorm());
    if (!std::isfinite(norm) || norm > guard) {
      throw DivergenceError(t, fmt::format("{} diverged at t = {} (|(x, y)| = {})",
                                           to_string(config.algorithm), t, norm));
    }
  }

  traj.x_bar = x_sum / static_cast<double>(config.T);
  traj.final = Point{x, y};
  traj.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return traj;
}

// Per-sample quadratic objectives; f(.; z_i) is quadratic in (x, y) for every family.
std::vector<Objective> per_sample_objectives(const ProblemInstance& problem,
                                             const Dataset& dataset) {
  std::vector<Objective> out;
  out.reserve(dataset.size());
  for (const Sample& s : dataset.samples) {
    out.push_back(objective_from_moments(problem, sample_moments(problem, s)));
  }
  return out;
}

Trajectory run_stochastic(const ProblemInstance& problem, const Dataset& dataset,
                          const SolverConfig& config, Update update) {
  validate(problem, dataset, config);
  const std::vector<Objective> fs = per_sample_objectives(problem, dataset);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> index(0, dataset.size() - 1);
  return drive(problem, dataset, config, update,
               [&](std::int64_t) -> const Objective& { return fs[index(rng)]; });
}

}  // namespace

Trajectory run_gda(const ProblemInstance& problem, const Dataset& dataset,
                   const SolverConfig& config) {
  validate(problem, dataset, config);
  const Objective fs = empirical_objective(problem, dataset);
  SolverConfig cfg = config;
  cfg.algorithm = Algorithm::GDA;
  return drive(problem, dataset, cfg, Update::Simultaneous,
               [&](std::int64_t) -> const Objective& { return fs; });
}

Trajectory run_sgda(const ProblemInstance& problem, const Dataset& dataset,
                    const SolverConfig& config) {
  SolverConfig cfg = config;
  cfg.algorithm = Algorithm::SGDA;
  return run_stochastic(problem, dataset, cfg, Update::Simultaneous);
}

Trajectory run_agda(const ProblemInstance& problem, const Dataset& dataset,
                    const SolverConfig& config) {
  SolverConfig cfg = config;
  cfg.algorithm = Algorithm::AGDA;
  return run_stochastic(problem, dataset, cfg, Update::Alternating);
}

SaddlePoint run_esp(const ProblemInstance& problem, const Dataset& dataset, double tol) {
  SaddlePoint sp = empirical_saddle(problem, dataset, tol);
  if (!(sp.grad_residual <= tol)) {
    throw RuntimeFailure(
        fmt::format("ESP residual {} exceeds tolerance {}", sp.grad_residual, tol));
  }
  return sp;
}

Trajectory run_solver(const ProblemInstance& problem, const Dataset& dataset,
                      const SolverConfig& config) {
  switch (config.algorithm) {
    case Algorithm::GDA:
      return run_gda(problem, dataset, config);
    case Algorithm::SGDA:
      return run_sgda(problem, dataset, config);
    case Algorithm::AGDA:
      return run_agda(problem, dataset, config);
    case Algorithm::ESP: {
      const auto start = std::chrono::steady_clock::now();
      const SaddlePoint sp = run_esp(problem, dataset, config.tol);
      Trajectory traj;
      traj.algorithm = Algorithm::ESP;
      traj.T = 0;
      traj.iterates.push_back(IterateRecord{0, sp.point.x, sp.point.y});
      traj.x_bar = sp.point.x;
      traj.final = sp.point;
      traj.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               start)
                         .count();
      return traj;
    }
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace minimax
