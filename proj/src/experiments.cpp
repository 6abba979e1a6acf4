#include "minimax/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "minimax/errors.hpp"
#include "minimax/oracles.hpp"
#include "parallel.hpp"

namespace minimax {

std::int64_t TRule::at(std::int64_t n, int d) const {
  const double nn = static_cast<double>(n);
  double t = 0;
  switch (kind) {
    case Kind::Const:
      t = k;
      break;
    case Kind::Linear:
      t = k * nn;
      break;
    case Kind::Quadratic:
      t = k * nn * nn;
      break;
    case Kind::SqrtOverD:
      t = k * std::sqrt(nn / d);
      break;
  }
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(t)));
}

std::string to_string(TRule::Kind kind) {
  switch (kind) {
    case TRule::Kind::Const:
      return "const";
    case TRule::Kind::Linear:
      return "linear";
    case TRule::Kind::Quadratic:
      return "quadratic";
    case TRule::Kind::SqrtOverD:
      return "sqrt_over_d";
  }
  return "?";
}

TRule::Kind t_rule_from_string(const std::string& name) {
  if (name == "const") return TRule::Kind::Const;
  if (name == "linear") return TRule::Kind::Linear;
  if (name == "quadratic") return TRule::Kind::Quadratic;
  if (name == "sqrt_over_d") return TRule::Kind::SqrtOverD;
  throw ConfigError("unknown T rule '" + name + "' (expected const, linear, quadratic, sqrt_over_d)");
}

std::string to_string(Measurement m) {
  switch (m) {
    case Measurement::ExcessRisk:
      return "excess_risk";
    case Measurement::GenGapAtOutput:
      return "gen_gap_at_output";
    case Measurement::GenGapAtFixedX:
      return "gen_gap_at_fixed_x";
    case Measurement::EmpOpt:
      return "emp_opt";
    case Measurement::PopStationarity:
      return "pop_stationarity";
  }
  return "?";
}

Measurement measurement_from_string(const std::string& name) {
  for (Measurement m : {Measurement::ExcessRisk, Measurement::GenGapAtOutput,
                        Measurement::GenGapAtFixedX, Measurement::EmpOpt,
                        Measurement::PopStationarity}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown measurement '" + name + "'");
}

namespace {

const std::vector<std::string> kBoundNames = {"uniform_gap", "pl_gap", "excess_pl", "lipschitz_gap"};

std::uint64_t solver_seed(std::uint64_t dataset_seed) {
  return trial_seed(dataset_seed, -1, 0);
}

BoundInputs resolve_bound_inputs(const ExperimentConfig& config,
                                 const std::optional<BoundInputs>& override_inputs, double C) {
  BoundInputs in;
  if (override_inputs) {
    in = *override_inputs;
  } else if (config.bound_inputs) {
    in = *config.bound_inputs;
  } else {
    in = estimate_inputs(config.problem, config.bound_mc_samples, config.base_seed ^ 0xb0b0b0b0ULL);
  }
  in.C = C;
  in.delta = config.bound_delta;
  return in;
}

// One trial's shared state: the dataset, the solver output and both primal models.
struct TrialState {
  std::int64_t T = 0;
  double wall_ms = 0;
  bool diverged = false;
  Vec x_out;
  std::optional<PrimalModel> emp;
};

TrialState run_trial(const ExperimentConfig& config, std::int64_t n, int trial) {
  const ProblemInstance& problem = config.problem;
  const Dataset ds =
      sample_dataset(problem, static_cast<std::size_t>(n), trial_seed(config.base_seed, n, trial));
  SolverConfig cfg = config.solver;
  cfg.T = cfg.algorithm == Algorithm::ESP ? 1 : config.t_rule.at(n, problem.dim_x());
  cfg.seed = solver_seed(ds.seed);

  TrialState st;
  st.T = cfg.algorithm == Algorithm::ESP ? 0 : cfg.T;
  try {
    const Trajectory traj = run_solver(problem, ds, cfg);
    st.wall_ms = traj.wall_ms;
    st.x_out = config.output == OutputIterate::Average ? traj.x_bar : traj.final.x;
  } catch (const DivergenceError&) {
    st.diverged = true;
    return st;
  }
  st.emp.emplace(empirical_objective(problem, ds));
  return st;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void validate(const ExperimentConfig& config) {
  if (config.n_grid.empty()) throw ConfigError("n_grid must not be empty");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    if (config.n_grid[i] < 1) throw ConfigError("n_grid entries must be positive");
    if (i > 0 && config.n_grid[i] <= config.n_grid[i - 1]) {
      throw ConfigError("n_grid must be strictly increasing");
    }
  }
  if (config.trials < 1) throw ConfigError("trials must be positive");
  if (!(config.t_rule.k > 0)) throw ConfigError("T rule constant k must be positive");
  if (config.measurements.empty() && config.bounds.empty()) {
    throw ConfigError("nothing to measure");
  }
  if (config.fixed_x && config.fixed_x->size() != config.problem.dim_x()) {
    throw ConfigError("fixed_x has the wrong dimension");
  }
  for (const std::string& b : config.bounds) {
    if (std::find(kBoundNames.begin(), kBoundNames.end(), b) == kBoundNames.end()) {
      throw ConfigError("unknown bound '" + b + "'");
    }
    if (b == "uniform_gap" && config.n_grid.front() < 2) {
      throw ConfigError("uniform_gap rows need n >= 2");
    }
  }
}

RateTable run_experiment(const ExperimentConfig& config) {
  validate(config);
  const ProblemInstance& problem = config.problem;
  const PrimalModel pop(population_objective(problem));
  const Vec x_star = pop.minimizer();
  const Vec fixed_x = config.fixed_x.value_or(Vec::Zero(problem.dim_x()));
  std::optional<BoundInputs> inputs;
  if (!config.bounds.empty()) inputs = resolve_bound_inputs(config, std::nullopt, config.bound_C);

  const std::size_t per_n = static_cast<std::size_t>(config.trials);
  const std::size_t tasks = config.n_grid.size() * per_n;
  std::vector<std::vector<RateRow>> results(tasks);
  std::vector<char> diverged(tasks, 0);

  detail::parallel_for(tasks, resolve_threads(config.threads), [&](std::size_t task) {
    const std::int64_t n = config.n_grid[task / per_n];
    const int trial = static_cast<int>(task % per_n);
    const TrialState st = run_trial(config, n, trial);
    std::vector<RateRow>& rows = results[task];
    const double wall = config.record_wall_time ? st.wall_ms : 0.0;
    auto emit = [&](std::string name, double v) {
      rows.push_back(RateRow{n, trial, std::move(name), v, st.T, wall, st.diverged});
    };
    if (st.diverged) {
      diverged[task] = 1;
      for (Measurement m : config.measurements) emit(to_string(m), std::nan(""));
      for (const std::string& b : config.bounds) emit("bound:" + b, std::nan(""));
      return;
    }
    const PrimalModel& emp = *st.emp;
    for (Measurement m : config.measurements) {
      double v = 0;
      switch (m) {
        case Measurement::ExcessRisk:
          v = excess_primal_risk(pop, x_star, st.x_out);
          break;
        case Measurement::GenGapAtOutput:
          v = generalization_gap(pop, emp, st.x_out).gap;
          break;
        case Measurement::GenGapAtFixedX:
          v = generalization_gap(pop, emp, fixed_x).gap;
          break;
        case Measurement::EmpOpt:
          v = excess_primal_risk(emp, emp.minimizer(), st.x_out);
          break;
        case Measurement::PopStationarity:
          v = pop.grad(st.x_out).norm();
          break;
      }
      emit(to_string(m), v);
    }
    for (const std::string& b : config.bounds) {
      const double emp_grad = emp.grad(st.x_out).norm();
      double v = 0;
      if (b == "uniform_gap") v = eval_uniform_gap(*inputs, n, (st.x_out - x_star).norm()).value;
      if (b == "pl_gap") v = eval_pl_gap(*inputs, n, emp_grad, false).value;
      if (b == "excess_pl") v = eval_excess_pl(*inputs, n, emp_grad, false).value;
      if (b == "lipschitz_gap") v = eval_lipschitz_gap(inputs->constants, n).value;
      emit("bound:" + b, v);
    }
  });

  RateTable table;
  for (std::size_t task = 0; task < tasks; ++task) {
    table.diverged_trials += diverged[task];
    for (RateRow& r : results[task]) table.rows.push_back(std::move(r));
  }
  return table;
}

std::string RateTable::to_csv() const {
  std::string out = "n,trial,measurement,value,T,wall_ms,diverged\n";
  for (const RateRow& r : rows) {
    out += fmt::format("{},{},{},{:.17g},{},{:.17g},{}\n", r.n, r.trial, r.measurement, r.value,
                       r.T, r.wall_ms, r.diverged ? 1 : 0);
  }
  return out;
}

RateTable RateTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "n,trial,measurement,value,T,wall_ms,diverged") {
    throw ConfigError("rate table: missing or unexpected CSV header");
  }
  RateTable table;
  std::map<std::pair<std::int64_t, int>, bool> trial_diverged;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw ConfigError(fmt::format("rate table line {}: expected 7 fields", lineno));
    try {
      RateRow r;
      r.n = std::stoll(cells[0]);
      r.trial = std::stoi(cells[1]);
      r.measurement = cells[2];
      r.value = std::strtod(cells[3].c_str(), nullptr);
      r.T = std::stoll(cells[4]);
      r.wall_ms = std::strtod(cells[5].c_str(), nullptr);
      r.diverged = cells[6] == "1";
      trial_diverged[{r.n, r.trial}] = trial_diverged[{r.n, r.trial}] || r.diverged;
      table.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError(fmt::format("rate table line {}: malformed number", lineno));
    }
  }
  for (const auto& [_, d] : trial_diverged) table.diverged_trials += d ? 1 : 0;
  return table;
}

namespace {

void ols(RateFit& fit, const std::vector<double>& lx, const std::vector<double>& ly) {
  const int m = static_cast<int>(lx.size());
  if (m < 4) {
    throw ConfigError(fmt::format("rate fit needs at least 4 usable grid points, got {}", m));
  }
  double mx = 0, my = 0;
  for (int i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0)) throw ConfigError("rate fit needs at least two distinct n");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (int i = 0; i < m; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    ssr += r * r;
  }
  fit.points_used = m;
  fit.stderr_slope = std::sqrt(ssr / (m - 2) / sxx);
  fit.r_squared = syy > 0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
}

}  // namespace

RateFit fit_power_law(const std::vector<double>& n, const std::vector<double>& values) {
  if (n.size() != values.size()) throw ConfigError("fit: n and values differ in length");
  RateFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0)) throw ConfigError("fit: n must be positive");
    if (!(values[i] >= 1e-14) || !std::isfinite(values[i])) {
      ++fit.points_excluded;
      continue;
    }
    lx.push_back(std::log(n[i]));
    ly.push_back(std::log(values[i]));
  }
  ols(fit, lx, ly);
  return fit;
}

RateFit fit_rate(const RateTable& table, const std::string& measurement) {
  std::map<std::int64_t, std::vector<double>> values;
  std::map<std::int64_t, int> total, diverged;
  for (const RateRow& r : table.rows) {
    if (r.measurement != measurement) continue;
    ++total[r.n];
    if (r.diverged || !std::isfinite(r.value)) {
      ++diverged[r.n];
    } else {
      values[r.n].push_back(r.value);
    }
  }
  if (total.empty()) throw ConfigError("no rows for measurement '" + measurement + "'");

  RateFit fit;
  fit.measurement = measurement;
  std::vector<double> lx, ly;
  for (const auto& [n, count] : total) {
    if (diverged[n] * 10 > count || values[n].empty()) {
      fit.dropped_n.push_back(n);
      continue;
    }
    const std::vector<double>& v = values[n];
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    fit.n.push_back(n);
    fit.mean.push_back(mean);
    fit.median.push_back(median_of(v));
    if (!(mean >= 1e-14)) {
      ++fit.points_excluded;
      continue;
    }
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(mean));
  }
  ols(fit, lx, ly);
  return fit;
}

CoverageResult coverage_study(const ExperimentConfig& config, const std::string& bound_name,
                              double C, const std::optional<BoundInputs>& inputs_override) {
  {
    // The studied bound is the measurement; the config need not list any.
    ExperimentConfig checked = config;
    if (checked.measurements.empty() && checked.bounds.empty()) checked.bounds = {bound_name};
    validate(checked);
  }
  if (std::find(kBoundNames.begin(), kBoundNames.end(), bound_name) == kBoundNames.end()) {
    throw ConfigError("unknown bound '" + bound_name + "'");
  }
  if (!(C >= 0)) throw ConfigError("C must be nonnegative");
  const ProblemInstance& problem = config.problem;
  const PrimalModel pop(population_objective(problem));
  const Vec x_star = pop.minimizer();
  const BoundInputs in = resolve_bound_inputs(config, inputs_override, C);

  const std::size_t per_n = static_cast<std::size_t>(config.trials);
  const std::size_t tasks = config.n_grid.size() * per_n;
  std::vector<char> covered(tasks, 0);
  std::vector<char> counted(tasks, 0);

  detail::parallel_for(tasks, resolve_threads(config.threads), [&](std::size_t task) {
    const std::int64_t n = config.n_grid[task / per_n];
    const int trial = static_cast<int>(task % per_n);
    const TrialState st = run_trial(config, n, trial);
    if (st.diverged) return;
    counted[task] = 1;
    const PrimalModel& emp = *st.emp;
    const Vec x = config.fixed_x.value_or(st.x_out);
    double bound = 0, measured = 0;
    if (bound_name == "uniform_gap" || bound_name == "lipschitz_gap") {
      measured = generalization_gap(pop, emp, x).gap;
      bound = bound_name == "uniform_gap" ? eval_uniform_gap(in, n, (x - x_star).norm()).value
                                       : eval_lipschitz_gap(in.constants, n).value;
    } else if (bound_name == "pl_gap") {
      measured = pop.grad(x).norm();
      bound = eval_pl_gap(in, n, emp.grad(x).norm(), false).value;
    } else {
      measured = excess_primal_risk(pop, x_star, x);
      bound = eval_excess_pl(in, n, emp.grad(x).norm(), false).value;
    }
    covered[task] = bound >= measured ? 1 : 0;
  });

  CoverageResult result;
  result.bound = bound_name;
  result.C = C;
  int hits = 0, count = 0;
  for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
    int h = 0, c = 0;
    for (std::size_t i = 0; i < per_n; ++i) {
      h += covered[g * per_n + i];
      c += counted[g * per_n + i];
    }
    result.n.push_back(config.n_grid[g]);
    result.per_n.push_back(c > 0 ? static_cast<double>(h) / c : std::nan(""));
    hits += h;
    count += c;
  }
  result.coverage = count > 0 ? static_cast<double>(hits) / count : std::nan("");
  return result;
}

}  // namespace minimax
