// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../support.hpp"
#include "minimax/bounds.hpp"
#include "minimax/errors.hpp"
#include "minimax/experiments.hpp"
#include "minimax/oracles.hpp"
#include "minimax/solvers.hpp"

using namespace minimax;
using namespace minimax::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Central differences of a scalar function of a stacked vector.
Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& w, double h = 1e-6) {
  Vec g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Vec p = w, m = w;
    p(i) += h;
    m(i) -= h;
    g(i) = (f(p) - f(m)) / (2 * h);
  }
  return g;
}

double rel_err(const Vec& approx, const Vec& exact) {
  return (approx - exact).norm() / std::max(1.0, exact.norm());
}

ProblemInstance random_family(std::mt19937_64& rng, int family) {
  if (family == 0) return random_q(rng);
  if (family == 1) return random_p(rng);
  return random_i(rng);
}

// 1. Analytic per-sample and primal gradients against central differences.
Outcome gradient_oracles() {
  std::mt19937_64 rng(101);
  double worst_f = 0, worst_phi = 0;
  for (int family = 0; family < 3; ++family) {
    for (int probe = 0; probe < 100; ++probe) {
      const ProblemInstance problem = random_family(rng, family);
      const int d = problem.dim_x(), dp = problem.dim_y();
      SampleStream stream(problem, rng());
      const Sample z = stream.next();
      const Vec w = gaussian_vec(rng, d + dp);
      auto f = [&](const Vec& v) { return value(problem, Point{v.head(d), v.tail(dp)}, z); };
      const Gradient g = grad(problem, Point{w.head(d), w.tail(dp)}, z);
      Vec exact(d + dp);
      exact << g.gx, g.gy;
      worst_f = std::max(worst_f, rel_err(central_diff(f, w), exact));

      const Dataset ds = sample_dataset(problem, 20, rng());
      const PrimalModel model(probe % 2 ? population_objective(problem)
                                        : empirical_objective(problem, ds));
      const Vec x = gaussian_vec(rng, d);
      auto phi = [&](const Vec& v) { return model.value(v); };
      worst_phi = std::max(worst_phi, rel_err(central_diff(phi, x), model.grad(x)));
    }
  }
  return {worst_f <= 1e-6 && worst_phi <= 1e-6,
          fmt::format("300 probes, max rel err grad f {:.2e}, grad Phi {:.2e}", worst_f, worst_phi)};
}

// 2. y*-Lipschitz, primal smoothness, primal PL and self-bounding on 1000 probes each.
Outcome primal_certificates() {
  std::mt19937_64 rng(202);
  const double slack = 1e-9;
  double lip_excess = -1e300, smooth_excess = -1e300, pl_excess = -1e300, sb_excess = -1e300;
  for (int probe = 0; probe < 1000; ++probe) {
    const ProblemInstance problem = random_family(rng, probe % 3);
    const ProblemConstants k = constants(problem);
    const Dataset ds = sample_dataset(problem, 10, rng());
    const PrimalModel model(probe % 2 ? population_objective(problem)
                                      : empirical_objective(problem, ds));
    const Vec x1 = gaussian_vec(rng, problem.dim_x(), 2.0);
    const Vec x2 = gaussian_vec(rng, problem.dim_x(), 2.0);
    const double dx = (x1 - x2).norm();
    lip_excess = std::max(
        lip_excess, (model.y_star(x1) - model.y_star(x2)).norm() / dx - k.beta / k.mu_y);
    smooth_excess = std::max(smooth_excess, (model.grad(x1) - model.grad(x2)).norm() / dx -
                                                (k.beta + k.beta * k.beta / k.mu_y));
  }
  for (int probe = 0; probe < 1000; ++probe) {
    const ProblemInstance problem = probe % 2 ? random_q(rng) : random_p(rng);
    const ProblemConstants k = constants(problem);
    const PrimalModel pop(population_objective(problem));
    const Vec x_star = pop.minimizer();
    const Vec x = gaussian_vec(rng, problem.dim_x(), 2.0);
    const double gap = excess_primal_risk(pop, x_star, x);
    pl_excess = std::max(pl_excess, gap - pop.grad(x).squaredNorm() / (2 * k.mu_x));
  }
  for (int probe = 0; probe < 1000; ++probe) {
    const int m = uniform_int(rng, 1, 5), d = uniform_int(rng, 1, 5);
    const LeastSquaresLoss h{gaussian_mat(rng, m, d), gaussian_vec(rng, m)};
    const Vec w = gaussian_vec(rng, d, 2.0);
    sb_excess = std::max(sb_excess,
                         h.grad(w).norm() - std::sqrt(4 * h.smoothness() * h.value(w)));
  }
  const bool ok = lip_excess <= slack && smooth_excess <= slack && pl_excess <= slack &&
                  sb_excess <= slack;
  return {ok, fmt::format("worst excess over limit: y* Lipschitz {:.2e}, primal smoothness "
                          "{:.2e}, primal PL {:.2e}, self-bounding {:.2e}",
                          lip_excess, smooth_excess, pl_excess, sb_excess)};
}

// 3. GDA average squared stationarity against 128 b^3 dPhi/(mu_y^2 T) + 5 b^3 D_Y/(mu_y T).
Outcome gda_verbatim_bound() {
  std::mt19937_64 rng(303);
  double worst_ratio = 0;
  for (int inst = 0; inst < 10; ++inst) {
    const ProblemInstance problem = random_q(rng, 1.0);
    const ProblemConstants k = constants(problem);
    const Dataset ds = sample_dataset(problem, 100, rng());
    SolverConfig cfg;
    cfg.algorithm = Algorithm::GDA;
    cfg.T = 1000;
    cfg.record_stationarity = true;
    const Trajectory traj = run_gda(problem, ds, cfg);
    double lhs = 0;
    for (const IterateRecord& r : traj.iterates) lhs += r.grad_phi_s_norm * r.grad_phi_s_norm;
    lhs /= static_cast<double>(cfg.T);
    const PrimalModel emp(empirical_objective(problem, ds));
    const double delta_phi = excess_primal_risk(emp, emp.minimizer(), Vec::Zero(problem.dim_x()));
    const double b3 = k.beta * k.beta * k.beta;
    const double rhs = 128 * b3 * delta_phi / (k.mu_y * k.mu_y * cfg.T) +
                       5 * b3 * k.D_Y / (k.mu_y * cfg.T);
    worst_ratio = std::max(worst_ratio, lhs / rhs);
  }
  return {worst_ratio <= 1.0,
          fmt::format("10 instances, T = 1000, max lhs/rhs = {:.4f}", worst_ratio)};
}

ExperimentConfig esp_q_config(int trials, Measurement m) {
  ExperimentConfig cfg(q_example(1.0));
  cfg.solver.algorithm = Algorithm::ESP;
  for (int e = 7; e <= 13; ++e) cfg.n_grid.push_back(std::int64_t{1} << e);
  cfg.trials = trials;
  cfg.measurements = {m};
  cfg.base_seed = 4242;
  return cfg;
}

// 4. Mean gap at a fixed x decays like n^{-1/2}.
Outcome gap_decay() {
  const RateTable table = run_experiment(esp_q_config(200, Measurement::GenGapAtFixedX));
  const RateFit fit = fit_rate(table, "gen_gap_at_fixed_x");
  return {fit.slope >= -0.65 && fit.slope <= -0.35,
          fmt::format("slope {:.4f} +- {:.4f} (target [-0.65, -0.35]), r^2 {:.4f}", fit.slope,
                      fit.stderr_slope, fit.r_squared)};
}

// 5. ESP excess primal risk decays like 1/n when Phi(x*) = Theta(1).
Outcome esp_slow_rate() {
  const RateTable table = run_experiment(esp_q_config(50, Measurement::ExcessRisk));
  const RateFit fit = fit_rate(table, "excess_risk");
  return {fit.slope >= -1.3 && fit.slope <= -0.7,
          fmt::format("slope {:.4f} +- {:.4f} (target [-1.3, -0.7]), r^2 {:.4f}", fit.slope,
                      fit.stderr_slope, fit.r_squared)};
}

// 6. Low-noise regime: gradient noise vanishes at the saddle but not elsewhere
// (curvature-only noise of the anchored family); GDA with T = n^2.
Outcome fast_rate() {
  Vec x0(2), y0(2);
  x0 << 1.0, -0.5;
  y0 << 0.5, 0.5;
  const ProblemInstance problem = make_i(2, 2, x0, y0, 1.0, 0.5, Mat::Identity(2, 2), 3, 0.0);
  ExperimentConfig cfg(problem);
  cfg.solver.algorithm = Algorithm::GDA;
  cfg.t_rule = {TRule::Kind::Quadratic, 1.0};
  for (int e = 7; e <= 10; ++e) cfg.n_grid.push_back(std::int64_t{1} << e);
  cfg.trials = 10;
  cfg.measurements = {Measurement::ExcessRisk};
  cfg.bounds = {"excess_pl"};
  cfg.base_seed = 6;
  const RateTable table = run_experiment(cfg);
  const RateFit fit = fit_rate(table, "excess_risk");

  // Property form: measured risk below the excess-risk bound in each trial.
  int covered = 0, total = 0;
  for (std::size_t i = 0; i + 1 < table.rows.size(); i += 2) {
    ++total;
    covered += table.rows[i].value <= table.rows[i + 1].value ? 1 : 0;
  }
  return {fit.slope <= -1.6,
          fmt::format("slope {:.4f} +- {:.4f} (target <= -1.6); risk <= excess-risk bound in "
                      "{}/{} trials",
                      fit.slope, fit.stderr_slope, covered, total)};
}

// Independent transcription of the three bound formulas.
struct Transcribed {
  double uniform, pl, excess;
};

Transcribed transcribe(double egx, double egy, double bx, double by, double C, double delta,
                       double beta, double mux, double muy, double d, double r1, double n,
                       double xdist, double g) {
  const double lg = std::log(8 / delta);
  const double kk = d + std::log(16 * std::log(std::sqrt(2.0) * r1 * n + 1) / std::log(2.0) / delta);
  const double t1 = beta / muy * (std::sqrt(2 * egy * lg / n) + by * lg / n) +
                    std::sqrt(2 * egx * lg / n) + bx * lg / n +
                    C * beta * std::pow(muy + beta, 2) / std::pow(muy, 2) *
                        std::max(xdist, 1 / n) * (std::sqrt(kk / n) + kk / n);
  const double t3 = g + 2 * std::sqrt(2 * egx * lg / n) + 2 * bx * lg / n + mux / n +
                    2 * beta / muy * (std::sqrt(2 * egy * lg / n) + by * lg / n);
  const double inner = 2 * beta * by * lg / muy + 2 * bx * lg + mux;
  const double ex = 8 * g * g / mux + 16 * egx * lg / (mux * n) +
                    16 * beta * beta * egy * lg / (mux * muy * muy * n) +
                    2 * inner * inner / (mux * n * n);
  return {t1, t3, ex};
}

// 7. Bound evaluators against the second transcription on 50 random inputs.
Outcome bound_equivalence() {
  std::mt19937_64 rng(707);
  double worst = 0;
  for (int probe = 0; probe < 50; ++probe) {
    BoundInputs in;
    in.e_gx2 = uniform(rng, 0, 5);
    in.e_gy2 = uniform(rng, 0, 5);
    in.B_x_star = uniform(rng, 0, 3);
    in.B_y_star = uniform(rng, 0, 3);
    in.C = uniform(rng, 0.1, 3);
    in.delta = uniform(rng, 0.01, 0.5);
    in.constants.mu_y = uniform(rng, 0.2, 2);
    in.constants.beta = in.constants.mu_y * uniform(rng, 1, 4);
    in.constants.mu_x = uniform(rng, 0.1, 1) * in.constants.beta;
    in.constants.d = uniform_int(rng, 1, 20);
    in.constants.R1 = uniform(rng, 0.5, 20);
    const auto n = static_cast<std::int64_t>(std::exp(uniform(rng, std::log(2.0), std::log(1e6))));
    const double xdist = uniform(rng, 0, 3);
    const double g = uniform(rng, 0, 2);
    const ProblemConstants& k = in.constants;
    const Transcribed t = transcribe(in.e_gx2, in.e_gy2, in.B_x_star, in.B_y_star, in.C, in.delta,
                                     k.beta, k.mu_x, k.mu_y, k.d, k.R1, static_cast<double>(n),
                                     xdist, g);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    worst = std::max(worst, rel(eval_uniform_gap(in, n, xdist).value, t.uniform));
    worst = std::max(worst, rel(eval_pl_gap(in, n, g, false).value, t.pl));
    worst = std::max(worst, rel(eval_excess_pl(in, n, g, false).value, t.excess));
  }
  return {worst <= 1e-10, fmt::format("50 inputs x 3 formulas, max rel diff {:.2e}", worst)};
}

// 8. Calibrate C on seeds 1..10, check coverage on seeds 11..20 at every n.
Outcome bound_domination() {
  const ProblemInstance problem = q_example(1.0);
  const std::vector<std::int64_t> grid = {128, 512, 2048, 8192};
  CalibrationOptions opt;
  opt.delta = 0.05;
  const double C = calibrate_constant(problem, grid, 10, 0.95, 1, opt);
  ExperimentConfig cfg(problem);
  cfg.solver.algorithm = Algorithm::ESP;
  cfg.n_grid = grid;
  cfg.trials = 10;
  cfg.measurements = {Measurement::GenGapAtFixedX};
  cfg.fixed_x = Vec::Zero(2);
  cfg.base_seed = 11;
  cfg.bound_delta = opt.delta;
  const BoundInputs in = estimate_inputs(problem, opt.mc_samples, opt.mc_seed);
  const CoverageResult cov = coverage_study(cfg, "uniform_gap", C, in);
  double worst = 1;
  std::string per_n;
  for (std::size_t i = 0; i < cov.n.size(); ++i) {
    worst = std::min(worst, cov.per_n[i]);
    per_n += fmt::format(" n={}:{:.2f}", cov.n[i], cov.per_n[i]);
  }
  return {worst >= 0.90, fmt::format("calibrated C = {:.6g}; held-out coverage{}", C, per_n)};
}

// 9. Exact power laws recover their exponent.
Outcome fit_oracle() {
  double worst = 0;
  for (double p : {-2.0, -1.0, -0.5, 0.0, 1.5}) {
    std::vector<double> n, v;
    for (double x : {1e2, 1e3, 1e4, 1e5, 3e5}) {
      n.push_back(x);
      v.push_back(3.0 * std::pow(x, p));
    }
    const RateFit fit = fit_power_law(n, v);
    worst = std::max(worst, std::abs(fit.slope - p));
  }
  return {worst <= 1e-12, fmt::format("max |slope - exponent| = {:.2e}", worst)};
}

// 10. Reruns (and different thread counts) give byte-identical tables.
Outcome determinism() {
  std::vector<ExperimentConfig> configs;
  {
    ExperimentConfig c = esp_q_config(5, Measurement::ExcessRisk);
    c.measurements.push_back(Measurement::GenGapAtOutput);
    c.bounds = {"uniform_gap", "pl_gap", "excess_pl", "lipschitz_gap"};
    configs.push_back(c);
  }
  std::mt19937_64 rng(1010);
  for (Algorithm a : {Algorithm::GDA, Algorithm::SGDA, Algorithm::AGDA}) {
    ExperimentConfig c(a == Algorithm::AGDA ? random_p(rng) : random_q(rng));
    c.solver.algorithm = a;
    c.n_grid = {16, 32, 64, 128};
    c.trials = 4;
    c.t_rule = {TRule::Kind::Linear, 4.0};
    c.measurements = {Measurement::ExcessRisk, Measurement::EmpOpt, Measurement::PopStationarity};
    c.base_seed = 99;
    configs.push_back(c);
  }
  int identical = 0;
  for (ExperimentConfig& c : configs) {
    c.threads = 1;
    const std::string a = run_experiment(c).to_csv();
    c.threads = 4;
    const std::string b = run_experiment(c).to_csv();
    const std::string again = run_experiment(c).to_csv();
    identical += (a == b && b == again && RateTable::from_csv(a).to_csv() == a) ? 1 : 0;
  }
  return {identical == static_cast<int>(configs.size()),
          fmt::format("{}/{} experiments byte-identical across reruns and thread counts",
                      identical, configs.size())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient oracles vs finite differences", 5, gradient_oracles},
      {2, "primal certificates", 30, primal_certificates},
      {3, "GDA optimization bound, verbatim constants", 120, gda_verbatim_bound},
      {4, "generalization gap slope at fixed x", 600, gap_decay},
      {5, "ESP excess risk slope", 300, esp_slow_rate},
      {6, "low-noise fast rate", 900, fast_rate},
      {7, "bound formula oracle equivalence", 1, bound_equivalence},
      {8, "bound domination after calibration", 600, bound_domination},
      {9, "rate fitter oracle", 1, fit_oracle},
      {10, "determinism", 600, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %d: %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL",
                c.id, c.name, o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
