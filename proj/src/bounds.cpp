#include "minimax/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "minimax/errors.hpp"
#include "minimax/oracles.hpp"
#include "parallel.hpp"

namespace minimax {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_delta(double delta) {
  if (!(delta > 0 && delta < 1)) {
    throw ConfigError(fmt::format("delta must lie in (0, 1), got {}", delta));
  }
}

void check_n(std::int64_t n, std::int64_t minimum) {
  if (n < minimum) throw ConfigError(fmt::format("n must be at least {}, got {}", minimum, n));
}

// d + log(16 log2(sqrt(2) R1 n + 1) / delta)
double complexity(const BoundInputs& in, double n) {
  const double chain = 16.0 * std::log2(std::sqrt(2.0) * in.constants.R1 * n + 1.0);
  return in.constants.d + std::log(chain / in.delta);
}

BoundReport finish(std::string name, std::int64_t n, double x_dist,
                   std::vector<std::pair<std::string, double>> terms) {
  BoundReport r;
  r.name = std::move(name);
  r.n = n;
  r.x_dist = x_dist;
  r.terms = std::move(terms);
  r.value = 0;
  for (const auto& [_, v] : r.terms) r.value += v;
  return r;
}

void apply_threshold(BoundReport& report, const BoundInputs& inputs, bool enforce) {
  const std::int64_t n_min = sample_size_threshold(inputs);
  report.n_min = n_min;
  report.threshold_ok = report.n >= n_min;
  if (enforce && !report.threshold_ok) {
    throw ThresholdError(n_min, fmt::format("{} requires n >= {} (got n = {})", report.name,
                                            n_min, report.n));
  }
}

double unit_second_moment(NoiseLaw law, Eigen::Index dim) {
  const double k = static_cast<double>(dim);
  return law == NoiseLaw::Ball ? k / (k + 2.0) : k;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base_seed, std::int64_t n, std::int64_t trial) {
  // Trial i of base seed s is the stream of seed s + i, so seed sets read as ranges.
  return splitmix64(splitmix64(static_cast<std::uint64_t>(n)) ^
                    (base_seed + static_cast<std::uint64_t>(trial)));
}

std::optional<std::pair<double, double>> analytic_moments(const ProblemInstance& problem) {
  const double r2 = problem.noise_scale() * problem.noise_scale();
  const NoiseLaw law = problem.noise_law();
  switch (problem.family()) {
    case Family::Q: {
      const QParams& q = problem.q();
      return std::pair{q.mu_x * q.mu_x * r2 * unit_second_moment(law, problem.dim_x()),
                       q.mu_y * q.mu_y * r2 * unit_second_moment(law, problem.dim_y())};
    }
    case Family::P: {
      const PParams& p = problem.p();
      const Eigen::Index m = p.A.rows();
      const double per_coord = unit_second_moment(law, m) / static_cast<double>(m);
      return std::pair{r2 * p.A.squaredNorm() * per_coord,
                       p.mu_y * p.mu_y * r2 * unit_second_moment(law, problem.dim_y())};
    }
    case Family::I:
      return std::pair{r2 * unit_second_moment(law, problem.dim_x()), 0.0};
  }
  return std::nullopt;
}

BoundInputs estimate_inputs(const ProblemInstance& problem, std::int64_t mc_samples,
                            std::uint64_t seed) {
  if (mc_samples < 10000) throw ConfigError("mc_samples must be at least 10^4");
  BoundInputs in;
  in.constants = constants(problem);
  in.mc_samples = mc_samples;

  const SaddlePoint star = population_saddle(problem);
  SampleStream stream(problem, seed);
  double sx = 0, sy = 0, sxx = 0, syy = 0;
  for (std::int64_t k = 0; k < mc_samples; ++k) {
    const Gradient g = grad(problem, star.point, stream.next());
    const double nx = g.gx.squaredNorm();
    const double ny = g.gy.squaredNorm();
    sx += nx;
    sy += ny;
    sxx += nx * nx;
    syy += ny * ny;
    in.B_x_star = std::max(in.B_x_star, std::sqrt(nx));
    in.B_y_star = std::max(in.B_y_star, std::sqrt(ny));
  }
  const double m = static_cast<double>(mc_samples);
  in.e_gx2 = sx / m;
  in.e_gy2 = sy / m;
  in.e_gx2_stderr = std::sqrt(std::max(0.0, sxx / m - in.e_gx2 * in.e_gx2) / m);
  in.e_gy2_stderr = std::sqrt(std::max(0.0, syy / m - in.e_gy2 * in.e_gy2) / m);

  // Gradient variance: at the saddle (where grad F = 0) and at probes on the domain boundary.
  in.sigma2 = in.e_gx2 + in.e_gy2;
  const Objective F = population_objective(problem);
  const std::int64_t probe_samples = std::min<std::int64_t>(mc_samples, 10000);
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int probe = 0; probe < 8; ++probe) {
    Point w{Vec(problem.dim_x()), Vec(problem.dim_y())};
    for (Eigen::Index j = 0; j < w.x.size(); ++j) w.x(j) = normal(rng);
    for (Eigen::Index j = 0; j < w.y.size(); ++j) w.y(j) = normal(rng);
    w.x *= in.constants.radii.radius_x / w.x.norm();
    w.y *= in.constants.radii.radius_y / w.y.norm();
    const Gradient mean = F.grad(w.x, w.y);
    double acc = 0;
    for (std::int64_t k = 0; k < probe_samples; ++k) {
      const Gradient g = grad(problem, w, stream.next());
      acc += (g.gx - mean.gx).squaredNorm() + (g.gy - mean.gy).squaredNorm();
    }
    in.sigma2 = std::max(in.sigma2, acc / static_cast<double>(probe_samples));
  }

  if (auto analytic = analytic_moments(problem)) {
    in.analytic_e_gx2 = analytic->first;
    in.analytic_e_gy2 = analytic->second;
  }
  return in;
}

BoundReport eval_uniform_gap(const BoundInputs& in, std::int64_t n, double x_dist) {
  check_delta(in.delta);
  check_n(n, 2);
  if (!(x_dist >= 0)) throw ConfigError("x_dist must be nonnegative");
  const ProblemConstants& k = in.constants;
  const double nn = static_cast<double>(n);
  const double l8 = std::log(8.0 / in.delta);
  const double ratio = k.beta / k.mu_y;
  const double growth = (k.mu_y + k.beta) / k.mu_y;
  const double kc = complexity(in, nn);
  const double localization = in.C * k.beta * growth * growth * std::max(x_dist, 1.0 / nn) *
                              (std::sqrt(kc / nn) + kc / nn);
  return finish("uniform_gap", n, x_dist,
                {{"y_variance", ratio * std::sqrt(2.0 * in.e_gy2 * l8 / nn)},
                 {"y_bernstein", ratio * in.B_y_star * l8 / nn},
                 {"x_variance", std::sqrt(2.0 * in.e_gx2 * l8 / nn)},
                 {"x_bernstein", in.B_x_star * l8 / nn},
                 {"localization", localization}});
}

BoundReport eval_pl_gap(const BoundInputs& in, std::int64_t n, double emp_grad_norm,
                          bool enforce_threshold) {
  check_delta(in.delta);
  check_n(n, 1);
  if (!(emp_grad_norm >= 0)) throw ConfigError("emp_grad_norm must be nonnegative");
  const ProblemConstants& k = in.constants;
  const double nn = static_cast<double>(n);
  const double l8 = std::log(8.0 / in.delta);
  const double ratio = 2.0 * k.beta / k.mu_y;
  BoundReport r = finish("pl_gap", n, 0.0,
                         {{"emp_grad_norm", emp_grad_norm},
                          {"x_variance", 2.0 * std::sqrt(2.0 * in.e_gx2 * l8 / nn)},
                          {"x_bernstein", 2.0 * in.B_x_star * l8 / nn},
                          {"mu_x_over_n", k.mu_x / nn},
                          {"y_variance", ratio * std::sqrt(2.0 * in.e_gy2 * l8 / nn)},
                          {"y_bernstein", ratio * in.B_y_star * l8 / nn}});
  apply_threshold(r, in, enforce_threshold);
  return r;
}

BoundReport eval_excess_pl(const BoundInputs& in, std::int64_t n, double emp_grad_norm,
                           bool enforce_threshold) {
  check_delta(in.delta);
  check_n(n, 1);
  if (!(emp_grad_norm >= 0)) throw ConfigError("emp_grad_norm must be nonnegative");
  const ProblemConstants& k = in.constants;
  const double nn = static_cast<double>(n);
  const double l8 = std::log(8.0 / in.delta);
  const double inner =
      2.0 * k.beta * in.B_y_star * l8 / k.mu_y + 2.0 * in.B_x_star * l8 + k.mu_x;
  BoundReport r = finish(
      "excess_pl", n, 0.0,
      {{"optimization", 8.0 * emp_grad_norm * emp_grad_norm / k.mu_x},
       {"x_variance", 16.0 * in.e_gx2 * l8 / (k.mu_x * nn)},
       {"y_variance", 16.0 * k.beta * k.beta * in.e_gy2 * l8 / (k.mu_x * k.mu_y * k.mu_y * nn)},
       {"second_order", 2.0 * inner * inner / (k.mu_x * nn * nn)}});
  apply_threshold(r, in, enforce_threshold);
  return r;
}

BoundReport eval_lipschitz_gap(const ProblemConstants& k, std::int64_t n, double tilde_constant) {
  check_n(n, 1);
  if (!k.lipschitz_finite()) {
    throw ConfigError("Lipschitz-based comparison bound needs a finite L");
  }
  const double v = tilde_constant * k.L * (k.mu_y + k.beta) / k.mu_y *
                   std::sqrt(static_cast<double>(k.d) / static_cast<double>(n));
  return finish("lipschitz_gap", n, 0.0, {{"lipschitz_rate", v}});
}

double threshold_constant(double C) { return std::max(16.0 * C * C, 1.0); }

double threshold_rhs(const BoundInputs& in, double n) {
  check_delta(in.delta);
  const ProblemConstants& k = in.constants;
  const double s = k.mu_y + k.beta;
  return threshold_constant(in.C) * k.beta * k.beta * s * s * s * s * complexity(in, n) /
         (std::pow(k.mu_y, 4) * k.mu_x * k.mu_x);
}

std::int64_t sample_size_threshold(const BoundInputs& in) {
  // threshold_rhs is increasing and grows like log log n, so iterating
  // n <- ceil(rhs(n)) from below climbs monotonically onto the smallest valid n.
  double n = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double rhs = threshold_rhs(in, n);
    if (!std::isfinite(rhs) || rhs > 9e18) {
      throw RuntimeFailure("sample-size threshold overflows (pathological constants)");
    }
    if (n >= rhs) return static_cast<std::int64_t>(n);
    n = std::max(n + 1.0, std::ceil(rhs));
  }
  throw RuntimeFailure("sample-size threshold iteration did not converge in 100 steps");
}

double calibrate_constant(const ProblemInstance& problem, const std::vector<std::int64_t>& n_grid,
                          int trials, double target_coverage, std::uint64_t seed,
                          const CalibrationOptions& options) {
  if (n_grid.empty()) throw ConfigError("calibration grid is empty");
  if (trials < 1) throw ConfigError("trials must be positive");
  if (!(target_coverage > 0.5 && target_coverage < 1.0)) {
    throw ConfigError("target_coverage must lie in (0.5, 1)");
  }
  BoundInputs in = estimate_inputs(problem, options.mc_samples, options.mc_seed);
  in.delta = options.delta;
  in.C = 1.0;

  const PrimalModel pop(population_objective(problem));
  const Vec x_star = pop.minimizer();
  const Vec x = options.fixed_x.value_or(Vec::Zero(problem.dim_x()));
  if (x.size() != problem.dim_x()) throw ConfigError("fixed_x has the wrong dimension");
  const double x_dist = (x - x_star).norm();

  // Implied C of every (n, trial); trials are independent, so they run in parallel.
  const std::size_t per_n = static_cast<std::size_t>(trials);
  std::vector<double> implied(n_grid.size() * per_n);
  std::vector<double> loc(n_grid.size()), rest(n_grid.size());
  for (std::size_t j = 0; j < n_grid.size(); ++j) {
    const BoundReport unit = eval_uniform_gap(in, n_grid[j], x_dist);
    loc[j] = unit.terms.back().second;
    rest[j] = unit.value - loc[j];
  }
  const unsigned threads =
      options.threads > 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  detail::parallel_for(implied.size(), threads, [&](std::size_t task) {
    const std::size_t j = task / per_n;
    const std::int64_t n = n_grid[j];
    const Dataset ds = sample_dataset(problem, static_cast<std::size_t>(n),
                                      trial_seed(seed, n, static_cast<std::int64_t>(task % per_n)));
    const double gap = generalization_gap(pop, PrimalModel(empirical_objective(problem, ds)), x).gap;
    implied[task] = std::max(0.0, (gap - rest[j]) / loc[j]);
  });

  double worst = 0;
  const auto rank = static_cast<std::size_t>(
      std::ceil(target_coverage * static_cast<double>(trials) - 1e-12));
  for (std::size_t j = 0; j < n_grid.size(); ++j) {
    std::vector<double> v(implied.begin() + j * per_n, implied.begin() + (j + 1) * per_n);
    std::sort(v.begin(), v.end());
    worst = std::max(worst, v[std::max<std::size_t>(rank, 1) - 1]);
  }
  return worst;
}

}  // namespace minimax
