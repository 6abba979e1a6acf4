#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/core.h>

#include "minimax/errors.hpp"
#include "minimax/oracles.hpp"
#include "minimax/problems.hpp"

namespace minimax {

namespace {

Vec uniform_in_ball(std::mt19937_64& rng, int dim, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v(k) = normal(rng);
  const double norm = v.norm();
  if (norm == 0) return v;
  return v * (radius * std::pow(uniform(rng), 1.0 / dim) / norm);
}

// inf_x' F(x', y) for a quadratic F with PSD Hxx; -inf when F(., y) is unbounded below.
double inner_infimum(const Objective& F, const Vec& y) {
  const Mat hxx = F.hxx();
  const Vec rhs = -(F.hxy() * y + F.gx());
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(hxx);
  cod.setThreshold(1e-10);
  const Vec xmin = cod.solve(rhs);
  if ((hxx * xmin - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) {
    return -std::numeric_limits<double>::infinity();
  }
  return F.value(xmin, y);
}

AssumptionCheck make_check(std::string name, std::string assumption, bool claimed) {
  AssumptionCheck c;
  c.name = std::move(name);
  c.assumption = std::move(assumption);
  c.claimed = claimed;
  return c;
}

}  // namespace

const AssumptionCheck& AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw ConfigError("no assumption check named " + name);
}

bool AssumptionReport::claimed_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) {
    return !c.claimed || !c.applicable || c.passed;
  });
}

AssumptionReport certify_assumptions(const ProblemInstance& problem, int num_probes,
                                     std::uint64_t seed, double tol) {
  if (num_probes < 100) throw ConfigError("num_probes must be at least 100");
  if (!(tol >= 0)) throw ConfigError("tol must be nonnegative");

  const ProblemConstants k = constants(problem);
  const Objective F = population_objective(problem);
  const SaddlePoint star = population_saddle(problem);
  const int d = problem.dim_x();
  const int dp = problem.dim_y();
  const Family family = problem.family();

  std::mt19937_64 rng(seed);
  SampleStream samples(problem, seed ^ 0x9e3779b97f4a7c15ULL);
  auto random_point = [&] {
    return Point{uniform_in_ball(rng, d, k.radii.radius_x),
                 uniform_in_ball(rng, dp, k.radii.radius_y)};
  };

  AssumptionReport report;
  report.family = family;

  {
    AssumptionCheck c = make_check("constants_consistency", "beta >= mu_y, mu_x mu_y <= beta(mu_y+beta)", true);
    c.observed = k.mu_x * k.mu_y / (k.beta * (k.mu_y + k.beta));
    c.limit = 1.0;
    c.passed = k.beta >= k.mu_y && c.observed <= 1.0;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c = make_check("smoothness", "f(.; z) is beta-smooth in (x, y)", true);
    double worst = 0;
    for (int t = 0; t < num_probes; ++t) {
      const Point p1 = random_point();
      const Point p2 = random_point();
      const Sample z = samples.next();
      const Gradient g1 = grad(problem, p1, z);
      const Gradient g2 = grad(problem, p2, z);
      const double num = std::sqrt((g1.gx - g2.gx).squaredNorm() + (g1.gy - g2.gy).squaredNorm());
      const double den = std::sqrt((p1.x - p2.x).squaredNorm() + (p1.y - p2.y).squaredNorm());
      if (den > 0) worst = std::max(worst, num / den);
    }
    c.observed = worst;
    c.limit = k.beta + tol;
    c.passed = worst <= c.limit;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c =
        make_check("y_strong_concavity", "f(x, .; z) is mu_y-strongly concave", true);
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < num_probes; ++t) {
      const Point p1 = random_point();
      const Vec y2 = uniform_in_ball(rng, dp, k.radii.radius_y);
      const Point p2{p1.x, y2};
      const Sample z = samples.next();
      const Vec dy = p1.y - y2;
      const double gap = value(problem, p1, z) - value(problem, p2, z) -
                         grad(problem, p2, z).gy.dot(dy) + 0.5 * k.mu_y * dy.squaredNorm();
      worst = std::max(worst, gap);
    }
    c.observed = worst;
    c.limit = tol;
    c.passed = worst <= tol;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c = make_check("lipschitz", "gradient norms <= L on the domain", true);
    if (!k.lipschitz_finite()) {
      c.applicable = false;
      c.detail = "L is infinite for unbounded noise";
    } else {
      double worst = 0;
      for (int t = 0; t < num_probes; ++t) {
        const Gradient g = grad(problem, random_point(), samples.next());
        worst = std::max({worst, g.gx.norm(), g.gy.norm()});
      }
      c.observed = worst;
      c.limit = k.L + tol;
      c.passed = worst <= c.limit;
    }
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c =
        make_check("bernstein", "Bernstein moments at the saddle, k = 2..4", true);
    const int mc = std::max(10000, 100 * num_probes);
    double mx[5] = {0, 0, 0, 0, 0};
    double my[5] = {0, 0, 0, 0, 0};
    double bx = 0;
    double by = 0;
    for (int t = 0; t < mc; ++t) {
      const Gradient g = grad(problem, star.point, samples.next());
      const double nx = g.gx.norm();
      const double ny = g.gy.norm();
      bx = std::max(bx, nx);
      by = std::max(by, ny);
      for (int p = 2; p <= 4; ++p) {
        mx[p] += std::pow(nx, p);
        my[p] += std::pow(ny, p);
      }
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (int p = 3; p <= 4; ++p) {
      const double fact = p == 3 ? 3.0 : 12.0;  // k!/2
      worst = std::max(worst, mx[p] / mc - fact * (mx[2] / mc) * std::pow(bx, p - 2));
      worst = std::max(worst, my[p] / mc - fact * (my[2] / mc) * std::pow(by, p - 2));
    }
    c.observed = worst;
    c.limit = tol;
    c.passed = worst <= tol;
    c.detail = fmt::format("B_x = {:.6g}, B_y = {:.6g}, {} samples", bx, by, mc);
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c =
        make_check("x_pl_population", "x-side PL of the population risk", true);
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < num_probes; ++t) {
      const Point p = random_point();
      const double gap = F.value(p.x, p.y) - inner_infimum(F, p.y);
      const double rhs = F.grad(p.x, p.y).gx.squaredNorm() / (2.0 * k.mu_x);
      worst = std::max(worst, gap - rhs);
    }
    c.observed = worst;
    c.limit = tol;
    c.passed = worst <= tol;
    report.checks.push_back(c);
  }

  {
    AssumptionCheck c = make_check("x_strong_convexity",
                                   "per-sample mu_x-strong convexity in x",
                                   family == Family::Q);
    std::vector<Vec> directions;
    if (family == Family::P) {
      // Probe the null space of A explicitly.
      Eigen::FullPivLU<Mat> lu(problem.p().A);
      lu.setThreshold(1e-10);
      const Mat kernel = lu.kernel();
      for (Eigen::Index j = 0; j < kernel.cols(); ++j) directions.push_back(kernel.col(j));
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < num_probes; ++t) {
      const Point p2 = random_point();
      Vec x1 = uniform_in_ball(rng, d, k.radii.radius_x);
      if (!directions.empty() && t % 2 == 0) {
        x1 = p2.x + directions[t / 2 % directions.size()];
      }
      const Point p1{x1, p2.y};
      const Sample z = samples.next();
      const Vec dx = x1 - p2.x;
      const double lower = value(problem, p2, z) + grad(problem, p2, z).gx.dot(dx) +
                           0.5 * k.mu_x * dx.squaredNorm();
      worst = std::max(worst, lower - value(problem, p1, z));
    }
    c.observed = worst;
    c.limit = tol;
    c.passed = worst <= tol;
    report.checks.push_back(c);
  }

  if (family == Family::I) {
    AssumptionCheck c = make_check("anchor_stationarity",
                                   "per-sample gradient vanishes at the anchor (noise_scale = 0)",
                                   problem.noise_scale() == 0.0);
    const Point anchor{problem.i().x0, problem.i().y0};
    double worst = 0;
    for (int t = 0; t < num_probes; ++t) {
      worst = std::max(worst, grad(problem, anchor, samples.next()).norm());
    }
    c.observed = worst;
    c.limit = 0.0;
    c.passed = worst == 0.0;
    report.checks.push_back(c);
  }

  return report;
}

}  // namespace minimax
