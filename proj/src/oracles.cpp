#include "minimax/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/core.h>

#include "minimax/errors.hpp"

namespace minimax {

std::string to_string(SaddleMethod method) {
  return method == SaddleMethod::ClosedForm ? "closed_form" : "iterative";
}

PrimalModel::PrimalModel(Objective objective) : objective_(std::move(objective)) {
  const Mat neg_hyy = -objective_.hyy();
  neg_hyy_.compute(neg_hyy);
  if (neg_hyy_.info() != Eigen::Success || !neg_hyy_.isPositive()) {
    throw RuntimeFailure("objective is not strongly concave in y");
  }
  const Mat hyx = objective_.hyx();
  schur_ = objective_.hxx() + objective_.hxy() * neg_hyy_.solve(hyx);
  schur_ = 0.5 * (schur_ + schur_.transpose()).eval();
  offset_ = objective_.gx() + objective_.hxy() * neg_hyy_.solve(Vec(objective_.gy()));
}

Vec PrimalModel::y_star(const Vec& x) const {
  Vec rhs = objective_.hyx() * x;
  rhs += objective_.gy();
  return neg_hyy_.solve(rhs);
}

double PrimalModel::value(const Vec& x) const { return objective_.value(x, y_star(x)); }

Vec PrimalModel::grad(const Vec& x) const { return objective_.grad(x, y_star(x)).gx; }

Vec PrimalModel::minimizer() const {
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(schur_);
  cod.setThreshold(1e-10);
  Vec x = cod.solve(Vec(-offset_));
  const double residual = (schur_ * x + offset_).norm();
  if (!(residual <= 1e-9 * std::max(1.0, offset_.norm()))) {
    throw RuntimeFailure(
        fmt::format("singular stationarity system: primal residual {} (Phi unbounded below)",
                    residual));
  }
  return x;
}

SaddlePoint PrimalModel::saddle() const {
  SaddlePoint sp;
  sp.point.x = minimizer();
  sp.point.y = y_star(sp.point.x);
  sp.grad_residual = objective_.grad(sp.point.x, sp.point.y).norm();
  sp.method = SaddleMethod::ClosedForm;
  return sp;
}

Vec ascend_y(const Objective& objective, const Vec& x, Vec y, double beta, double tol,
             long max_iters) {
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  const double step = 1.0 / beta;
  Vec base = objective.hyx() * x;
  base += objective.gy();
  Vec gy(y.size());
  for (long it = 0; it <= max_iters; ++it) {
    gy.noalias() = objective.hyy() * y;
    gy += base;
    if (gy.norm() <= tol) return y;
    y += step * gy;
  }
  throw ConvergenceError(
      fmt::format("inner ascent did not reach tol {} in {} iterations (check mu_y)", tol,
                  max_iters));
}

Vec y_star(const ProblemInstance& problem, const Vec& x) {
  return PrimalModel(population_objective(problem)).y_star(x);
}

Vec y_star_S(const ProblemInstance& problem, const Dataset& dataset, const Vec& x, double tol,
             SaddleMethod method) {
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  Objective fs = empirical_objective(problem, dataset);
  if (method == SaddleMethod::ClosedForm) return PrimalModel(std::move(fs)).y_star(x);
  return ascend_y(fs, x, Vec::Zero(problem.dim_y()), constants(problem).beta, tol);
}

double primal_value(const ProblemInstance& problem, const Vec& x) {
  return PrimalModel(population_objective(problem)).value(x);
}

Vec primal_grad(const ProblemInstance& problem, const Vec& x) {
  return PrimalModel(population_objective(problem)).grad(x);
}

double primal_value_S(const ProblemInstance& problem, const Dataset& dataset, const Vec& x,
                      double tol, SaddleMethod method) {
  const Vec y = y_star_S(problem, dataset, x, tol, method);
  return empirical_objective(problem, dataset).value(x, y);
}

Vec primal_grad_S(const ProblemInstance& problem, const Dataset& dataset, const Vec& x, double tol,
                  SaddleMethod method) {
  const Vec y = y_star_S(problem, dataset, x, tol, method);
  return empirical_objective(problem, dataset).grad(x, y).gx;
}

SaddlePoint population_saddle(const ProblemInstance& problem) {
  return PrimalModel(population_objective(problem)).saddle();
}

namespace {

// Gradient descent on Phi_S with inner ascent, step 1/(beta + beta^2/mu_y).
SaddlePoint iterative_saddle(const Objective& fs, double beta, double mu_y, double tol) {
  const double step = 1.0 / (beta + beta * beta / mu_y);
  Vec x = Vec::Zero(fs.dim_x());
  Vec y = Vec::Zero(fs.dim_y());
  constexpr long kMaxOuter = 1'000'000;
  for (long it = 0; it < kMaxOuter; ++it) {
    y = ascend_y(fs, x, std::move(y), beta, 0.5 * tol);
    const Gradient g = fs.grad(x, y);
    if (g.norm() <= tol) return SaddlePoint{Point{x, y}, g.norm(), SaddleMethod::Iterative};
    x -= step * g.gx;
  }
  throw ConvergenceError(fmt::format("iterative saddle solve did not reach tol {}", tol));
}

}  // namespace

SaddlePoint empirical_saddle(const ProblemInstance& problem, const Dataset& dataset, double tol,
                             SaddleMethod method) {
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  Objective fs = empirical_objective(problem, dataset);
  if (method == SaddleMethod::ClosedForm) return PrimalModel(std::move(fs)).saddle();
  const ProblemConstants k = constants(problem);
  return iterative_saddle(fs, k.beta, k.mu_y, tol);
}

GapReport generalization_gap(const PrimalModel& population, const PrimalModel& empirical,
                             const Vec& x) {
  const Vec gp = population.grad(x);
  const Vec ge = empirical.grad(x);
  return GapReport{x, (gp - ge).norm(), gp.norm(), ge.norm()};
}

GapReport generalization_gap(const ProblemInstance& problem, const Dataset& dataset, const Vec& x,
                             double tol, SaddleMethod method) {
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  const PrimalModel pop(population_objective(problem));
  if (method == SaddleMethod::ClosedForm) {
    return generalization_gap(pop, PrimalModel(empirical_objective(problem, dataset)), x);
  }
  // Danskin at an approximate maximizer: the induced gradient error is about
  // tol * beta / mu_y, so refine once if that is not 1000x below the gap.
  const Objective fs = empirical_objective(problem, dataset);
  const ProblemConstants k = constants(problem);
  const Vec gp = pop.grad(x);
  auto measure = [&](double inner_tol) {
    const Vec y = ascend_y(fs, x, Vec::Zero(problem.dim_y()), k.beta, inner_tol);
    const Vec ge = fs.grad(x, y).gx;
    return GapReport{x, (gp - ge).norm(), gp.norm(), ge.norm()};
  };
  GapReport report = measure(tol);
  const double induced = tol * k.beta / k.mu_y;
  if (report.gap > 0 && induced > report.gap / 1000.0) {
    const double refined = std::max(report.gap / 1000.0 * k.mu_y / k.beta, 1e-14);
    report = measure(refined);
  }
  return report;
}

double excess_primal_risk(const PrimalModel& population, const Vec& x_star, const Vec& x) {
  const Vec dx = x - x_star;
  return 0.5 * dx.dot(population.schur() * dx) + population.grad(x_star).dot(dx);
}

double excess_primal_risk(const ProblemInstance& problem, const Vec& x) {
  const PrimalModel pop(population_objective(problem));
  return excess_primal_risk(pop, pop.minimizer(), x);
}

double LeastSquaresLoss::smoothness() const {
  if (B.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(B);
  const double s = svd.singularValues()(0);
  return s * s;
}

}  // namespace minimax
