#pragma once

#include <string>

#include "minimax/problems.hpp"

namespace minimax {

enum class SaddleMethod { ClosedForm, Iterative };

std::string to_string(SaddleMethod method);

struct SaddlePoint {
  Point point;
  double grad_residual = 0;
  SaddleMethod method = SaddleMethod::ClosedForm;
};

/// |grad Phi(x) - grad Phi_S(x)| together with both norms.
struct GapReport {
  Vec x;
  double gap = 0;
  double pop_grad_norm = 0;
  double emp_grad_norm = 0;
};

/// Primal function Phi(x) = max_y F(x, y) of a quadratic objective.
///
/// Phi is itself quadratic: grad Phi(x) = S x + r with S the Schur complement
/// Hxx - Hxy Hyy^{-1} Hyx. The maximizer y*(x) is unique since Hyy is
/// negative definite.
class PrimalModel {
 public:
  explicit PrimalModel(Objective objective);

  const Objective& objective() const { return objective_; }
  Vec y_star(const Vec& x) const;
  double value(const Vec& x) const;
  /// Danskin: grad_x F(x, y*(x)).
  Vec grad(const Vec& x) const;
  /// Hessian of Phi.
  const Mat& schur() const { return schur_; }
  /// Minimum-norm minimizer of Phi. Throws RuntimeFailure if Phi is unbounded below.
  Vec minimizer() const;
  SaddlePoint saddle() const;

 private:
  Objective objective_;
  Eigen::LDLT<Mat> neg_hyy_;
  Mat schur_;
  Vec offset_;  // grad Phi(0)
};

/// Gradient ascent on y -> F(x, y) with step 1/beta until |grad_y F| <= tol.
/// Warm-started at y0; throws ConvergenceError past max_iters.
Vec ascend_y(const Objective& objective, const Vec& x, Vec y0, double beta, double tol,
             long max_iters = 1'000'000);

Vec y_star(const ProblemInstance& problem, const Vec& x);
Vec y_star_S(const ProblemInstance& problem, const Dataset& dataset, const Vec& x, double tol,
             SaddleMethod method = SaddleMethod::ClosedForm);

double primal_value(const ProblemInstance& problem, const Vec& x);
Vec primal_grad(const ProblemInstance& problem, const Vec& x);
double primal_value_S(const ProblemInstance& problem, const Dataset& dataset, const Vec& x,
                      double tol, SaddleMethod method = SaddleMethod::ClosedForm);
Vec primal_grad_S(const ProblemInstance& problem, const Dataset& dataset, const Vec& x, double tol,
                  SaddleMethod method = SaddleMethod::ClosedForm);

SaddlePoint population_saddle(const ProblemInstance& problem);
SaddlePoint empirical_saddle(const ProblemInstance& problem, const Dataset& dataset, double tol,
                             SaddleMethod method = SaddleMethod::ClosedForm);

GapReport generalization_gap(const ProblemInstance& problem, const Dataset& dataset, const Vec& x,
                             double tol, SaddleMethod method = SaddleMethod::ClosedForm);
GapReport generalization_gap(const PrimalModel& population, const PrimalModel& empirical,
                             const Vec& x);

/// Phi(x) - Phi(x*), evaluated as the exact quadratic expansion around x*.
/// Raw value; tiny negative round-off is not clamped.
double excess_primal_risk(const ProblemInstance& problem, const Vec& x);
double excess_primal_risk(const PrimalModel& population, const Vec& x_star, const Vec& x);

/// h(w; z) = (1/2)|Bw - z|^2, used for the self-bounding property check.
struct LeastSquaresLoss {
  Mat B;
  Vec z;

  double value(const Vec& w) const { return 0.5 * (B * w - z).squaredNorm(); }
  Vec grad(const Vec& w) const { return B.transpose() * (B * w - z); }
  /// Spectral norm of B'B.
  double smoothness() const;
};

}  // namespace minimax
