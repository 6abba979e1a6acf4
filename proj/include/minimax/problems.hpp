#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace minimax {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Family { Q, P, I };
enum class NoiseLaw { Ball, Gaussian };

std::string to_string(Family family);
std::string to_string(NoiseLaw law);

/// A point (x, y) of the joint domain; x is minimized, y maximized.
struct Point {
  Vec x;
  Vec y;
};

struct Gradient {
  Vec gx;
  Vec gy;
  double norm() const { return std::sqrt(gx.squaredNorm() + gy.squaredNorm()); }
};

/// One draw z. The payload layout is family specific:
///   Q: [z_a (d), z_b (d')]
///   P: [z_a (rows of A), z_b (d')]
///   I: [z_a (d), scaled noise xi (d)]
struct Sample {
  Vec payload;
};

struct Dataset {
  std::vector<Sample> samples;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
};

/// Euclidean ball radii for X and Y, both centered at the origin.
struct DomainRadii {
  double radius_x = 0.0;
  double radius_y = 0.0;
};

// f(x,y;z) = (mu_x/2)|x - z_a|^2 + lambda x'My - (mu_y/2)|y - z_b|^2
struct QParams {
  double mu_x = 1.0;
  double mu_y = 1.0;
  double lambda = 0.0;
  Mat M;
  Vec a_bar;
  Vec b_bar;
};

// f(x,y;z) = (1/2)|Ax - z_a|^2 + lambda (Ax)'My - (mu_y/2)|y - z_b|^2, rank(A) < d
struct PParams {
  Mat A;
  double mu_y = 1.0;
  double lambda = 0.0;
  Mat M;
  Vec a_bar;
  Vec b_bar;
  double mu_x = 0.0;  // smallest nonzero eigenvalue of A'A
};

// f(x,y;z) = (1/2)u'aa'u + lambda u'aa'Mv - (mu_y/2)|v|^2 + xi'u,  u = x - x0, v = y - y0,
// with a = G w, w uniform on the sphere of radius sqrt(d) (so E[aa'] = GG').
struct IParams {
  Vec x0;
  Vec y0;
  double mu_y = 1.0;
  double lambda = 0.0;
  Mat M;
  std::uint64_t covariance_seed = 0;
  Mat G;
};

/// Immutable stochastic minimax objective with analytic structure.
class ProblemInstance {
 public:
  using Params = std::variant<QParams, PParams, IParams>;

  Family family() const { return family_; }
  int dim_x() const { return d_; }
  int dim_y() const { return dp_; }
  /// Length of a sample payload.
  int payload_dim() const;
  double noise_scale() const { return noise_scale_; }
  NoiseLaw noise_law() const { return law_; }
  const std::optional<DomainRadii>& domain() const { return domain_; }
  const Params& params() const { return params_; }

  const QParams& q() const { return std::get<QParams>(params_); }
  const PParams& p() const { return std::get<PParams>(params_); }
  const IParams& i() const { return std::get<IParams>(params_); }

  /// Strong concavity modulus in y.
  double mu_y() const;
  double lambda() const;
  const Mat& coupling() const;

  ProblemInstance with_domain(DomainRadii radii) const;
  ProblemInstance with_noise_law(NoiseLaw law) const;

 private:
  ProblemInstance(Family family, int d, int dp, Params params, double noise_scale);

  friend ProblemInstance make_q(int, int, double, double, double, const Mat&, const Vec&,
                                const Vec&, double);
  friend ProblemInstance make_p(int, int, const Mat&, double, double, const Mat&, double,
                                const Vec&, const Vec&);
  friend ProblemInstance make_i(int, int, const Vec&, const Vec&, double, double, const Mat&,
                                std::uint64_t, double);

  Family family_;
  int d_;
  int dp_;
  Params params_;
  double noise_scale_;
  NoiseLaw law_ = NoiseLaw::Ball;
  std::optional<DomainRadii> domain_;
};

ProblemInstance make_q(int d, int dp, double mu_x, double mu_y, double lambda, const Mat& M,
                       const Vec& a_bar, const Vec& b_bar, double noise_scale);

/// Empty a_bar / b_bar default to zero means. a_bar has one entry per row of A.
ProblemInstance make_p(int d, int dp, const Mat& A, double mu_y, double lambda, const Mat& M,
                       double noise_scale, const Vec& a_bar = Vec(), const Vec& b_bar = Vec());

ProblemInstance make_i(int d, int dp, const Vec& x0, const Vec& y0, double mu_y, double lambda,
                       const Mat& M, std::uint64_t covariance_seed, double noise_scale);

/// Deterministic stream of i.i.d. samples; sample_dataset draws its prefix.
class SampleStream {
 public:
  SampleStream(const ProblemInstance& problem, std::uint64_t seed);
  Sample next();

 private:
  void unit_noise(Eigen::Ref<Vec> out);

  const ProblemInstance* problem_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

Dataset sample_dataset(const ProblemInstance& problem, std::size_t n, std::uint64_t seed);

/// Per-sample objective f(x, y; z).
double value(const ProblemInstance& problem, const Point& point, const Sample& sample);
/// Exact analytic gradient of value().
Gradient grad(const ProblemInstance& problem, const Point& point, const Sample& sample);

/// Sufficient statistics: each family's f is affine in these, so the population
/// and empirical objectives are f evaluated at the expected / averaged statistics.
struct Moments {
  Vec mean_a;           // Q, P
  Vec mean_b;           // Q, P: E[z_b]; I: E[xi]
  double mean_a_sq = 0;  // Q, P: E|z_a|^2
  double mean_b_sq = 0;  // Q, P: E|z_b|^2
  Mat second_a;         // I: E[z_a z_a']
};

Moments sample_moments(const ProblemInstance& problem, const Sample& sample);
Moments population_moments(const ProblemInstance& problem);
Moments empirical_moments(const ProblemInstance& problem, const Dataset& dataset);

/// Quadratic objective (1/2) w'Hw + g'w + c over w = (x, y).
class Objective {
 public:
  Objective(int d, int dp, Mat H, Vec g, double c);

  int dim_x() const { return d_; }
  int dim_y() const { return dp_; }
  double value(const Vec& x, const Vec& y) const;
  Gradient grad(const Vec& x, const Vec& y) const;

  auto hxx() const { return H_.topLeftCorner(d_, d_); }
  auto hxy() const { return H_.topRightCorner(d_, dp_); }
  auto hyx() const { return H_.bottomLeftCorner(dp_, d_); }
  auto hyy() const { return H_.bottomRightCorner(dp_, dp_); }
  auto gx() const { return g_.head(d_); }
  auto gy() const { return g_.tail(dp_); }
  const Mat& hessian() const { return H_; }
  const Vec& linear() const { return g_; }
  double constant() const { return c_; }

 private:
  int d_;
  int dp_;
  Mat H_;
  Vec g_;
  double c_;
};

Objective objective_from_moments(const ProblemInstance& problem, const Moments& moments);
/// F(x, y) = E f(x, y; z).
Objective population_objective(const ProblemInstance& problem);
/// F_S(x, y) = (1/n) sum_i f(x, y; z_i).
Objective empirical_objective(const ProblemInstance& problem, const Dataset& dataset);

struct ProblemConstants {
  double mu_x = 0;
  double mu_y = 0;
  double beta = 0;
  double L = std::numeric_limits<double>::infinity();
  double D_X = 0;
  double D_Y = 0;
  double R1 = 0;
  int d = 0;
  int dp = 0;
  DomainRadii radii;

  bool lipschitz_finite() const { return std::isfinite(L); }
};

/// Certified constants. Domain radii default to 2(|x*| + 1), 2(|y*| + 1) unless
/// the instance carries explicit ones.
ProblemConstants constants(const ProblemInstance& problem);

struct AssumptionCheck {
  std::string name;
  std::string assumption;
  bool claimed = true;   // the family is constructed to satisfy this check
  bool applicable = true;
  bool passed = true;
  double observed = 0;   // worst probed value
  double limit = 0;      // threshold it was compared against
  std::string detail;
};

struct AssumptionReport {
  Family family = Family::Q;
  std::vector<AssumptionCheck> checks;

  const AssumptionCheck& find(const std::string& name) const;
  /// All applicable, claimed checks passed.
  bool claimed_passed() const;
};

AssumptionReport certify_assumptions(const ProblemInstance& problem, int num_probes,
                                     std::uint64_t seed, double tol);

}  // namespace minimax
