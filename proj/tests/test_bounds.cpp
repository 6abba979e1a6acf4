#include <doctest.h>

#include <cmath>

#include "minimax/bounds.hpp"
#include "minimax/errors.hpp"
#include "minimax/experiments.hpp"
#include "minimax/oracles.hpp"
#include "support.hpp"

using namespace minimax;
using namespace minimax::testing;

namespace {

BoundInputs unit_inputs() {
  BoundInputs in;
  in.constants.mu_x = 1;
  in.constants.mu_y = 1;
  in.constants.beta = 1;
  in.constants.L = 1;
  in.constants.R1 = 1;
  in.constants.d = 1;
  in.delta = 0.05;
  in.C = 1;
  return in;
}

BoundInputs noisy_inputs() {
  BoundInputs in = unit_inputs();
  in.e_gx2 = 0.3;
  in.e_gy2 = 0.7;
  in.B_x_star = 1.5;
  in.B_y_star = 2.5;
  in.constants.mu_x = 0.5;
  in.constants.beta = 1.3;
  in.constants.R1 = 4;
  in.constants.d = 3;
  return in;
}

double sum_terms(const BoundReport& r) {
  double s = 0;
  for (const auto& [name, v] : r.terms) s += v;
  return s;
}

// Written out from the formula with log base 2 inside the chaining count.
double uniform_gap_oracle(const BoundInputs& in, double n, double dist) {
  const auto& k = in.constants;
  const double L = std::log(8 / in.delta);
  const double K = k.d + std::log(16 * std::log(std::sqrt(2.0) * k.R1 * n + 1) / std::log(2.0) / in.delta);
  const double a = k.beta / k.mu_y;
  const double g = (k.mu_y + k.beta) / k.mu_y;
  return a * (std::sqrt(2 * in.e_gy2 * L / n) + in.B_y_star * L / n) +
         std::sqrt(2 * in.e_gx2 * L / n) + in.B_x_star * L / n +
         in.C * k.beta * g * g * std::max(dist, 1 / n) * (std::sqrt(K / n) + K / n);
}

}  // namespace

TEST_CASE("noiseless inputs reduce the PL bounds to their optimization terms") {
  const BoundInputs in = unit_inputs();
  const std::int64_t n = sample_size_threshold(in) * 2;
  CHECK(eval_pl_gap(in, n, 0.0).value == doctest::Approx(1.0 / n));
  CHECK(eval_excess_pl(in, n, 0.0).value == doctest::Approx(2.0 / (double(n) * n)));

  BoundInputs scaled = in;
  scaled.constants.mu_x = 3;
  scaled.constants.beta = 3;
  const std::int64_t m = sample_size_threshold(scaled) + 5;
  CHECK(eval_pl_gap(scaled, m, 0.0).value == doctest::Approx(3.0 / m));
  CHECK(eval_excess_pl(scaled, m, 0.0).value == doctest::Approx(2.0 * 3.0 / (double(m) * m)));
  CHECK(eval_excess_pl(scaled, m, 0.5).value ==
        doctest::Approx(8 * 0.25 / 3.0 + 2.0 * 3.0 / (double(m) * m)));
}

TEST_CASE("uniform gap bound against a transcription of the formula") {
  const BoundInputs in = noisy_inputs();
  for (std::int64_t n : {2, 17, 1000, 123456}) {
    for (double dist : {0.0, 1e-4, 0.7, 5.0}) {
      const BoundReport r = eval_uniform_gap(in, n, dist);
      CHECK(r.value == doctest::Approx(uniform_gap_oracle(in, double(n), dist)).epsilon(1e-12));
      CHECK(r.value == doctest::Approx(sum_terms(r)).epsilon(1e-14));
      CHECK(r.terms.size() == 5);
    }
  }
  // The localization term floors |x - x*| at 1/n.
  CHECK(eval_uniform_gap(in, 100, 0.0).value == eval_uniform_gap(in, 100, 0.01).value);
}

TEST_CASE("PL bounds: terms sum to the value and shrink with n") {
  const BoundInputs in = noisy_inputs();
  double prev_gap = INFINITY, prev_excess = INFINITY;
  for (std::int64_t n = 1000; n <= 1000000; n *= 10) {
    const BoundReport g = eval_pl_gap(in, n, 0.01, false);
    const BoundReport e = eval_excess_pl(in, n, 0.01, false);
    CHECK(g.value == doctest::Approx(sum_terms(g)).epsilon(1e-14));
    CHECK(e.value == doctest::Approx(sum_terms(e)).epsilon(1e-14));
    CHECK(g.value < prev_gap);
    CHECK(e.value < prev_excess);
    prev_gap = g.value;
    prev_excess = e.value;
  }
  // Variance term of the gradient bound, written out.
  const double L = std::log(8 / in.delta);
  const BoundReport g = eval_pl_gap(in, 5000, 0.0, false);
  CHECK(g.terms[1].second == doctest::Approx(2 * std::sqrt(2 * 0.3 * L / 5000)));
}

TEST_CASE("Lipschitz comparison bound") {
  ProblemConstants k = unit_inputs().constants;
  k.d = 4;
  // L (mu_y + beta) / mu_y sqrt(d / n) = 1 * 2 * 1
  CHECK(eval_lipschitz_gap(k, 4).value == doctest::Approx(2.0));
  CHECK(eval_lipschitz_gap(k, 16, 3.0).value == doctest::Approx(3.0));
  k.L = INFINITY;
  CHECK_THROWS_AS(eval_lipschitz_gap(k, 4), ConfigError);
}

TEST_CASE("sample-size threshold is the smallest admissible n") {
  for (const BoundInputs& in : {unit_inputs(), noisy_inputs()}) {
    const std::int64_t n_min = sample_size_threshold(in);
    CHECK(double(n_min) >= threshold_rhs(in, double(n_min)));
    CHECK(double(n_min - 1) < threshold_rhs(in, double(n_min - 1)));
    CHECK_NOTHROW(eval_pl_gap(in, n_min, 0.0));
    CHECK_THROWS_AS(eval_pl_gap(in, n_min - 1, 0.0), ThresholdError);
    CHECK_THROWS_AS(eval_excess_pl(in, n_min - 1, 0.0), ThresholdError);
    const BoundReport r = eval_pl_gap(in, n_min - 1, 0.0, false);
    CHECK_FALSE(r.threshold_ok);
    REQUIRE(r.n_min.has_value());
    CHECK(*r.n_min == n_min);
  }
}

TEST_CASE("doubling C quadruples the threshold right-hand side") {
  BoundInputs in = noisy_inputs();
  in.C = 0.5;
  BoundInputs twice = in;
  twice.C = 1.0;
  CHECK(threshold_rhs(twice, 500) == doctest::Approx(4 * threshold_rhs(in, 500)));
  const double ratio = double(sample_size_threshold(twice)) / double(sample_size_threshold(in));
  CHECK(ratio >= 4.0);
  CHECK(ratio < 4.5);
  CHECK(threshold_constant(0.1) == 1.0);
  CHECK(threshold_constant(2.0) == 64.0);
}

TEST_CASE("pathological constants overflow the threshold") {
  BoundInputs in = unit_inputs();
  in.constants.mu_x = 1e-12;
  CHECK_THROWS_AS(sample_size_threshold(in), RuntimeFailure);
}

TEST_CASE("bound argument validation") {
  BoundInputs in = unit_inputs();
  CHECK_THROWS_AS(eval_uniform_gap(in, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(eval_uniform_gap(in, 10, -1.0), ConfigError);
  CHECK_THROWS_AS(eval_pl_gap(in, 0, 0.0), ConfigError);
  in.delta = 1.0;
  CHECK_THROWS_AS(eval_uniform_gap(in, 10, 0.0), ConfigError);
}

TEST_CASE("analytic moments match Monte Carlo estimates") {
  std::mt19937_64 rng(51);
  for (int probe = 0; probe < 6; ++probe) {
    const ProblemInstance p = probe % 3 == 0 ? random_q(rng) : probe % 3 == 1 ? random_p(rng) : random_i(rng, 0.4);
    const BoundInputs in = estimate_inputs(p, 200000, 7);
    const auto exact = analytic_moments(p);
    REQUIRE(exact.has_value());
    CHECK(std::abs(in.e_gx2 - exact->first) <= 5 * in.e_gx2_stderr + 1e-12);
    CHECK(std::abs(in.e_gy2 - exact->second) <= 5 * in.e_gy2_stderr + 1e-12);
    CHECK(in.B_x_star * in.B_x_star >= in.e_gx2);
    CHECK(in.sigma2 >= 0);
  }
}

TEST_CASE("uniform ball moment of the I family") {
  // E|u|^2 = r^2 d / (d + 2) for u uniform in the radius-r ball.
  const double r = 0.1;
  for (int d : {1, 2, 5}) {
    Vec x0 = Vec::Zero(d), y0 = Vec::Zero(1);
    const ProblemInstance p = make_i(d, 1, x0, y0, 1.0, 0.0, Mat::Zero(d, 1), 3, r);
    const auto exact = analytic_moments(p);
    REQUIRE(exact.has_value());
    const BoundInputs in = estimate_inputs(p, 200000, 1);
    CHECK(exact->first == doctest::Approx(r * r * d / (d + 2.0)).epsilon(1e-12));
    CHECK(std::abs(in.e_gx2 - r * r * d / (d + 2.0)) <= 5 * in.e_gx2_stderr + 1e-15);
  }
  const ProblemInstance clean = make_i(2, 1, Vec::Zero(2), Vec::Zero(1), 1.0, 0.3,
                                       Mat::Identity(2, 1), 3, 0.0);
  const BoundInputs in = estimate_inputs(clean, 10000, 1);
  CHECK(in.e_gx2 == 0.0);
  CHECK(in.e_gy2 == 0.0);
  CHECK(in.B_x_star == 0.0);
}

TEST_CASE("trial seeds") {
  CHECK(trial_seed(1, 100, 3) == trial_seed(4, 100, 0));
  CHECK(trial_seed(1, 100, 0) != trial_seed(1, 200, 0));
  CHECK(trial_seed(1, 100, 0) != trial_seed(1, 100, 1));
}

TEST_CASE("calibration") {
  SUBCASE("no noise needs no localization constant") {
    CHECK(calibrate_constant(q_example(0.0), {10, 20}, 5, 0.9, 1) == 0.0);
  }
  SUBCASE("calibrated C attains the target coverage on the same trials") {
    std::mt19937_64 rng(61);
    const ProblemInstance p = random_q(rng, 2.0);
    const std::vector<std::int64_t> grid{16, 64, 256};
    CalibrationOptions opt;
    opt.mc_samples = 20000;
    opt.threads = 1;
    const double C = calibrate_constant(p, grid, 20, 0.9, 3, opt);
    CHECK(C >= 0);
    opt.threads = 4;
    CHECK(calibrate_constant(p, grid, 20, 0.9, 3, opt) == C);

    ExperimentConfig cfg(p);
    cfg.solver.algorithm = Algorithm::ESP;
    cfg.n_grid = grid;
    cfg.trials = 20;
    cfg.base_seed = 3;
    cfg.fixed_x = Vec::Zero(p.dim_x());
    cfg.threads = 1;
    BoundInputs in = estimate_inputs(p, opt.mc_samples, opt.mc_seed);
    in.delta = opt.delta;
    const CoverageResult cov = coverage_study(cfg, "uniform_gap", C, in);
    for (double c : cov.per_n) CHECK(c >= 0.9);
  }
  CHECK_THROWS_AS(calibrate_constant(q_example(), {}, 5, 0.9, 1), ConfigError);
  CHECK_THROWS_AS(calibrate_constant(q_example(), {10}, 5, 1.0, 1), ConfigError);
}
