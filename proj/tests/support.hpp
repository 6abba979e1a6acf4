#pragma once

#include <random>

#include "minimax/problems.hpp"

namespace minimax::testing {

inline Vec gaussian_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Mat gaussian_mat(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

// Random matrix with spectral norm exactly `norm`.
inline Mat contraction(std::mt19937_64& rng, int rows, int cols, double norm = 1.0) {
  Mat m = gaussian_mat(rng, rows, cols);
  Eigen::JacobiSVD<Mat> svd(m);
  return m * (norm / svd.singularValues()(0));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline ProblemInstance random_q(std::mt19937_64& rng, double noise = 1.0) {
  const int d = uniform_int(rng, 1, 4);
  const int dp = uniform_int(rng, 1, 4);
  return make_q(d, dp, uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), uniform(rng, 0.0, 1.0),
                contraction(rng, d, dp, uniform(rng, 0.2, 1.0)), gaussian_vec(rng, d),
                gaussian_vec(rng, dp), noise);
}

// A = B C with inner dimension d - 1, so rank(A) < d.
inline ProblemInstance random_p(std::mt19937_64& rng, double noise = 0.5) {
  const int d = uniform_int(rng, 2, 4);
  const int dp = uniform_int(rng, 1, 3);
  const int m = uniform_int(rng, 2, 4);
  const Mat A = gaussian_mat(rng, m, d - 1) * gaussian_mat(rng, d - 1, d) / std::sqrt(d);
  return make_p(d, dp, A, uniform(rng, 0.5, 2.0), uniform(rng, 0.0, 1.0),
                gaussian_mat(rng, m, dp) * 0.5, noise, gaussian_vec(rng, m), gaussian_vec(rng, dp));
}

inline ProblemInstance random_i(std::mt19937_64& rng, double noise = 0.1) {
  const int d = uniform_int(rng, 1, 4);
  const int dp = uniform_int(rng, 1, 3);
  return make_i(d, dp, gaussian_vec(rng, d), gaussian_vec(rng, dp), uniform(rng, 0.5, 2.0),
                uniform(rng, 0.0, 1.0), contraction(rng, d, dp, uniform(rng, 0.2, 1.0)), rng(),
                noise);
}

inline ProblemInstance q_example(double noise = 0.0, double lambda = 0.5) {
  Vec a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  return make_q(2, 2, 1.0, 1.0, lambda, Mat::Identity(2, 2), a, b, noise);
}

}  // namespace minimax::testing
