#include "minimax/problems.hpp"

#include <algorithm>
#include <utility>

#include <fmt/core.h>

#include "minimax/errors.hpp"
#include "minimax/oracles.hpp"

namespace minimax {

namespace {

constexpr double kRankTol = 1e-10;

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

double symmetric_spectral_norm(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw RuntimeFailure("eigensolve failed");
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

bool all_finite(const Mat& m) { return m.allFinite(); }

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_coupling(const Mat& M, int rows, int cols, bool require_contraction) {
  require(M.rows() == rows && M.cols() == cols,
          fmt::format("coupling matrix M must be {}x{}, got {}x{}", rows, cols, M.rows(),
                      M.cols()));
  require(all_finite(M), "coupling matrix M must be finite");
  if (require_contraction) {
    const double norm = spectral_norm(M);
    require(norm <= 1.0 + 1e-12,
            fmt::format("coupling matrix M must have spectral norm <= 1, got {}", norm));
  }
}

// E|u|^2 for one draw of the unit noise law in `dim` dimensions.
double unit_second_moment(NoiseLaw law, int dim) {
  return law == NoiseLaw::Ball ? static_cast<double>(dim) / (dim + 2.0)
                               : static_cast<double>(dim);
}

double certified_mu_x(const ProblemInstance& problem) {
  switch (problem.family()) {
    case Family::Q:
      return problem.q().mu_x;
    case Family::P:
      return problem.p().mu_x;
    case Family::I: {
      const Mat& G = problem.i().G;
      Eigen::SelfAdjointEigenSolver<Mat> eig(G * G.transpose(), Eigen::EigenvaluesOnly);
      return eig.eigenvalues()(0);
    }
  }
  return 0.0;
}

// Smoothness constant. Q and P have a constant Hessian. For I the Hessian
// [[aa', l aa'M], [l M'aa', -mu_y I]] equals pp' - diag(0, l^2 M'aa'M + mu_y I) with
// p = (a, l M'a); its norm is at most max(|p|^2, l^2|M'a|^2 + mu_y), maximized over
// the support |w|^2 = d.
double certified_beta(const ProblemInstance& problem) {
  if (problem.family() != Family::I) {
    return symmetric_spectral_norm(population_objective(problem).hessian());
  }
  const IParams& ip = problem.i();
  const int d = problem.dim_x();
  const double l2 = ip.lambda * ip.lambda;
  const Mat weighted =
      ip.G.transpose() * (Mat::Identity(d, d) + l2 * ip.M * ip.M.transpose()) * ip.G;
  const double top = d * symmetric_spectral_norm(weighted);
  const double mg = spectral_norm(ip.M.transpose() * ip.G);
  const double bottom = d * l2 * mg * mg + ip.mu_y;
  return std::max(top, bottom);
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Q:
      return "Q";
    case Family::P:
      return "P";
    case Family::I:
      return "I";
  }
  return "?";
}

std::string to_string(NoiseLaw law) { return law == NoiseLaw::Ball ? "ball" : "gaussian"; }

ProblemInstance::ProblemInstance(Family family, int d, int dp, Params params, double noise_scale)
    : family_(family), d_(d), dp_(dp), params_(std::move(params)), noise_scale_(noise_scale) {}

int ProblemInstance::payload_dim() const {
  switch (family_) {
    case Family::Q:
      return d_ + dp_;
    case Family::P:
      return static_cast<int>(p().A.rows()) + dp_;
    case Family::I:
      return 2 * d_;
  }
  return 0;
}

double ProblemInstance::mu_y() const {
  return std::visit([](const auto& p) { return p.mu_y; }, params_);
}

double ProblemInstance::lambda() const {
  return std::visit([](const auto& p) { return p.lambda; }, params_);
}

const Mat& ProblemInstance::coupling() const {
  return std::visit([](const auto& p) -> const Mat& { return p.M; }, params_);
}

ProblemInstance ProblemInstance::with_domain(DomainRadii radii) const {
  require(radii.radius_x > 0 && radii.radius_y > 0 && std::isfinite(radii.radius_x) &&
              std::isfinite(radii.radius_y),
          "domain radii must be positive and finite");
  ProblemInstance copy = *this;
  copy.domain_ = radii;
  return copy;
}

ProblemInstance ProblemInstance::with_noise_law(NoiseLaw law) const {
  ProblemInstance copy = *this;
  copy.law_ = law;
  return copy;
}

ProblemInstance make_q(int d, int dp, double mu_x, double mu_y, double lambda, const Mat& M,
                       const Vec& a_bar, const Vec& b_bar, double noise_scale) {
  require(d >= 1 && dp >= 1, "dimensions must be positive");
  require(mu_x > 0 && std::isfinite(mu_x), "mu_x must be positive");
  require(mu_y > 0 && std::isfinite(mu_y), "mu_y must be positive");
  require(std::isfinite(lambda), "lambda must be finite");
  require(noise_scale >= 0 && std::isfinite(noise_scale), "noise_scale must be nonnegative");
  check_coupling(M, d, dp, true);
  require(a_bar.size() == d && a_bar.allFinite(), fmt::format("a_bar must have length {}", d));
  require(b_bar.size() == dp && b_bar.allFinite(), fmt::format("b_bar must have length {}", dp));
  return ProblemInstance(Family::Q, d, dp, QParams{mu_x, mu_y, lambda, M, a_bar, b_bar},
                         noise_scale);
}

ProblemInstance make_p(int d, int dp, const Mat& A, double mu_y, double lambda, const Mat& M,
                       double noise_scale, const Vec& a_bar, const Vec& b_bar) {
  require(d >= 1 && dp >= 1, "dimensions must be positive");
  require(A.cols() == d && A.rows() >= 1 && all_finite(A),
          fmt::format("A must have {} columns and finite entries", d));
  require(mu_y > 0 && std::isfinite(mu_y), "mu_y must be positive");
  require(std::isfinite(lambda), "lambda must be finite");
  require(noise_scale >= 0 && std::isfinite(noise_scale), "noise_scale must be nonnegative");
  const int m = static_cast<int>(A.rows());
  check_coupling(M, m, dp, false);

  Eigen::SelfAdjointEigenSolver<Mat> eig(A.transpose() * A, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw RuntimeFailure("eigensolve of A'A failed");
  const Vec& ev = eig.eigenvalues();
  int rank = 0;
  double smallest = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > kRankTol) {
      ++rank;
      smallest = std::min(smallest, ev(k));
    }
  }
  require(rank < d, fmt::format("A must be rank deficient (rank {} < d = {})", rank, d));
  require(rank > 0, "A must not be zero");

  Vec a = a_bar.size() == 0 ? Vec::Zero(m) : a_bar;
  Vec b = b_bar.size() == 0 ? Vec::Zero(dp) : b_bar;
  require(a.size() == m && a.allFinite(), fmt::format("a_bar must have length {}", m));
  require(b.size() == dp && b.allFinite(), fmt::format("b_bar must have length {}", dp));
  return ProblemInstance(Family::P, d, dp, PParams{A, mu_y, lambda, M, a, b, smallest},
                         noise_scale);
}

ProblemInstance make_i(int d, int dp, const Vec& x0, const Vec& y0, double mu_y, double lambda,
                       const Mat& M, std::uint64_t covariance_seed, double noise_scale) {
  require(d >= 1 && dp >= 1, "dimensions must be positive");
  require(x0.size() == d && x0.allFinite(), fmt::format("x0 must have length {}", d));
  require(y0.size() == dp && y0.allFinite(), fmt::format("y0 must have length {}", dp));
  require(mu_y > 0 && std::isfinite(mu_y), "mu_y must be positive");
  require(std::isfinite(lambda), "lambda must be finite");
  require(noise_scale >= 0 && std::isfinite(noise_scale), "noise_scale must be nonnegative");
  check_coupling(M, d, dp, true);

  // G = Q diag(s) with Q a random rotation and s in [0.8, 1.2]: E[aa'] is well conditioned.
  std::mt19937_64 rng(covariance_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  Mat gauss(d, d);
  for (int c = 0; c < d; ++c)
    for (int r = 0; r < d; ++r) gauss(r, c) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(gauss);
  Mat rotation = qr.householderQ() * Mat::Identity(d, d);
  Vec s(d);
  for (int k = 0; k < d; ++k) s(k) = scale(rng);
  Mat G = rotation * s.asDiagonal();

  return ProblemInstance(Family::I, d, dp, IParams{x0, y0, mu_y, lambda, M, covariance_seed, G},
                         noise_scale);
}

SampleStream::SampleStream(const ProblemInstance& problem, std::uint64_t seed)
    : problem_(&problem), rng_(seed) {}

void SampleStream::unit_noise(Eigen::Ref<Vec> out) {
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = normal_(rng_);
  if (problem_->noise_law() == NoiseLaw::Gaussian) return;
  const double norm = out.norm();
  const double radius = std::pow(uniform_(rng_), 1.0 / static_cast<double>(out.size()));
  if (norm > 0) out *= radius / norm;
}

Sample SampleStream::next() {
  const ProblemInstance& pr = *problem_;
  const double r = pr.noise_scale();
  Sample sample{Vec(pr.payload_dim())};
  Vec& z = sample.payload;
  switch (pr.family()) {
    case Family::Q: {
      const int d = pr.dim_x();
      const int dp = pr.dim_y();
      unit_noise(z.head(d));
      unit_noise(z.tail(dp));
      z.head(d) = pr.q().a_bar + r * z.head(d);
      z.tail(dp) = pr.q().b_bar + r * z.tail(dp);
      break;
    }
    case Family::P: {
      const int m = static_cast<int>(pr.p().A.rows());
      const int dp = pr.dim_y();
      unit_noise(z.head(m));
      unit_noise(z.tail(dp));
      z.head(m) = pr.p().a_bar + r * z.head(m);
      z.tail(dp) = pr.p().b_bar + r * z.tail(dp);
      break;
    }
    case Family::I: {
      const int d = pr.dim_x();
      Vec w(d);
      for (int k = 0; k < d; ++k) w(k) = normal_(rng_);
      const double norm = w.norm();
      if (norm > 0) w *= std::sqrt(static_cast<double>(d)) / norm;
      z.head(d) = pr.i().G * w;
      unit_noise(z.tail(d));
      z.tail(d) *= r;
      break;
    }
  }
  return sample;
}

Dataset sample_dataset(const ProblemInstance& problem, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("dataset size n must be at least 1");
  SampleStream stream(problem, seed);
  Dataset dataset;
  dataset.seed = seed;
  dataset.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) dataset.samples.push_back(stream.next());
  return dataset;
}

namespace {

void check_point(const ProblemInstance& problem, const Point& point, const Sample& sample) {
  if (point.x.size() != problem.dim_x() || point.y.size() != problem.dim_y()) {
    throw ConfigError(fmt::format("point dimensions ({}, {}) do not match problem ({}, {})",
                                  point.x.size(), point.y.size(), problem.dim_x(),
                                  problem.dim_y()));
  }
  if (sample.payload.size() != problem.payload_dim()) {
    throw ConfigError(fmt::format("sample payload has length {}, expected {}",
                                  sample.payload.size(), problem.payload_dim()));
  }
}

}  // namespace

double value(const ProblemInstance& problem, const Point& point, const Sample& sample) {
  check_point(problem, point, sample);
  const Vec& x = point.x;
  const Vec& y = point.y;
  const Vec& z = sample.payload;
  switch (problem.family()) {
    case Family::Q: {
      const QParams& q = problem.q();
      const auto za = z.head(problem.dim_x());
      const auto zb = z.tail(problem.dim_y());
      return 0.5 * q.mu_x * (x - za).squaredNorm() + q.lambda * x.dot(q.M * y) -
             0.5 * q.mu_y * (y - zb).squaredNorm();
    }
    case Family::P: {
      const PParams& p = problem.p();
      const Vec ax = p.A * x;
      const auto za = z.head(p.A.rows());
      const auto zb = z.tail(problem.dim_y());
      return 0.5 * (ax - za).squaredNorm() + p.lambda * ax.dot(p.M * y) -
             0.5 * p.mu_y * (y - zb).squaredNorm();
    }
    case Family::I: {
      const IParams& ip = problem.i();
      const int d = problem.dim_x();
      const auto a = z.head(d);
      const auto xi = z.tail(d);
      const Vec u = x - ip.x0;
      const Vec v = y - ip.y0;
      const double au = a.dot(u);
      return 0.5 * au * au + ip.lambda * au * a.dot(ip.M * v) - 0.5 * ip.mu_y * v.squaredNorm() +
             xi.dot(u);
    }
  }
  return 0.0;
}

Gradient grad(const ProblemInstance& problem, const Point& point, const Sample& sample) {
  check_point(problem, point, sample);
  const Vec& x = point.x;
  const Vec& y = point.y;
  const Vec& z = sample.payload;
  switch (problem.family()) {
    case Family::Q: {
      const QParams& q = problem.q();
      const auto za = z.head(problem.dim_x());
      const auto zb = z.tail(problem.dim_y());
      return {q.mu_x * (x - za) + q.lambda * (q.M * y),
              q.lambda * (q.M.transpose() * x) - q.mu_y * (y - zb)};
    }
    case Family::P: {
      const PParams& p = problem.p();
      const auto za = z.head(p.A.rows());
      const auto zb = z.tail(problem.dim_y());
      const Vec residual = p.A * x - za + p.lambda * (p.M * y);
      return {p.A.transpose() * residual,
              p.lambda * (p.M.transpose() * (p.A * x)) - p.mu_y * (y - zb)};
    }
    case Family::I: {
      const IParams& ip = problem.i();
      const int d = problem.dim_x();
      const auto a = z.head(d);
      const auto xi = z.tail(d);
      const Vec u = x - ip.x0;
      const Vec v = y - ip.y0;
      const double au = a.dot(u);
      const double amv = a.dot(ip.M * v);
      return {(au + ip.lambda * amv) * a + xi,
              (ip.lambda * au) * (ip.M.transpose() * a) - ip.mu_y * v};
    }
  }
  return {};
}

Moments sample_moments(const ProblemInstance& problem, const Sample& sample) {
  const Vec& z = sample.payload;
  Moments m;
  if (problem.family() == Family::I) {
    const int d = problem.dim_x();
    const auto a = z.head(d);
    m.second_a = a * a.transpose();
    m.mean_b = z.tail(d);
    return m;
  }
  const int dp = problem.dim_y();
  const Eigen::Index ma = z.size() - dp;
  m.mean_a = z.head(ma);
  m.mean_b = z.tail(dp);
  m.mean_a_sq = m.mean_a.squaredNorm();
  m.mean_b_sq = m.mean_b.squaredNorm();
  return m;
}

Moments population_moments(const ProblemInstance& problem) {
  const double r2 = problem.noise_scale() * problem.noise_scale();
  const NoiseLaw law = problem.noise_law();
  Moments m;
  switch (problem.family()) {
    case Family::Q:
    case Family::P: {
      const Vec& a = problem.family() == Family::Q ? problem.q().a_bar : problem.p().a_bar;
      const Vec& b = problem.family() == Family::Q ? problem.q().b_bar : problem.p().b_bar;
      m.mean_a = a;
      m.mean_b = b;
      m.mean_a_sq = a.squaredNorm() + r2 * unit_second_moment(law, static_cast<int>(a.size()));
      m.mean_b_sq = b.squaredNorm() + r2 * unit_second_moment(law, static_cast<int>(b.size()));
      break;
    }
    case Family::I: {
      const Mat& G = problem.i().G;
      m.second_a = G * G.transpose();
      m.mean_b = Vec::Zero(problem.dim_x());
      break;
    }
  }
  return m;
}

Moments empirical_moments(const ProblemInstance& problem, const Dataset& dataset) {
  if (dataset.size() == 0) throw ConfigError("empty dataset");
  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  Moments acc;
  const int dp = problem.dim_y();
  if (problem.family() == Family::I) {
    const int d = problem.dim_x();
    acc.second_a = Mat::Zero(d, d);
    acc.mean_b = Vec::Zero(d);
    for (const Sample& s : dataset.samples) {
      const auto a = s.payload.head(d);
      acc.second_a.noalias() += a * a.transpose();
      acc.mean_b += s.payload.tail(d);
    }
    acc.second_a *= inv_n;
    acc.mean_b *= inv_n;
    return acc;
  }
  const int ma = problem.payload_dim() - dp;
  acc.mean_a = Vec::Zero(ma);
  acc.mean_b = Vec::Zero(dp);
  for (const Sample& s : dataset.samples) {
    const auto a = s.payload.head(ma);
    const auto b = s.payload.tail(dp);
    acc.mean_a += a;
    acc.mean_b += b;
    acc.mean_a_sq += a.squaredNorm();
    acc.mean_b_sq += b.squaredNorm();
  }
  acc.mean_a *= inv_n;
  acc.mean_b *= inv_n;
  acc.mean_a_sq *= inv_n;
  acc.mean_b_sq *= inv_n;
  return acc;
}

Objective::Objective(int d, int dp, Mat H, Vec g, double c)
    : d_(d), dp_(dp), H_(std::move(H)), g_(std::move(g)), c_(c) {}

double Objective::value(const Vec& x, const Vec& y) const {
  Vec w(d_ + dp_);
  w << x, y;
  return 0.5 * w.dot(H_ * w) + g_.dot(w) + c_;
}

Gradient Objective::grad(const Vec& x, const Vec& y) const {
  Gradient out;
  out.gx.noalias() = hxx() * x + hxy() * y;
  out.gx += gx();
  out.gy.noalias() = hyx() * x + hyy() * y;
  out.gy += gy();
  return out;
}

Objective objective_from_moments(const ProblemInstance& problem, const Moments& m) {
  const int d = problem.dim_x();
  const int dp = problem.dim_y();
  Mat H = Mat::Zero(d + dp, d + dp);
  Vec g(d + dp);
  double c = 0.0;
  switch (problem.family()) {
    case Family::Q: {
      const QParams& q = problem.q();
      H.topLeftCorner(d, d) = q.mu_x * Mat::Identity(d, d);
      H.topRightCorner(d, dp) = q.lambda * q.M;
      H.bottomLeftCorner(dp, d) = q.lambda * q.M.transpose();
      H.bottomRightCorner(dp, dp) = -q.mu_y * Mat::Identity(dp, dp);
      g << -q.mu_x * m.mean_a, q.mu_y * m.mean_b;
      c = 0.5 * q.mu_x * m.mean_a_sq - 0.5 * q.mu_y * m.mean_b_sq;
      break;
    }
    case Family::P: {
      const PParams& p = problem.p();
      const Mat am = p.A.transpose() * p.M;
      H.topLeftCorner(d, d) = p.A.transpose() * p.A;
      H.topRightCorner(d, dp) = p.lambda * am;
      H.bottomLeftCorner(dp, d) = p.lambda * am.transpose();
      H.bottomRightCorner(dp, dp) = -p.mu_y * Mat::Identity(dp, dp);
      g << -(p.A.transpose() * m.mean_a), p.mu_y * m.mean_b;
      c = 0.5 * m.mean_a_sq - 0.5 * p.mu_y * m.mean_b_sq;
      break;
    }
    case Family::I: {
      const IParams& ip = problem.i();
      const Mat& S = m.second_a;
      const Mat sm = S * ip.M;
      H.topLeftCorner(d, d) = S;
      H.topRightCorner(d, dp) = ip.lambda * sm;
      H.bottomLeftCorner(dp, d) = ip.lambda * sm.transpose();
      H.bottomRightCorner(dp, dp) = -ip.mu_y * Mat::Identity(dp, dp);
      g.head(d) = -(S * ip.x0) - ip.lambda * (sm * ip.y0) + m.mean_b;
      g.tail(dp) = -ip.lambda * (sm.transpose() * ip.x0) + ip.mu_y * ip.y0;
      c = 0.5 * ip.x0.dot(S * ip.x0) + ip.lambda * ip.x0.dot(sm * ip.y0) -
          0.5 * ip.mu_y * ip.y0.squaredNorm() - m.mean_b.dot(ip.x0);
      break;
    }
  }
  return Objective(d, dp, std::move(H), std::move(g), c);
}

Objective population_objective(const ProblemInstance& problem) {
  return objective_from_moments(problem, population_moments(problem));
}

Objective empirical_objective(const ProblemInstance& problem, const Dataset& dataset) {
  return objective_from_moments(problem, empirical_moments(problem, dataset));
}

ProblemConstants constants(const ProblemInstance& problem) {
  ProblemConstants k;
  k.d = problem.dim_x();
  k.dp = problem.dim_y();
  k.mu_x = certified_mu_x(problem);
  k.mu_y = problem.mu_y();
  k.beta = certified_beta(problem);

  const SaddlePoint star = population_saddle(problem);
  const double xs = star.point.x.norm();
  const double ys = star.point.y.norm();
  k.radii = problem.domain().value_or(DomainRadii{2.0 * (xs + 1.0), 2.0 * (ys + 1.0)});
  const double rx = k.radii.radius_x;
  const double ry = k.radii.radius_y;
  k.D_X = rx * rx;
  k.D_Y = ry * ry;
  k.R1 = 2.0 * (xs + rx);

  if (problem.noise_law() == NoiseLaw::Gaussian && problem.noise_scale() > 0) {
    k.L = std::numeric_limits<double>::infinity();
  } else {
    const double r = problem.noise_scale();
    const double lam = std::abs(problem.lambda());
    const double mn = spectral_norm(problem.coupling());
    double lx = 0;
    double ly = 0;
    switch (problem.family()) {
      case Family::Q: {
        const QParams& q = problem.q();
        lx = q.mu_x * (rx + q.a_bar.norm() + r) + lam * mn * ry;
        ly = lam * mn * rx + q.mu_y * (ry + q.b_bar.norm() + r);
        break;
      }
      case Family::P: {
        const PParams& p = problem.p();
        const double an = spectral_norm(p.A);
        lx = an * (an * rx + p.a_bar.norm() + r + lam * mn * ry);
        ly = lam * mn * an * rx + p.mu_y * (ry + p.b_bar.norm() + r);
        break;
      }
      case Family::I: {
        const IParams& ip = problem.i();
        const double gn = spectral_norm(ip.G);
        const double a2 = k.d * gn * gn;
        const double un = rx + ip.x0.norm();
        const double vn = ry + ip.y0.norm();
        lx = a2 * (un + lam * mn * vn) + r;
        ly = lam * mn * a2 * un + ip.mu_y * vn;
        break;
      }
    }
    k.L = std::max(lx, ly);
  }

  if (!(k.beta >= k.mu_y * (1.0 - 1e-12))) {
    throw RuntimeFailure(fmt::format("beta = {} below mu_y = {}", k.beta, k.mu_y));
  }
  if (!(k.mu_x * k.mu_y <= k.beta * (k.mu_y + k.beta) * (1.0 + 1e-12))) {
    throw RuntimeFailure("constants violate mu_x mu_y <= beta (mu_y + beta)");
  }
  return k;
}

}  // namespace minimax
