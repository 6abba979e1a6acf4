#include "minimax/serialize.hpp"

#include <cmath>
#include <set>

#include <fmt/core.h>

#include "minimax/errors.hpp"

namespace minimax {

void JsonView::fail(const std::string& message) const {
  throw ConfigError(path_ + ": " + message);
}

bool JsonView::has(const std::string& key) const {
  return value_->is_object() && value_->contains(key);
}

JsonView JsonView::at(const std::string& key) const {
  if (!value_->is_object()) fail("expected an object");
  auto it = value_->find(key);
  if (it == value_->end()) JsonView(*value_, path_ + "." + key).fail("required field is missing");
  return JsonView(*it, path_ + "." + key);
}

JsonView JsonView::at(std::size_t index) const {
  if (!value_->is_array()) fail("expected an array");
  if (index >= value_->size()) fail(fmt::format("index {} out of range", index));
  return JsonView((*value_)[index], fmt::format("{}[{}]", path_, index));
}

std::size_t JsonView::size() const {
  if (!value_->is_array()) fail("expected an array");
  return value_->size();
}

void JsonView::allow_only(std::initializer_list<const char*> keys) const {
  if (!value_->is_object()) fail("expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = value_->begin(); it != value_->end(); ++it) {
    if (!allowed.count(it.key())) JsonView(it.value(), path_ + "." + it.key()).fail("unknown field");
  }
}

double JsonView::number() const {
  if (!value_->is_number()) fail("expected a number");
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("expected a finite number");
  return v;
}

std::int64_t JsonView::integer() const {
  if (value_->is_number_integer()) return value_->get<std::int64_t>();
  if (value_->is_number_float()) {
    const double v = value_->get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) {
      return static_cast<std::int64_t>(v);
    }
  }
  fail("expected an integer");
}

std::uint64_t JsonView::unsigned_integer() const {
  if (value_->is_number_unsigned()) return value_->get<std::uint64_t>();
  const std::int64_t v = integer();
  if (v < 0) fail("expected a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

bool JsonView::boolean() const {
  if (!value_->is_boolean()) fail("expected true or false");
  return value_->get<bool>();
}

std::string JsonView::string() const {
  if (!value_->is_string()) fail("expected a string");
  return value_->get<std::string>();
}

Vec JsonView::vec() const {
  const std::size_t n = size();
  Vec v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = at(i).number();
  return v;
}

Mat JsonView::mat() const {
  const std::size_t rows = size();
  if (rows == 0) fail("matrix must have at least one row");
  const std::size_t cols = at(0).size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const JsonView row = at(r);
    if (row.size() != cols) row.fail(fmt::format("expected {} columns", cols));
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).number();
    }
  }
  return m;
}

std::vector<std::int64_t> JsonView::int_list() const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).integer());
  return out;
}

std::vector<std::string> JsonView::string_list() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).string());
  return out;
}

double JsonView::number_or(const std::string& key, double fallback) const {
  return has(key) ? at(key).number() : fallback;
}
std::int64_t JsonView::integer_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? at(key).integer() : fallback;
}
std::uint64_t JsonView::unsigned_or(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? at(key).unsigned_integer() : fallback;
}
bool JsonView::boolean_or(const std::string& key, bool fallback) const {
  return has(key) ? at(key).boolean() : fallback;
}
std::string JsonView::string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).string() : fallback;
}

void check_schema_version(const JsonView& root) {
  if (!root.raw().is_object()) root.fail("expected an object");
  const JsonView v = root.at("schema_version");
  if (v.integer() != 1) v.fail("unsupported schema_version (expected 1)");
}

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vec(m.row(r).transpose())));
  return out;
}

namespace {

// Rectangular identity, the default coupling.
Mat default_coupling(int rows, int cols) { return Mat::Identity(rows, cols); }

Mat coupling_or_default(const JsonView& params, int rows, int cols) {
  return params.has("M") ? params.at("M").mat() : default_coupling(rows, cols);
}

Vec vec_or_zero(const JsonView& params, const std::string& key, int size) {
  return params.has(key) ? params.at(key).vec() : Vec::Zero(size);
}

}  // namespace

json problem_to_json(const ProblemInstance& problem) {
  json params = json::object();
  switch (problem.family()) {
    case Family::Q: {
      const QParams& q = problem.q();
      params = {{"mu_x", q.mu_x}, {"mu_y", q.mu_y}, {"lambda", q.lambda},
                {"M", to_json(q.M)}, {"a_bar", to_json(q.a_bar)}, {"b_bar", to_json(q.b_bar)}};
      break;
    }
    case Family::P: {
      const PParams& p = problem.p();
      params = {{"A", to_json(p.A)},         {"mu_y", p.mu_y},
                {"lambda", p.lambda},         {"M", to_json(p.M)},
                {"a_bar", to_json(p.a_bar)},  {"b_bar", to_json(p.b_bar)}};
      break;
    }
    case Family::I: {
      const IParams& i = problem.i();
      params = {{"x0", to_json(i.x0)},     {"y0", to_json(i.y0)},
                {"mu_y", i.mu_y},          {"lambda", i.lambda},
                {"M", to_json(i.M)},       {"covariance_seed", i.covariance_seed}};
      break;
    }
  }
  json out = {{"family", to_string(problem.family())},
              {"dims", {problem.dim_x(), problem.dim_y()}},
              {"params", params},
              {"noise_scale", problem.noise_scale()},
              {"noise_law", to_string(problem.noise_law())}};
  if (problem.domain()) {
    out["domain"] = {{"radius_x", problem.domain()->radius_x},
                     {"radius_y", problem.domain()->radius_y}};
  }
  return out;
}

ProblemInstance problem_from_json(const JsonView& view) {
  view.allow_only({"family", "dims", "params", "noise_scale", "noise_law", "domain"});
  const std::string family = view.at("family").string();
  const JsonView dims = view.at("dims");
  if (dims.size() != 2) dims.fail("expected [d, dprime]");
  const std::int64_t d64 = dims.at(0).integer();
  const std::int64_t dp64 = dims.at(1).integer();
  if (d64 < 1 || dp64 < 1 || d64 > 100000 || dp64 > 100000) dims.fail("dimensions must be positive");
  const int d = static_cast<int>(d64);
  const int dp = static_cast<int>(dp64);
  const double noise = view.number_or("noise_scale", 0.0);
  const JsonView params = view.at("params");

  auto build = [&]() -> ProblemInstance {
    try {
      if (family == "Q") {
        params.allow_only({"mu_x", "mu_y", "lambda", "M", "a_bar", "b_bar"});
        return make_q(d, dp, params.at("mu_x").number(), params.at("mu_y").number(),
                      params.number_or("lambda", 0.0), coupling_or_default(params, d, dp),
                      vec_or_zero(params, "a_bar", d), vec_or_zero(params, "b_bar", dp), noise);
      }
      if (family == "P") {
        params.allow_only({"A", "mu_y", "lambda", "M", "a_bar", "b_bar"});
        const Mat A = params.at("A").mat();
        const int m = static_cast<int>(A.rows());
        return make_p(d, dp, A, params.at("mu_y").number(), params.number_or("lambda", 0.0),
                      coupling_or_default(params, m, dp), noise,
                      params.has("a_bar") ? params.at("a_bar").vec() : Vec(),
                      params.has("b_bar") ? params.at("b_bar").vec() : Vec());
      }
      if (family == "I") {
        params.allow_only({"x0", "y0", "mu_y", "lambda", "M", "covariance_seed"});
        return make_i(d, dp, vec_or_zero(params, "x0", d), vec_or_zero(params, "y0", dp),
                      params.at("mu_y").number(), params.number_or("lambda", 0.0),
                      coupling_or_default(params, d, dp), params.unsigned_or("covariance_seed", 0),
                      noise);
      }
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      if (what.rfind("$", 0) == 0) throw;
      // Point at the parameter the constructor complained about when it names one.
      for (const auto& [key, _] : params.raw().items()) {
        if (what.rfind(key + " ", 0) == 0) params.at(key).fail(what);
      }
      if (what.rfind("noise_scale ", 0) == 0 && view.has("noise_scale")) {
        view.at("noise_scale").fail(what);
      }
      params.fail(what);
    }
    view.at("family").fail("expected \"Q\", \"P\" or \"I\"");
  };
  ProblemInstance problem = build();

  const std::string law = view.string_or("noise_law", "ball");
  if (law == "gaussian") {
    problem = problem.with_noise_law(NoiseLaw::Gaussian);
  } else if (law != "ball") {
    view.at("noise_law").fail("expected \"ball\" or \"gaussian\"");
  }
  if (view.has("domain")) {
    const JsonView dom = view.at("domain");
    dom.allow_only({"radius_x", "radius_y"});
    try {
      problem = problem.with_domain({dom.at("radius_x").number(), dom.at("radius_y").number()});
    } catch (const ConfigError& e) {
      if (std::string(e.what()).rfind("$", 0) == 0) throw;
      dom.fail(e.what());
    }
  }
  return problem;
}

json to_json(const ProblemConstants& k) {
  return {{"mu_x", k.mu_x}, {"mu_y", k.mu_y}, {"beta", k.beta},   {"L", number(k.L)},
          {"D_X", k.D_X},   {"D_Y", k.D_Y},   {"R1", k.R1},       {"d", k.d},
          {"dprime", k.dp}, {"radius_x", k.radii.radius_x}, {"radius_y", k.radii.radius_y}};
}

json to_json(const AssumptionReport& report) {
  json checks = json::array();
  for (const AssumptionCheck& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"assumption", c.assumption},
                      {"claimed", c.claimed},
                      {"applicable", c.applicable},
                      {"passed", c.passed},
                      {"observed", number(c.observed)},
                      {"limit", number(c.limit)},
                      {"detail", c.detail}});
  }
  return {{"family", to_string(report.family)},
          {"claimed_passed", report.claimed_passed()},
          {"checks", checks}};
}

json to_json(const SaddlePoint& sp) {
  return {{"x", to_json(sp.point.x)},
          {"y", to_json(sp.point.y)},
          {"grad_residual", number(sp.grad_residual)},
          {"method", to_string(sp.method)}};
}

json to_json(const GapReport& report) {
  return {{"x", to_json(report.x)},
          {"gap", number(report.gap)},
          {"pop_grad_norm", number(report.pop_grad_norm)},
          {"emp_grad_norm", number(report.emp_grad_norm)}};
}

namespace {

json to_json(const StepSchedule& s) {
  return {{"scale", s.scale}, {"offset", s.offset}, {"decaying", s.decaying}};
}

}  // namespace

json to_json(const Trajectory& traj) {
  return {{"algorithm", to_string(traj.algorithm)},
          {"T", traj.T},
          {"steps", {{"x", to_json(traj.steps.x)}, {"y", to_json(traj.steps.y)}, {"t0", traj.steps.t0}}},
          {"records", traj.iterates.size()},
          {"x_bar", to_json(traj.x_bar)},
          {"final", {{"x", to_json(traj.final.x)}, {"y", to_json(traj.final.y)}}},
          {"wall_ms", traj.wall_ms}};
}

std::string iterates_csv(const Trajectory& traj) {
  std::string out = "t";
  const Eigen::Index d = traj.final.x.size();
  const Eigen::Index dp = traj.final.y.size();
  for (Eigen::Index i = 0; i < d; ++i) out += fmt::format(",x{}", i + 1);
  for (Eigen::Index i = 0; i < dp; ++i) out += fmt::format(",y{}", i + 1);
  out += ",grad_phi_s_norm\n";
  for (const IterateRecord& r : traj.iterates) {
    out += fmt::format("{}", r.t);
    for (Eigen::Index i = 0; i < d; ++i) out += fmt::format(",{:.17g}", r.x(i));
    for (Eigen::Index i = 0; i < dp; ++i) out += fmt::format(",{:.17g}", r.y(i));
    out += fmt::format(",{:.17g}\n", r.grad_phi_s_norm);
  }
  return out;
}

json to_json(const BoundInputs& in) {
  json out = {{"e_gx2", in.e_gx2},       {"e_gy2", in.e_gy2},   {"B_x_star", in.B_x_star},
              {"B_y_star", in.B_y_star}, {"sigma2", in.sigma2}, {"C", in.C},
              {"delta", in.delta},       {"constants", to_json(in.constants)}};
  if (in.mc_samples > 0) {
    out["mc_samples"] = in.mc_samples;
    out["e_gx2_stderr"] = in.e_gx2_stderr;
    out["e_gy2_stderr"] = in.e_gy2_stderr;
  }
  if (in.analytic_e_gx2) out["analytic_e_gx2"] = *in.analytic_e_gx2;
  if (in.analytic_e_gy2) out["analytic_e_gy2"] = *in.analytic_e_gy2;
  return out;
}

BoundInputs bound_inputs_from_json(const JsonView& view, const ProblemConstants& k) {
  view.allow_only({"e_gx2", "e_gy2", "B_x_star", "B_y_star", "sigma2"});
  BoundInputs in;
  in.constants = k;
  auto nonneg = [&](const char* key) {
    const double v = view.at(key).number();
    if (v < 0) view.at(key).fail("must be nonnegative");
    return v;
  };
  in.e_gx2 = nonneg("e_gx2");
  in.e_gy2 = nonneg("e_gy2");
  in.B_x_star = nonneg("B_x_star");
  in.B_y_star = nonneg("B_y_star");
  in.sigma2 = view.has("sigma2") ? nonneg("sigma2") : in.e_gx2 + in.e_gy2;
  return in;
}

json to_json(const BoundReport& report) {
  json terms = json::object();
  for (const auto& [name, v] : report.terms) terms[name] = number(v);
  json out = {{"name", report.name},
              {"value", number(report.value)},
              {"terms", terms},
              {"n", report.n},
              {"x_dist", report.x_dist}};
  if (report.n_min) {
    out["n_min"] = *report.n_min;
    out["threshold_ok"] = report.threshold_ok;
  }
  return out;
}

json to_json(const RateFit& fit) {
  json per_n = json::array();
  for (std::size_t i = 0; i < fit.n.size(); ++i) {
    per_n.push_back({{"n", fit.n[i]}, {"mean", number(fit.mean[i])}, {"median", number(fit.median[i])}});
  }
  return {{"measurement", fit.measurement},
          {"slope", fit.slope},
          {"intercept", fit.intercept},
          {"stderr", fit.stderr_slope},
          {"points_used", fit.points_used},
          {"points_excluded", fit.points_excluded},
          {"dropped_n", fit.dropped_n},
          {"r_squared", fit.r_squared},
          {"per_n", per_n}};
}

json to_json(const CoverageResult& result) {
  json per_n = json::array();
  for (std::size_t i = 0; i < result.n.size(); ++i) {
    per_n.push_back({{"n", result.n[i]}, {"coverage", number(result.per_n[i])}});
  }
  return {{"bound", result.bound}, {"C", result.C}, {"coverage", number(result.coverage)},
          {"per_n", per_n}};
}

SolverConfig solver_config_from_json(const JsonView& view) {
  view.allow_only({"algorithm", "eta_x", "eta_y", "t0", "agda_cx", "agda_cy", "projection",
                   "record_every", "record_stationarity", "tol"});
  SolverConfig cfg;
  try {
    cfg.algorithm = algorithm_from_string(view.at("algorithm").string());
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind("$", 0) == 0) throw;
    view.at("algorithm").fail(e.what());
  }
  auto positive = [&](const char* key) {
    const double v = view.at(key).number();
    if (!(v > 0)) view.at(key).fail("must be positive");
    return v;
  };
  if (view.has("eta_x")) cfg.eta_x = positive("eta_x");
  if (view.has("eta_y")) cfg.eta_y = positive("eta_y");
  if (view.has("t0")) {
    const std::int64_t t0 = view.at("t0").integer();
    if (t0 < 0) view.at("t0").fail("must be nonnegative");
    cfg.t0 = t0;
  }
  if (view.has("agda_cx")) cfg.agda_cx = positive("agda_cx");
  if (view.has("agda_cy")) cfg.agda_cy = positive("agda_cy");
  if (view.has("projection")) {
    const JsonView p = view.at("projection");
    p.allow_only({"radius_x", "radius_y"});
    const double rx = p.at("radius_x").number();
    const double ry = p.at("radius_y").number();
    if (!(rx > 0) || !(ry > 0)) p.fail("radii must be positive");
    cfg.projection = DomainRadii{rx, ry};
  }
  cfg.record_every = view.integer_or("record_every", 1);
  if (cfg.record_every < 1) view.at("record_every").fail("must be at least 1");
  cfg.record_stationarity = view.boolean_or("record_stationarity", false);
  if (view.has("tol")) cfg.tol = positive("tol");
  return cfg;
}

ExperimentConfig experiment_config_from_json(const JsonView& root) {
  check_schema_version(root);
  root.allow_only({"schema_version", "problem", "solver", "n_grid", "trials", "T_rule",
                   "measurements", "base_seed", "fixed_x", "output", "bounds", "bound_C",
                   "bound_delta", "bound_mc_samples", "bound_inputs", "threads",
                   "record_wall_time"});
  ExperimentConfig cfg(problem_from_json(root.at("problem")));
  cfg.solver = solver_config_from_json(root.at("solver"));
  cfg.n_grid = root.at("n_grid").int_list();
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 1) root.at("n_grid").at(i).fail("must be positive");
    if (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]) {
      root.at("n_grid").at(i).fail("n_grid must be strictly increasing");
    }
  }
  if (cfg.n_grid.empty()) root.at("n_grid").fail("must not be empty");
  const std::int64_t trials = root.integer_or("trials", 1);
  if (trials < 1 || trials > 1000000) root.at("trials").fail("must be in [1, 10^6]");
  cfg.trials = static_cast<int>(trials);
  if (root.has("T_rule")) {
    const JsonView t = root.at("T_rule");
    t.allow_only({"kind", "k"});
    try {
      cfg.t_rule.kind = t_rule_from_string(t.at("kind").string());
    } catch (const ConfigError& e) {
      if (std::string(e.what()).rfind("$", 0) == 0) throw;
      t.at("kind").fail(e.what());
    }
    cfg.t_rule.k = t.number_or("k", 1.0);
    if (!(cfg.t_rule.k > 0)) t.at("k").fail("must be positive");
  } else if (cfg.solver.algorithm != Algorithm::ESP) {
    root.at("T_rule").fail("required for iterative solvers");
  }
  if (root.has("measurements")) {
    const JsonView ms = root.at("measurements");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      try {
        cfg.measurements.push_back(measurement_from_string(ms.at(i).string()));
      } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind("$", 0) == 0) throw;
        ms.at(i).fail(e.what());
      }
    }
  }
  cfg.base_seed = root.unsigned_or("base_seed", 0);
  if (root.has("fixed_x")) {
    cfg.fixed_x = root.at("fixed_x").vec();
    if (cfg.fixed_x->size() != cfg.problem.dim_x()) root.at("fixed_x").fail("wrong dimension");
  }
  const std::string output = root.string_or("output", "average");
  if (output == "last") {
    cfg.output = OutputIterate::Last;
  } else if (output != "average") {
    root.at("output").fail("expected \"average\" or \"last\"");
  }
  if (root.has("bounds")) {
    cfg.bounds = root.at("bounds").string_list();
    for (std::size_t i = 0; i < cfg.bounds.size(); ++i) {
      const std::string& b = cfg.bounds[i];
      if (b != "uniform_gap" && b != "pl_gap" && b != "excess_pl" && b != "lipschitz_gap") {
        root.at("bounds").at(i).fail("unknown bound");
      }
    }
  }
  cfg.bound_C = root.number_or("bound_C", 1.0);
  if (cfg.bound_C < 0) root.at("bound_C").fail("must be nonnegative");
  cfg.bound_delta = root.number_or("bound_delta", 0.05);
  if (!(cfg.bound_delta > 0 && cfg.bound_delta < 1)) root.at("bound_delta").fail("must lie in (0, 1)");
  cfg.bound_mc_samples = root.integer_or("bound_mc_samples", 100000);
  if (cfg.bound_mc_samples < 10000) root.at("bound_mc_samples").fail("must be at least 10^4");
  if (root.has("bound_inputs")) {
    cfg.bound_inputs = bound_inputs_from_json(root.at("bound_inputs"), constants(cfg.problem));
  }
  const std::int64_t threads = root.integer_or("threads", 0);
  if (threads < 0 || threads > 4096) root.at("threads").fail("must be in [0, 4096]");
  cfg.threads = static_cast<unsigned>(threads);
  cfg.record_wall_time = root.boolean_or("record_wall_time", false);
  if (cfg.measurements.empty() && cfg.bounds.empty()) root.at("measurements").fail("nothing to measure");
  return cfg;
}

json experiment_config_to_json(const ExperimentConfig& config) {
  json measurements = json::array();
  for (Measurement m : config.measurements) measurements.push_back(to_string(m));
  json solver = {{"algorithm", to_string(config.solver.algorithm)},
                 {"record_every", config.solver.record_every},
                 {"tol", config.solver.tol}};
  if (config.solver.eta_x) solver["eta_x"] = *config.solver.eta_x;
  if (config.solver.eta_y) solver["eta_y"] = *config.solver.eta_y;
  if (config.solver.t0) solver["t0"] = *config.solver.t0;
  if (config.solver.algorithm == Algorithm::AGDA) {
    solver["agda_cx"] = config.solver.agda_cx;
    solver["agda_cy"] = config.solver.agda_cy;
  }
  if (config.solver.projection) {
    solver["projection"] = {{"radius_x", config.solver.projection->radius_x},
                            {"radius_y", config.solver.projection->radius_y}};
  }
  json out = {{"schema_version", 1},
              {"problem", problem_to_json(config.problem)},
              {"solver", solver},
              {"n_grid", config.n_grid},
              {"trials", config.trials},
              {"T_rule", {{"kind", to_string(config.t_rule.kind)}, {"k", config.t_rule.k}}},
              {"measurements", measurements},
              {"base_seed", config.base_seed},
              {"output", config.output == OutputIterate::Average ? "average" : "last"}};
  if (config.fixed_x) out["fixed_x"] = to_json(*config.fixed_x);
  if (!config.bounds.empty()) {
    out["bounds"] = config.bounds;
    out["bound_C"] = config.bound_C;
    out["bound_delta"] = config.bound_delta;
    out["bound_mc_samples"] = config.bound_mc_samples;
  }
  return out;
}

}  // namespace minimax
