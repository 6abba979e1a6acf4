#include "minimax/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "minimax/bounds.hpp"
#include "minimax/errors.hpp"
#include "minimax/experiments.hpp"
#include "minimax/serialize.hpp"

namespace minimax {

namespace {

namespace fs = std::filesystem;

enum class Verbosity { Quiet, Normal, Debug };

struct CliContext {
  std::string command;
  fs::path config_path;
  std::optional<fs::path> out_path;
  std::optional<int> threads;
  Verbosity verbosity = Verbosity::Normal;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  void log(Verbosity level, const std::string& line) const {
    if (verbosity >= level) *err << line << '\n';
  }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw RuntimeFailure(fmt::format("write to '{}' failed", path.string()));
}

json load_config(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: invalid JSON ({})", path.string(), e.what()));
  }
}

// JSON-producing commands write to --out when given, stdout otherwise.
void emit_json(const CliContext& ctx, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (ctx.out_path) {
    write_file(*ctx.out_path, text);
    ctx.log(Verbosity::Normal, fmt::format("wrote {}", ctx.out_path->string()));
  } else {
    *ctx.out << text;
  }
}

unsigned thread_request(const CliContext& ctx, unsigned from_config) {
  if (ctx.threads) {
    if (*ctx.threads < 0) throw ConfigError("--threads must be nonnegative");
    return static_cast<unsigned>(*ctx.threads);
  }
  if (const char* env = std::getenv("MINIMAX_RATES_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0 || v > 4096) {
      throw ConfigError(fmt::format("MINIMAX_RATES_THREADS='{}' is not a thread count", env));
    }
    return static_cast<unsigned>(v);
  }
  return from_config;
}

int cmd_certify(const CliContext& ctx, const JsonView& root) {
  root.allow_only({"schema_version", "problem", "num_probes", "seed", "tol"});
  const ProblemInstance problem = problem_from_json(root.at("problem"));
  const std::int64_t probes = root.integer_or("num_probes", 1000);
  if (probes < 100 || probes > 10000000) root.at("num_probes").fail("must be in [100, 10^7]");
  const double tol = root.number_or("tol", 1e-8);
  if (!(tol >= 0)) root.at("tol").fail("must be nonnegative");
  const AssumptionReport report =
      certify_assumptions(problem, static_cast<int>(probes), root.unsigned_or("seed", 0), tol);
  for (const AssumptionCheck& c : report.checks) {
    ctx.log(Verbosity::Normal,
            fmt::format("{:<22} {:<6} observed {:.6g} limit {:.6g}{}", c.name,
                        !c.applicable ? "n/a" : c.passed ? "pass" : "FAIL", c.observed, c.limit,
                        c.claimed ? "" : "  (not claimed)"));
  }
  emit_json(ctx, {{"command", "certify"},
                  {"problem", problem_to_json(problem)},
                  {"constants", to_json(constants(problem))},
                  {"report", to_json(report)}});
  if (!report.claimed_passed()) {
    *ctx.err << "error: a claimed assumption check failed\n";
    return 2;
  }
  return 0;
}

int cmd_experiment(const CliContext& ctx, const JsonView& root) {
  ExperimentConfig config = experiment_config_from_json(root);
  config.threads = thread_request(ctx, config.threads);
  ctx.log(Verbosity::Debug, fmt::format("threads: {}", resolve_threads(config.threads)));
  const RateTable table = run_experiment(config);

  json fits = json::object();
  std::vector<std::string> names;
  for (Measurement m : config.measurements) names.push_back(to_string(m));
  for (const std::string& b : config.bounds) names.push_back("bound:" + b);
  // One progress line per grid point.
  for (std::int64_t n : config.n_grid) {
    std::string line = fmt::format("n={}", n);
    for (const std::string& name : names) {
      double sum = 0;
      int count = 0;
      for (const RateRow& r : table.rows) {
        if (r.n == n && r.measurement == name && !r.diverged) {
          sum += r.value;
          ++count;
        }
      }
      line += fmt::format("  {}={:.6g}", name, count ? sum / count : std::nan(""));
    }
    ctx.log(Verbosity::Normal, line);
  }
  for (const std::string& name : names) {
    try {
      const RateFit fit = fit_rate(table, name);
      fits[name] = to_json(fit);
      ctx.log(Verbosity::Normal, fmt::format("fit {}: slope {:.4f} +- {:.4f} (r^2 {:.4f})", name,
                                             fit.slope, fit.stderr_slope, fit.r_squared));
    } catch (const ConfigError& e) {
      fits[name] = {{"error", e.what()}};
    }
  }
  json summary = {{"command", "experiment"},
                  {"config", experiment_config_to_json(config)},
                  {"rows", table.rows.size()},
                  {"diverged_trials", table.diverged_trials},
                  {"fits", fits}};

  const std::string csv = table.to_csv();
  if (ctx.out_path) {
    write_file(*ctx.out_path, csv);
    fs::path report = *ctx.out_path;
    report.replace_extension(".json");
    if (report == *ctx.out_path) report += ".json";
    write_file(report, summary.dump(2) + "\n");
    ctx.log(Verbosity::Normal,
            fmt::format("wrote {} and {}", ctx.out_path->string(), report.string()));
  } else {
    *ctx.out << csv;
    ctx.log(Verbosity::Debug, summary.dump(2));
  }
  return 0;
}

int cmd_bound(const CliContext& ctx, const JsonView& root) {
  root.allow_only({"schema_version", "problem", "bound", "n", "x", "x_dist", "emp_grad_norm", "C",
                   "delta", "mc_samples", "mc_seed", "inputs", "enforce_threshold", "tilde"});
  const ProblemInstance problem = problem_from_json(root.at("problem"));
  const std::string name = root.at("bound").string();
  if (name != "uniform_gap" && name != "pl_gap" && name != "excess_pl" && name != "lipschitz_gap") {
    root.at("bound").fail("expected uniform_gap, pl_gap, excess_pl or lipschitz_gap");
  }
  const std::int64_t n = root.at("n").integer();
  if (n < 1) root.at("n").fail("must be positive");
  if (name == "uniform_gap" && n < 2) root.at("n").fail("uniform_gap needs n >= 2");

  const ProblemConstants k = constants(problem);
  BoundInputs in;
  if (root.has("inputs")) {
    in = bound_inputs_from_json(root.at("inputs"), k);
  } else {
    const std::int64_t mc = root.integer_or("mc_samples", 100000);
    if (mc < 10000) root.at("mc_samples").fail("must be at least 10^4");
    in = estimate_inputs(problem, mc, root.unsigned_or("mc_seed", 0));
  }
  in.C = root.number_or("C", 1.0);
  if (in.C < 0) root.at("C").fail("must be nonnegative");
  in.delta = root.number_or("delta", 0.05);
  if (!(in.delta > 0 && in.delta < 1)) root.at("delta").fail("must lie in (0, 1)");

  double x_dist = root.number_or("x_dist", 0.0);
  if (root.has("x")) {
    const Vec x = root.at("x").vec();
    if (x.size() != problem.dim_x()) root.at("x").fail("wrong dimension");
    x_dist = (x - population_saddle(problem).point.x).norm();
  }
  if (x_dist < 0) root.at("x_dist").fail("must be nonnegative");
  const double emp_grad = root.number_or("emp_grad_norm", 0.0);
  if (emp_grad < 0) root.at("emp_grad_norm").fail("must be nonnegative");
  const bool enforce = root.boolean_or("enforce_threshold", true);

  BoundReport report;
  try {
    if (name == "uniform_gap") report = eval_uniform_gap(in, n, x_dist);
    if (name == "pl_gap") report = eval_pl_gap(in, n, emp_grad, enforce);
    if (name == "excess_pl") report = eval_excess_pl(in, n, emp_grad, enforce);
    if (name == "lipschitz_gap") report = eval_lipschitz_gap(k, n, root.number_or("tilde", 1.0));
  } catch (const ThresholdError& e) {
    *ctx.err << "error: " << e.what() << "\n";
    *ctx.err << "n_min: " << e.required_n() << "\n";
    return 2;
  }
  ctx.log(Verbosity::Normal, fmt::format("{} at n = {}: {:.10g}", name, n, report.value));
  emit_json(ctx, {{"command", "bound"}, {"report", to_json(report)}, {"inputs", to_json(in)}});
  return 0;
}

int cmd_fit(const CliContext& ctx, const JsonView& root) {
  root.allow_only({"schema_version", "table", "measurements"});
  fs::path table_path = root.at("table").string();
  if (table_path.is_relative()) table_path = ctx.config_path.parent_path() / table_path;
  const RateTable table = RateTable::from_csv(read_file(table_path));
  std::vector<std::string> names;
  if (root.has("measurements")) {
    names = root.at("measurements").string_list();
  } else {
    for (const RateRow& r : table.rows) {
      if (std::find(names.begin(), names.end(), r.measurement) == names.end()) {
        names.push_back(r.measurement);
      }
    }
  }
  json fits = json::object();
  for (const std::string& name : names) {
    const RateFit fit = fit_rate(table, name);
    fits[name] = to_json(fit);
    ctx.log(Verbosity::Normal, fmt::format("{}: slope {:.6f} +- {:.6f} over {} points", name,
                                           fit.slope, fit.stderr_slope, fit.points_used));
  }
  emit_json(ctx, {{"command", "fit"}, {"diverged_trials", table.diverged_trials}, {"fits", fits}});
  return 0;
}

int cmd_calibrate(const CliContext& ctx, const JsonView& root) {
  root.allow_only({"schema_version", "problem", "n_grid", "trials", "target_coverage", "seed",
                   "fixed_x", "delta", "mc_samples", "mc_seed", "validation", "threads"});
  const ProblemInstance problem = problem_from_json(root.at("problem"));
  const std::vector<std::int64_t> grid = root.at("n_grid").int_list();
  if (grid.empty()) root.at("n_grid").fail("must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 2) root.at("n_grid").at(i).fail("must be at least 2");
  }
  const std::int64_t trials = root.integer_or("trials", 10);
  if (trials < 1 || trials > 1000000) root.at("trials").fail("must be in [1, 10^6]");
  const double coverage = root.number_or("target_coverage", 0.95);
  if (!(coverage > 0.5 && coverage < 1)) root.at("target_coverage").fail("must lie in (0.5, 1)");
  CalibrationOptions opt;
  if (root.has("fixed_x")) {
    opt.fixed_x = root.at("fixed_x").vec();
    if (opt.fixed_x->size() != problem.dim_x()) root.at("fixed_x").fail("wrong dimension");
  }
  opt.delta = root.number_or("delta", 0.05);
  if (!(opt.delta > 0 && opt.delta < 1)) root.at("delta").fail("must lie in (0, 1)");
  opt.mc_samples = root.integer_or("mc_samples", 100000);
  if (opt.mc_samples < 10000) root.at("mc_samples").fail("must be at least 10^4");
  opt.mc_seed = root.unsigned_or("mc_seed", opt.mc_seed);
  const std::uint64_t seed = root.unsigned_or("seed", 1);
  opt.threads = thread_request(ctx, static_cast<unsigned>(root.integer_or("threads", 0)));

  const double C =
      calibrate_constant(problem, grid, static_cast<int>(trials), coverage, seed, opt);
  ctx.log(Verbosity::Normal, fmt::format("calibrated C = {:.10g}", C));
  json doc = {{"command", "calibrate"},
              {"C", C},
              {"target_coverage", coverage},
              {"seed", seed},
              {"trials", trials},
              {"n_grid", grid}};

  if (root.has("validation")) {
    const JsonView v = root.at("validation");
    v.allow_only({"seed", "trials"});
    ExperimentConfig ec(problem);
    ec.solver.algorithm = Algorithm::ESP;
    ec.n_grid = grid;
    ec.trials = static_cast<int>(v.integer_or("trials", trials));
    if (ec.trials < 1) v.at("trials").fail("must be positive");
    ec.measurements = {Measurement::GenGapAtFixedX};
    ec.base_seed = v.at("seed").unsigned_integer();
    ec.fixed_x = opt.fixed_x.value_or(Vec::Zero(problem.dim_x()));
    ec.bound_delta = opt.delta;
    ec.threads = opt.threads;
    BoundInputs in = estimate_inputs(problem, opt.mc_samples, opt.mc_seed);
    const CoverageResult cov = coverage_study(ec, "uniform_gap", C, in);
    ctx.log(Verbosity::Normal, fmt::format("held-out coverage {:.4f}", cov.coverage));
    doc["validation"] = to_json(cov);
  }
  emit_json(ctx, doc);
  return 0;
}

std::string usage() {
  return "usage: minimax_rates <command> --config PATH [--out PATH] [--threads N]\n"
         "                     [--verbosity quiet|normal|debug]\n"
         "commands:\n"
         "  certify      check the structural assumptions of a problem instance\n"
         "  experiment   run an n-sweep and write the rate table (CSV) plus a .json summary\n"
         "  bound        evaluate one bound formula\n"
         "  fit          fit log-log rates to an existing rate table\n"
         "  calibrate    calibrate the localization constant C\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliContext ctx;
  ctx.out = &out;
  ctx.err = &err;

  CLI::App app{"Stochastic minimax rate toolkit", "minimax_rates"};
  app.set_help_flag();
  app.fallthrough();
  bool help = false;
  std::string config;
  std::string out_path;
  std::string verbosity = "normal";
  int threads = 0;
  app.add_flag("-h,--help", help);
  app.add_option("--config", config);
  app.add_option("--out", out_path);
  auto* threads_opt = app.add_option("--threads", threads);
  app.add_option("--verbosity", verbosity);
  for (const char* name : {"certify", "experiment", "bound", "fit", "calibrate"}) {
    app.add_subcommand(name)->fallthrough();
  }

  if (argc < 2) {
    err << usage();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << usage();
    return 1;
  }
  if (help) {
    out << usage();
    return 0;
  }
  const auto subs = app.get_subcommands();
  if (subs.size() != 1) {
    err << "error: expected exactly one command\n" << usage();
    return 1;
  }
  ctx.command = subs.front()->get_name();
  if (verbosity == "quiet") {
    ctx.verbosity = Verbosity::Quiet;
  } else if (verbosity == "debug") {
    ctx.verbosity = Verbosity::Debug;
  } else if (verbosity != "normal") {
    err << "error: --verbosity must be quiet, normal or debug\n";
    return 1;
  }
  if (config.empty()) {
    err << "error: --config is required\n" << usage();
    return 1;
  }
  ctx.config_path = config;
  if (!out_path.empty()) ctx.out_path = fs::path(out_path);
  if (threads_opt->count() > 0) ctx.threads = threads;

  try {
    const json doc = load_config(ctx.config_path);
    const JsonView root(doc, "$");
    check_schema_version(root);
    if (ctx.command == "certify") return cmd_certify(ctx, root);
    if (ctx.command == "experiment") return cmd_experiment(ctx, root);
    if (ctx.command == "bound") return cmd_bound(ctx, root);
    if (ctx.command == "fit") return cmd_fit(ctx, root);
    return cmd_calibrate(ctx, root);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace minimax
