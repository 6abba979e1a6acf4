#pragma once

#include <string>

#include <json.hpp>

#include "minimax/bounds.hpp"
#include "minimax/experiments.hpp"
#include "minimax/oracles.hpp"
#include "minimax/problems.hpp"
#include "minimax/solvers.hpp"

namespace minimax {

using json = nlohmann::ordered_json;

/// Read-only view of a JSON value that knows its own path, so every schema
/// error names the offending field ("$.problem.params.mu_x: expected a number").
class JsonView {
 public:
  JsonView(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *value_; }

  bool has(const std::string& key) const;
  JsonView at(const std::string& key) const;
  JsonView at(std::size_t index) const;
  std::size_t size() const;
  /// Throws unless every key of this object is listed.
  void allow_only(std::initializer_list<const char*> keys) const;

  double number() const;
  std::int64_t integer() const;
  std::uint64_t unsigned_integer() const;
  bool boolean() const;
  std::string string() const;
  Vec vec() const;
  Mat mat() const;
  std::vector<std::int64_t> int_list() const;
  std::vector<std::string> string_list() const;

  double number_or(const std::string& key, double fallback) const;
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
  std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;

  [[noreturn]] void fail(const std::string& message) const;

 private:
  const json* value_;
  std::string path_;
};

/// Checks "schema_version": 1 at the document root.
void check_schema_version(const JsonView& root);

json to_json(const Vec& v);
json to_json(const Mat& m);

/// {"family", "dims", "params", "noise_scale", "noise_law", "domain"?}
json problem_to_json(const ProblemInstance& problem);
ProblemInstance problem_from_json(const JsonView& view);

json to_json(const ProblemConstants& k);
json to_json(const AssumptionReport& report);
json to_json(const SaddlePoint& sp);
json to_json(const GapReport& report);
/// Summary only: steps, final point, averaged iterate, record count.
json to_json(const Trajectory& traj);
/// Columnar dump t, x_1..x_d, y_1..y_d', grad_phi_s_norm.
std::string iterates_csv(const Trajectory& traj);
json to_json(const BoundInputs& inputs);
BoundInputs bound_inputs_from_json(const JsonView& view, const ProblemConstants& k);
json to_json(const BoundReport& report);
json to_json(const RateFit& fit);
json to_json(const CoverageResult& result);

SolverConfig solver_config_from_json(const JsonView& view);
ExperimentConfig experiment_config_from_json(const JsonView& root);
json experiment_config_to_json(const ExperimentConfig& config);

/// Shortest representation that round-trips exactly; non-finite values become strings.
json number(double v);

}  // namespace minimax
