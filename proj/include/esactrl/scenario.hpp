#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "esactrl/lmi.hpp"
#include "esactrl/misdp.hpp"
#include "esactrl/sca.hpp"

namespace esactrl {

/// Workflow selector:
///   A ("full")      -- relax with every actuator pinned active, then certify;
///   B ("sca-slice") -- relax freely, recover a binary selection by slicing;
///   C ("misdp")     -- exact selection by branch-and-bound.
struct ScenarioSpec {
  char kind = 'A';  // 'A', 'B', or 'C'
  std::filesystem::path model_file;
  std::filesystem::path problem_file;
  std::filesystem::path method_file;  // optional; defaults apply when empty
  std::filesystem::path out_dir;
  bool parallel = false;

  void validate() const;
};

/// Tuning knobs shared by the three workflows, parsed from one key-value
/// file: alpha_grid, max_iter, tol, init_mu0, init_mu1 (relaxation) and
/// big_m, alpha, mu0, mu1 (exact selection).
struct MethodConfig {
  ScaConfig sca;
  BigMConfig bigm;
};

MethodConfig parse_method_config(const std::string& text);
MethodConfig load_method_config(const std::filesystem::path& file);

struct RunReport {
  char scenario = 'A';
  double alpha = 0.0;
  double mu = 0.0;
  int active_count = 0;
  Eigen::VectorXd gamma;
  double wall_time_seconds = 0.0;
  double lower = 0.0;   // relaxation bound
  double upper = 0.0;   // certified objective
  double margin = 0.0;  // mu*rho - max ||p|| from the closed-loop run
  double max_norm_u = 0.0;
  bool m_too_small = false;  // exact selection only: indicator constant check
};

/// Stage failure carrying the exit disposition: infeasible synthesis versus a
/// numerical breakdown.
struct ScenarioError : std::runtime_error {
  enum class Kind { infeasible, numerical };
  Kind kind;
  std::string stage;
  ScenarioError(Kind k, const std::string& stage_name, const std::string& message)
      : std::runtime_error(stage_name + ": " + message), kind(k), stage(stage_name) {}
};

/// Runs one workflow end to end (synthesis, selection, certification,
/// closed-loop simulation) and writes its artifacts (iteration / node-trace
/// CSVs, selection report, simulation trace) into `spec.out_dir`.
RunReport run_scenario(const ScenarioSpec& spec);

/// Fixed-width table over the reports, one row per scenario.
std::string report_table(const std::vector<RunReport>& reports);
/// Same content, machine readable.
std::string report_csv(const std::vector<RunReport>& reports);

}  // namespace esactrl
