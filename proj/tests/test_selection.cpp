#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "esactrl/model.hpp"
#include "esactrl/sca.hpp"
#include "esactrl/selection.hpp"

using namespace esactrl;
using Eigen::VectorXd;

namespace {

SynthesisProblem damped_pair() {
  EsaParams params;
  params.c1 = params.c2 = 0.05;
  SynthesisProblem p;
  p.ss = build_network(params, NetworkTopology{1, 2});
  p.u_max = 250.0;
  return p;
}

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("threshold slicing keeps the boundary inclusive") {
  CHECK(slice_threshold(vec({0.9, 0.2, 0.5})) == vec({1, 0, 1}));
  CHECK(slice_threshold(vec({1, 1, 1, 1})) == vec({1, 1, 1, 1}));
  CHECK(slice_threshold(vec({0.49999, 0.50001})) == vec({0, 1}));
  // Binary input is a fixed point.
  CHECK(slice_threshold(vec({1, 0, 1, 0})) == vec({1, 0, 1, 0}));
  CHECK_THROWS_AS(slice_threshold(vec({1.2, 0.0})), std::invalid_argument);
}

TEST_CASE("threshold slicing applies overrides and detects conflicts") {
  LogisticConstraints logi;
  logi.forced_on = {1};
  logi.forced_off = {0};
  CHECK(slice_threshold(vec({0.9, 0.1, 0.6}), logi) == vec({0, 1, 1}));
}

TEST_CASE("threshold slicing reports a cap conflict") {
  LogisticConstraints capped;
  capped.forced_on = {0, 1};
  capped.max_active = 2;
  CHECK_THROWS_AS(slice_threshold(vec({0.1, 0.1, 0.9}), capped), std::runtime_error);
  // Without the forced entries the same cap is satisfiable.
  LogisticConstraints loose;
  loose.max_active = 2;
  CHECK(slice_threshold(vec({0.1, 0.1, 0.9}), loose) == vec({0, 0, 1}));
}

TEST_CASE("ranked slicing returns the smallest certified prefix with tie-break") {
  SynthesisProblem p = damped_pair();
  // At this attenuation level a single actuator already certifies, so the
  // tie must resolve to the lower index.
  auto [gamma, sol] = slice_ranked(vec({0.7, 0.7}), p, 0.1, 1.0, 10.0);
  REQUIRE(sol.certified());
  CHECK(gamma == vec({1, 0}));
  CHECK(sol.active_count() == 1);
}

TEST_CASE("ranked slicing reports failure with the final residuals") {
  SynthesisProblem p = damped_pair();
  // An absurdly tight attenuation level certifies nowhere.
  auto [gamma, sol] = slice_ranked(vec({0.9, 0.4}), p, 0.1, 1.0, 1e-4);
  CHECK(!sol.certified());
  CHECK(gamma == vec({1, 1}));  // the search ends at the all-on selection
  CHECK(!sol.detail.empty());
  CHECK(sol.violating_block >= 0);
}

TEST_CASE("ranked slicing degenerates to one solve for a single actuator") {
  EsaParams params;
  params.c1 = params.c2 = 0.05;
  SynthesisProblem p;
  p.ss = build_network(params, NetworkTopology{1, 1});
  p.u_max = 250.0;
  auto [gamma, sol] = slice_ranked(vec({0.8}), p, 0.05, 1.0, 20.0);
  CHECK(gamma.size() == 1);
  CHECK(gamma[0] == 1.0);
  CHECK(sol.certified());
}

TEST_CASE("ranked slicing honors logistic admissibility") {
  SynthesisProblem p = damped_pair();
  LogisticConstraints logi;
  logi.forced_on = {1};
  p.logistics.push_back(logi);
  auto [gamma, sol] = slice_ranked(vec({0.9, 0.8}), p, 0.1, 1.0, 10.0);
  REQUIRE(sol.certified());
  CHECK(gamma[1] == 1.0);  // prefixes without the forced actuator are skipped
}

TEST_CASE("relaxation and recovered selection sandwich the binary optimum") {
  SynthesisProblem p = damped_pair();
  ScaConfig cfg;
  cfg.alpha_grid = {0.05};
  ScaResult rel = sca_run(p, cfg);
  REQUIRE(rel.feasible);
  VectorXd binary = slice_threshold(rel.final.vars.gamma);
  BoundReport report;
  report.lower = rel.lower;
  report.gamma_real = rel.final.vars.gamma;
  report.method = "threshold";
  if (binary.sum() == 0.0) {
    // The relaxation deactivated everything; fall back to the ranked search.
    auto [g, sol] = slice_ranked(rel.final.vars.gamma, p, rel.alpha, rel.final.vars.mu0,
                                 rel.final.vars.mu1);
    binary = g;
    report.method = "ranked";
    report.solution = sol;
  } else {
    report.solution =
        certify_fixed(p, rel.alpha, rel.final.vars.mu0, rel.final.vars.mu1, binary);
  }
  report.gamma_binary = binary;
  report.upper = report.solution.objective;
  if (report.solution.certified())
    CHECK(report.lower <= report.upper + 1e-4 * std::abs(report.upper));
  std::string text = selection_report(report);
  for (const char* key :
       {"\"method\"", "\"gamma_real\"", "\"gamma_binary\"", "\"lower\"", "\"upper\"", "\"mu\""})
    CHECK(text.find(key) != std::string::npos);
}
