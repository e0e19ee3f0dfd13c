#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>

#include "esactrl/lmi.hpp"

namespace esactrl {

/// Fixed data for the exact binary selection solve. `big_m` is the indicator
/// constant; `alpha`, `mu0`, `mu1` are the predetermined certificate scalars.
struct BigMConfig {
  double big_m = 1e3;
  double alpha = 0.1;
  double mu0 = 1.0;
  double mu1 = 0.4;
  /// Search budget for the branch-and-bound: wall-clock seconds and explored
  /// node count. Zero disables the respective limit.
  double time_limit_seconds = 0.0;
  int max_nodes = 0;

  void validate() const;
};

/// Decision variables of the mixed-integer formulation. `Xi` stands in for the
/// bilinear product Gamma*Y; at integer-feasible points row i of Xi equals row
/// i of Y when gamma[i] = 1 and is zero when gamma[i] = 0.
struct MisdpVars {
  Eigen::MatrixXd P, Y, Xi;
  Eigen::VectorXd gamma;
  double mu2 = 0.0;
};

/// Residuals of the indicator rows, ordered (actuator i, column b) x
/// {(Xi-Y) - M(1-g), -(Xi-Y) - M(1-g), Xi - M g, -Xi - M g}. The selection is
/// consistent iff every entry is <= 0.
Eigen::VectorXd bigm_rows(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& Y,
                          const Eigen::VectorXd& gamma, double big_m);

/// Decay-rate block with the lifted product: replaces -sym(Bu*Gamma*Y) by
/// -Bu*Xi - (Bu*Xi)'. Affine in (P, Xi).
Eigen::MatrixXd assemble_m1_xi(const StateSpace& ss, const Eigen::MatrixXd& P,
                               const Eigen::MatrixXd& Xi, double mu0, double alpha);

struct BnbResult {
  Eigen::VectorXd gamma;       // optimal binary selection (empty when infeasible)
  ControllerSolution solution; // certificate for gamma
  int node_count = 0;
  bool feasible = false;
  bool m_too_small = false;    // max |Y*| entry exceeded 0.9 * big_m
  /// The search stopped on the time or node budget; the returned incumbent (if
  /// any) is certified but not proven optimal.
  bool budget_exhausted = false;
  std::string detail;
  /// One row per node: id,parent,fixed_one,fixed_zero,bound,status,incumbent
  /// (index lists are 1-based and ';'-separated).
  std::string trace_csv;
};

/// Depth-first branch-and-bound on the big-M formulation. Branches on the most
/// fractional selection entry (ties toward the lower index), explores the
/// fix-to-one child first, and prunes nodes whose relaxation bound is within
/// 1e-6 of the incumbent. The returned solution is re-certified at the fixed
/// scalars.
BnbResult branch_and_bound(const SynthesisProblem& problem, const BigMConfig& cfg = {},
                           int period = 0);

struct EnumerationResult {
  Eigen::VectorXd gamma;
  double objective = std::numeric_limits<double>::infinity();
  bool feasible = false;
  int evaluated = 0;  // certification attempts (admissible selections)
};

/// Ground truth for small instances: certifies every admissible selection
/// (at most 2^N with N <= 12) and returns the best certified one.
EnumerationResult enumerate_oracle(const SynthesisProblem& problem, const BigMConfig& cfg = {},
                                   int period = 0);

}  // namespace esactrl
