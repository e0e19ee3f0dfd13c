#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace esactrl::sdp {

/// Linear-objective semidefinite program over a scalar decision vector z:
///
///   minimize    objective . z
///   subject to  F0_j + sum_k z_k F_jk  <=  -shift * I   (each block j)
///               a_r . z <= b_r                          (linear rows)
///               lower <= z <= upper                     (optional bounds)
///
/// Matrix variables are vectorized by the caller; the core only sees scalars.
struct SdpProblem {
  struct SymTriplet {
    int i, j;
    double v;
  };
  struct Block {
    int dim = 0;
    std::vector<SymTriplet> f0;                             // constant part
    std::vector<std::pair<int, SymTriplet>> terms;          // (var, entry)
  };
  struct LinearRow {
    std::vector<std::pair<int, double>> a;
    double b = 0.0;
  };

  int n_vars = 0;
  Eigen::VectorXd objective;
  std::vector<Block> blocks;
  std::vector<LinearRow> linear_ineqs;
  std::vector<double> lower, upper;  // +-inf when absent
  double shift = 0.0;
  int dim_cap = 128;

  void resize(int nv);
  int add_block(int dim);
  /// Sets entry (i,j) and its mirror of the block's constant matrix.
  void add_const(int blk, int i, int j, double v);
  /// Sets entry (i,j) and its mirror of variable `var`'s coefficient matrix.
  void add_term(int blk, int var, int i, int j, double v);
  void add_linear(std::vector<std::pair<int, double>> a, double b);
  void set_bounds(int var, double lo, double up);

  void validate() const;
};

enum class SdpStatus { optimal, infeasible, iteration_limit, numerical_failure };

const char* to_string(SdpStatus s);

struct SdpIterStat {
  int iter = 0;
  double mu = 0.0;
  double primal_inf = 0.0;
  double dual_inf = 0.0;
  double gap = 0.0;
  double merit = 0.0;
  double step = 0.0;
};

struct SdpSolution {
  Eigen::VectorXd z;
  double objective_value = 0.0;
  SdpStatus status = SdpStatus::numerical_failure;
  double max_residual = 0.0;  // worst block eigenvalue / linear violation
  double gap = 0.0;           // relative duality gap
  int iterations = 0;
  std::vector<SdpIterStat> trace;
};

struct SdpConfig {
  double feas_tol = 1e-7;
  double gap_tol = 1e-6;
  double tau = 0.99;  // fraction to boundary
  int max_iter = 200;
  bool use_corrector = true;
};

/// Deterministic primal-dual interior-point solve (NT scaling, dense blocks).
SdpSolution solve(const SdpProblem& problem, const SdpConfig& cfg = {});

struct SdpCheck {
  std::vector<double> block_residuals;  // max eigenvalue of F0 + shift I + F(z)
  double worst_linear = 0.0;            // max over rows/bounds of violation, >= 0
  double max_residual() const;
};

/// Exact feasibility evaluation at z, independent of the solve path.
SdpCheck check(const SdpProblem& problem, const Eigen::VectorXd& z);

/// Self-describing text dump; round-trips bit-exactly (hexfloat values).
void dump(const SdpProblem& problem, std::ostream& out);
SdpProblem load(std::istream& in);

}  // namespace esactrl::sdp
