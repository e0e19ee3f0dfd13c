#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "esactrl/lmi.hpp"
#include "esactrl/model.hpp"

namespace esactrl {

/// Configuration of the successive-convex-approximation (SCA) synthesis for
/// the integer-relaxed problem (selection entries free in [0,1]).
struct ScaConfig {
  int max_iter = 50;
  double tol = 1e-2;    // stop when the objective changes by less than this
  double eps1 = 1e-4;   // strict-feasibility margin on the certificate blocks
  double init_mu0 = 30.0;
  double init_mu1 = 4.0;
  std::vector<double> alpha_grid = {1e-3, 1e-2, 0.05, 0.1, 0.169, 0.3};
  Eigen::VectorXd gamma0;    // initial selection; empty means all ones
  bool pin_gamma = false;    // keep the selection fixed at gamma0
  bool parallel = false;     // run the alpha grid entries concurrently

  void validate() const;
};

/// One SCA iterate: relaxed variables, surrogate objective, bookkeeping.
struct ScaIterate {
  SynthVariables vars;  // gamma continuous in [0,1]
  double objective = std::numeric_limits<double>::infinity();
  int iteration = 0;
  bool converged = false;
};

/// Outcome of the grid search: the best final iterate and its objective,
/// which upper-bounds the optimum of the integer relaxation.
struct ScaResult {
  ScaIterate final;
  double lower = std::numeric_limits<double>::infinity();  // relaxation bound value
  double alpha = 0.0;
  bool feasible = false;  // at least one alpha run produced an iterate
  std::string log_csv;    // iter,alpha,objective,trace_gamma,solver_status,residual
  std::vector<std::string> diagnostics;  // per-alpha failures
};

/// Difference-of-Gram decomposition of the selection-gain bilinearity:
/// returns (Ppart, Hpart) with Ppart = (Bu G - Y')(Bu G - Y')',
/// Hpart = (Bu G + Y')(Bu G + Y')', so that
/// 0.5 Ppart - 0.5 Hpart = -Bu G Y - Y' G' Bu' exactly.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dc_split(const Eigen::MatrixXd& Bu,
                                                     const Eigen::VectorXd& gamma,
                                                     const Eigen::MatrixXd& Y);

/// First-order expansion of the concave Gram part at (gamma0, Y0):
/// H_l = G G0' + G0 G' - G0 G0' with G = Bu Gamma + Y'. Globally
/// H - H_l = (G - G0)(G - G0)' >= 0, with equality at the point.
Eigen::MatrixXd linearize_h(const Eigen::MatrixXd& Bu, const Eigen::VectorXd& gamma0,
                            const Eigen::MatrixXd& Y0, const Eigen::VectorXd& gamma,
                            const Eigen::MatrixXd& Y);

/// Convex surrogate of the decay block: the bilinear term is replaced by
/// 0.5 Ppart - 0.5 H_l and the convex Gram square Ppart is kept exact through
/// an appended lift column (Bu Gamma - Y')/sqrt(2) with diagonal -I.
/// Returns the lifted block of size (nx + nd + nu); eliminating the lift by a
/// Schur complement reproduces the surrogate, which dominates the true block
/// in the semidefinite order.
Eigen::MatrixXd convexify_m1(const StateSpace& ss, const SynthVariables& vars,
                             const SynthVariables& point, double alpha);

/// Global over-estimator of the product a*b, exact at (a0, b0):
/// 0.25 (a+b)^2 - 0.25 [2 (a0-b0)(a-b) - (a0-b0)^2].
double surrogate_product(double a, double b, double a0, double b0);

/// Over-estimator (in the semidefinite order) of -mu1 * P, exact at the
/// point: 0.25 (mu1 I - P)^2 - 0.25 (Q Q0 + Q0 Q - Q0^2) with Q = mu1 I + P.
Eigen::MatrixXd surrogate_mu1_p(double mu1, const Eigen::MatrixXd& P, double mu10,
                                const Eigen::MatrixXd& P0);

/// The input-budget block after the exact congruence by diag(I, mu0^-1 I),
/// written with the reciprocal variable nu = 1/mu0:
/// [[-(u_max/rho)^2 P, Y'], [Y, -nu I]]. Together with nu * mu0 <= 1 its
/// negative semidefiniteness implies that of the original block.
Eigen::MatrixXd transform_m4(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y,
                             double nu, double u_max, double rho);

/// Grid search over alpha with an inner majorize-minimize loop per value.
/// Each inner iteration solves one convex SDP surrogate (all certificate
/// blocks at most -eps1 I) and relinearizes at its optimizer; the surrogate
/// objective sequence is non-increasing by construction.
ScaResult sca_run(const SynthesisProblem& problem, const ScaConfig& cfg = {},
                  int period = 0);

}  // namespace esactrl
