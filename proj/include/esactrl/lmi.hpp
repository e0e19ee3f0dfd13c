#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "esactrl/model.hpp"
#include "esactrl/sdp.hpp"

namespace esactrl {

/// Per-period restrictions on the actuator selection (0-based indices).
struct LogisticConstraints {
  std::vector<int> forced_on;
  std::vector<int> forced_off;
  std::optional<int> max_active;

  void validate(int n_u) const;
  bool admits(const Eigen::VectorXd& gamma_binary) const;
};

/// The synthesis instance: dynamics plus disturbance level, input budget,
/// selection weight and initial state.
struct SynthesisProblem {
  StateSpace ss;
  double rho = 0.0;  // <= 0 means sqrt(N), the sup norm of the unit cosine disturbance
  double u_max = 250.0;
  double alpha_gamma = 1.0;
  Eigen::VectorXd x0;  // empty means zeros
  int periods = 1;
  std::vector<LogisticConstraints> logistics;  // one per period (shared if single)

  double rho_eff() const;
  Eigen::VectorXd x0_eff() const;
  const LogisticConstraints& logistics_for(int period) const;
  void validate() const;
};

/// Decision variables of the matrix-inequality certificate.
struct SynthVariables {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Y;
  Eigen::VectorXd gamma;  // diagonal of the selection, in [0,1]
  double mu0 = 1.0, mu1 = 1.0, mu2 = 1.0;
  double alpha = 0.1;
};

enum class CertStatus { certified, uncertified };

struct ControllerSolution {
  Eigen::MatrixXd K;       // n_u x n_x, rows zero for deselected actuators
  Eigen::MatrixXd P, Y;    // certificate variables (original coordinates)
  Eigen::VectorXd gamma;   // binary diagonal
  double mu = 0.0;         // performance level sqrt(mu0*mu1 + mu2)
  double mu0 = 0.0, mu1 = 0.0, mu2 = 0.0, alpha = 0.0;
  double objective = 0.0;  // mu0*mu1 + mu2 + alpha_gamma * trace(Gamma)
  CertStatus status = CertStatus::uncertified;
  int violating_block = -1;  // 0..3 for M1..M4, 4 for -P, when uncertified
  sdp::SdpStatus solver_status = sdp::SdpStatus::numerical_failure;
  std::string detail;

  bool certified() const { return status == CertStatus::certified; }
  int active_count() const { return static_cast<int>(gamma.sum() + 0.5); }
};

/// The four certificate blocks. All return exactly symmetric matrices.
Eigen::MatrixXd assemble_m1(const StateSpace& ss, const Eigen::MatrixXd& P,
                            const Eigen::MatrixXd& Y, const Eigen::VectorXd& gamma,
                            double mu0, double alpha);
Eigen::MatrixXd assemble_m2(const StateSpace& ss, const Eigen::MatrixXd& P,
                            const Eigen::MatrixXd& Y, double mu1, double mu2);
Eigen::MatrixXd assemble_m3(const Eigen::VectorXd& x0, const Eigen::MatrixXd& P,
                            double mu0, double rho);
Eigen::MatrixXd assemble_m4(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y,
                            double mu0, double u_max, double rho);

/// Largest eigenvalues of M1..M4 and of -P; all <= 0 (and the last <= -eps)
/// means the candidate is feasible.
std::vector<double> residual(const StateSpace& ss, const SynthVariables& vars,
                             const SynthesisProblem& problem);

/// Strict-feasibility shift applied to every certificate block.
inline constexpr double kEps1 = 1e-4;

/// With fixed (alpha, mu0, mu1) and a binary selection the certificate is a
/// genuine LMI program in (P, Y, mu2); solve it and recover K = -Y P^-1.
ControllerSolution certify_fixed(const SynthesisProblem& problem, double alpha, double mu0,
                                 double mu1, const Eigen::VectorXd& gamma_binary,
                                 int period = 0);

/// Upper-triangle vectorization order shared by all SDP builders.
struct SymIndex {
  int n = 0;
  int size() const { return n * (n + 1) / 2; }
  int operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
  }
};

/// Adds the (symmetric) dense contribution of `var` to a problem block.
void add_dense_term(sdp::SdpProblem& prob, int blk, int var, const Eigen::MatrixXd& M);
void add_dense_const(sdp::SdpProblem& prob, int blk, const Eigen::MatrixXd& M);

/// Problem file (key = value): rho, u_max, alpha_gamma, x0 (comma list or
/// "zeros"), periods, forced_on, forced_off, max_active (actuators 1-based).
SynthesisProblem parse_problem_config(const std::string& text, const StateSpace& ss);
SynthesisProblem load_problem_config(const std::filesystem::path& file, const StateSpace& ss);

}  // namespace esactrl
