#pragma once

#include <Eigen/Dense>
#include <string>

#include "esactrl/model.hpp"

namespace esactrl {

/// Per-channel disturbance: a shared-phase cosine on every channel (the
/// default), identically zero, or per-channel cosine amplitudes.
struct DisturbanceSpec {
  enum class Kind { cosine, zero, custom };
  Kind kind = Kind::cosine;
  double frequency = 0.1;        // [rad/s]
  Eigen::VectorXd amplitudes;    // used by Kind::custom, one entry per channel

  Eigen::VectorXd at(double t, int n_d) const;
};

struct SimConfig {
  double t_end = 60.0;
  double dt = 1e-3;
  DisturbanceSpec disturbance;
  Eigen::VectorXd x_init;  // empty = zeros

  void validate() const;
};

/// Fixed-step trajectory record, one row per sample (including t = 0).
struct SimTrace {
  Eigen::VectorXd times;
  Eigen::MatrixXd x, u, p, d;
  Eigen::VectorXd norm_x, norm_u, norm_p, norm_d;
  bool diverged = false;  // integration aborted on a non-finite/overflowing state

  int samples() const { return static_cast<int>(times.size()); }
};

/// Integrates x' = (A + Bu*Gamma*K) x + Bd d(t) with classical fourth-order
/// Runge-Kutta at fixed step, recording u = Gamma*K*x and p = C x + D u.
SimTrace simulate(const StateSpace& ss, const Eigen::MatrixXd& K,
                  const Eigen::VectorXd& gamma, const SimConfig& cfg = {});

struct LinfReport {
  double margin = 0.0;      // mu*rho - max_t ||p(t)||; >= 0 means the bound held
  double bound = 0.0;       // mu*rho
  double max_norm_p = 0.0;
  double max_norm_u = 0.0;  // compare against u_max
};

LinfReport verify_linf(const SimTrace& trace, double mu, double rho);

/// Largest real part among the eigenvalues of A + Bu*Gamma*K.
double spectral_abscissa(const StateSpace& ss, const Eigen::MatrixXd& K,
                         const Eigen::VectorXd& gamma);

/// Plot-ready CSV: t,norm_x,norm_p,norm_u,norm_d,x1 and, when `full_state` is
/// set, one extra column per state entry.
std::string trace_csv(const SimTrace& trace, bool full_state = false);

}  // namespace esactrl
