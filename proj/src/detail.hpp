#pragma once

#include <Eigen/Dense>

#include "esactrl/model.hpp"

namespace esactrl::detail {

/// Osborne-style diagonal balancing of A; returns per-state scales t >= 1.
/// Solving certificates in x = T x~ coordinates keeps the Lyapunov matrix
/// well-ranged when positions and velocities live on different scales; the
/// congruence P = T P~ T, Y = Y~ T maps certificates back exactly.
Eigen::VectorXd balance_scales(const Eigen::MatrixXd& A);

/// sym(A * E_ij) for the symmetric basis matrix E_ij.
Eigen::MatrixXd sym_basis_product(const Eigen::MatrixXd& A, int i, int j);

/// The model (and initial state) rewritten in balanced coordinates.
struct BalancedModel {
  StateSpace ss;
  Eigen::VectorXd t;   // per-state scales
  Eigen::VectorXd x0;  // balanced initial state
};

BalancedModel balance_model(const StateSpace& ss, const Eigen::VectorXd& x0);

}  // namespace esactrl::detail
