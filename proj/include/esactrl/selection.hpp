#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <utility>

#include "esactrl/lmi.hpp"

namespace esactrl {

/// Bound sandwich around the binary selection problem: `lower` comes from the
/// relaxation, `upper` from certifying the recovered binary selection.
struct BoundReport {
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd gamma_real;
  Eigen::VectorXd gamma_binary;
  std::string method;          // "threshold" or "ranked"
  ControllerSolution solution; // certificate backing `upper` (or the failure)
};

/// Activates every entry with value >= 0.5, then applies the logistic
/// overrides (forced_on to 1, forced_off to 0). Throws when the overridden
/// selection exceeds the active-count cap.
Eigen::VectorXd slice_threshold(const Eigen::VectorXd& gamma_real,
                                const LogisticConstraints& logistics = {});

/// Ranks actuators by relaxed value (descending, ties broken toward the
/// lower index) and certifies growing prefixes at the fixed scalars; returns
/// the first certified prefix. If no admissible prefix certifies, returns the
/// largest admissible one with its uncertified solution and residual detail.
std::pair<Eigen::VectorXd, ControllerSolution> slice_ranked(
    const Eigen::VectorXd& gamma_real, const SynthesisProblem& problem, double alpha,
    double mu0, double mu1, int period = 0);

/// JSON-like rendering: gamma_real, gamma_binary, method, lower, upper, mu.
std::string selection_report(const BoundReport& report);

}  // namespace esactrl
