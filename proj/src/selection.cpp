#include "esactrl/selection.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace esactrl {

using Eigen::VectorXd;

VectorXd slice_threshold(const VectorXd& gamma_real, const LogisticConstraints& logistics) {
  const int n = static_cast<int>(gamma_real.size());
  logistics.validate(n);
  for (int i = 0; i < n; ++i)
    if (gamma_real[i] < 0.0 || gamma_real[i] > 1.0)
      throw std::invalid_argument("slice_threshold: entries must lie in [0,1]");
  VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = gamma_real[i] >= 0.5 ? 1.0 : 0.0;
  for (int i : logistics.forced_on) out[i] = 1.0;
  for (int i : logistics.forced_off) out[i] = 0.0;
  if (logistics.max_active && out.sum() > *logistics.max_active + 0.5)
    throw std::runtime_error(
        "slice_threshold: logistics conflict, overridden selection exceeds the "
        "active-count cap");
  return out;
}

std::pair<VectorXd, ControllerSolution> slice_ranked(const VectorXd& gamma_real,
                                                     const SynthesisProblem& problem,
                                                     double alpha, double mu0, double mu1,
                                                     int period) {
  const int n = static_cast<int>(gamma_real.size());
  if (n != problem.ss.nu())
    throw std::invalid_argument("slice_ranked: selection length mismatch");
  for (int i = 0; i < n; ++i)
    if (gamma_real[i] < 0.0 || gamma_real[i] > 1.0)
      throw std::invalid_argument("slice_ranked: entries must lie in [0,1]");
  const LogisticConstraints& logi = problem.logistics_for(period);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gamma_real[a] > gamma_real[b]; });

  VectorXd last_gamma;
  ControllerSolution last;
  bool tried_any = false;
  for (int k = 1; k <= n; ++k) {
    VectorXd g = VectorXd::Zero(n);
    for (int j = 0; j < k; ++j) g[order[j]] = 1.0;
    if (!logi.admits(g)) continue;
    ControllerSolution sol = certify_fixed(problem, alpha, mu0, mu1, g, period);
    tried_any = true;
    last_gamma = g;
    last = sol;
    if (sol.certified()) return {g, sol};
  }
  if (!tried_any)
    throw std::runtime_error("slice_ranked: no prefix satisfies the logistic constraints");
  return {last_gamma, last};  // largest admissible prefix, uncertified
}

std::string selection_report(const BoundReport& report) {
  std::ostringstream os;
  os.precision(12);
  auto vec = [&](const VectorXd& v) {
    os << '[';
    for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ']';
  };
  os << "{\n  \"method\": \"" << report.method << "\",\n  \"gamma_real\": ";
  vec(report.gamma_real);
  os << ",\n  \"gamma_binary\": ";
  vec(report.gamma_binary);
  os << ",\n  \"lower\": " << report.lower << ",\n  \"upper\": " << report.upper
     << ",\n  \"mu\": " << report.solution.mu << ",\n  \"certified\": "
     << (report.solution.certified() ? "true" : "false") << "\n}\n";
  return os.str();
}

}  // namespace esactrl
