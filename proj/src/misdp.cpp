#include "esactrl/misdp.hpp"

#include "detail.hpp"
#include "esactrl/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace esactrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void BigMConfig::validate() const {
  if (!(big_m > 0.0)) throw std::invalid_argument("bigm: big_m must be positive");
  if (!(alpha > 0.0 && mu0 > 0.0 && mu1 > 0.0))
    throw std::invalid_argument("bigm: alpha, mu0, mu1 must be positive");
  if (time_limit_seconds < 0.0 || max_nodes < 0)
    throw std::invalid_argument("bigm: search budget must be non-negative");
}

VectorXd bigm_rows(const MatrixXd& Xi, const MatrixXd& Y, const VectorXd& gamma,
                   double big_m) {
  if (!(big_m > 0.0)) throw std::invalid_argument("bigm_rows: big_m must be positive");
  if (Xi.rows() != Y.rows() || Xi.cols() != Y.cols() || gamma.size() != Xi.rows())
    throw std::invalid_argument("bigm_rows: dimension mismatch");
  const int nu = static_cast<int>(Xi.rows()), nx = static_cast<int>(Xi.cols());
  VectorXd out(4 * nu * nx);
  int r = 0;
  for (int i = 0; i < nu; ++i) {
    const double off = big_m * (1.0 - gamma[i]);
    const double on = big_m * gamma[i];
    for (int b = 0; b < nx; ++b) {
      const double d = Xi(i, b) - Y(i, b);
      out[r++] = d - off;
      out[r++] = -d - off;
      out[r++] = Xi(i, b) - on;
      out[r++] = -Xi(i, b) - on;
    }
  }
  return out;
}

MatrixXd assemble_m1_xi(const StateSpace& ss, const MatrixXd& P, const MatrixXd& Xi,
                        double mu0, double alpha) {
  const int nx = ss.nx(), nd = ss.nd();
  if (P.rows() != nx || Xi.cols() != nx || Xi.rows() != ss.nu())
    throw std::invalid_argument("assemble_m1_xi: dimension mismatch");
  MatrixXd M = MatrixXd::Zero(nx + nd, nx + nd);
  MatrixXd BuXi = ss.Bu * Xi;
  MatrixXd TL = P * ss.A.transpose() + ss.A * P + alpha * P - BuXi - BuXi.transpose();
  M.topLeftCorner(nx, nx) = 0.5 * (TL + TL.transpose());
  M.topRightCorner(nx, nd) = ss.Bd;
  M.bottomLeftCorner(nd, nx) = ss.Bd.transpose();
  M.bottomRightCorner(nd, nd) = -alpha * mu0 * MatrixXd::Identity(nd, nd);
  return M;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Continuous relaxation of a search node over (P, Xi, gamma, mu2). Xi (the
/// applied feedback) enters every certificate block; at integer points this
/// coincides with the certified formulation, and any integer completion's
/// certificate is feasible here, so the node objective is a valid bound.
/// Fixed-zero rows of Xi are dropped, fixed-one rows keep only the |Xi| <= M
/// box, and free rows carry the two indicator rows |Xi| <= M*gamma_i.
struct NodeRelax {
  sdp::SdpProblem prob;
  std::vector<int> gvar;  // per actuator: variable index, or -1 when fixed
  int mu2_var = 0;
  double obj_const = 0.0;  // mu0*mu1 + alpha_gamma * (fixed-one count)
  bool trivially_infeasible = false;  // fixed ones already exceed the cap
};

NodeRelax build_relaxation(const SynthesisProblem& problem, const BigMConfig& cfg,
                           const std::vector<int>& fixed, int period) {
  const StateSpace& ss = problem.ss;
  const int nx = ss.nx(), nu = ss.nu(), nd = ss.nd(), np = ss.np();
  const double rho = problem.rho_eff();
  const double alpha = cfg.alpha, mu0 = cfg.mu0, mu1 = cfg.mu1, M = cfg.big_m;

  const detail::BalancedModel bal = detail::balance_model(ss, problem.x0_eff());
  const StateSpace& bss = bal.ss;
  const VectorXd& t = bal.t;
  const VectorXd& x0 = bal.x0;

  NodeRelax out;
  out.gvar.assign(nu, -1);
  std::vector<int> free_idx;
  int fixed_ones = 0;
  for (int i = 0; i < nu; ++i) {
    if (fixed[i] < 0) free_idx.push_back(i);
    else if (fixed[i] == 1) ++fixed_ones;
  }
  const int nf = static_cast<int>(free_idx.size());

  const LogisticConstraints& logi = problem.logistics_for(period);
  if (logi.max_active && fixed_ones > *logi.max_active) {
    out.trivially_infeasible = true;
    return out;
  }

  // Xi rows exist for every actuator not fixed to zero.
  std::vector<int> rows;
  for (int i = 0; i < nu; ++i)
    if (fixed[i] != 0) rows.push_back(i);
  const int nr = static_cast<int>(rows.size());
  std::vector<int> rpos(nu, -1);
  for (int r = 0; r < nr; ++r) rpos[rows[r]] = r;

  SymIndex pidx{nx};
  const int nP = pidx.size();
  const int xi_off = nP;
  const int g_off = xi_off + nr * nx;
  out.mu2_var = g_off + nf;
  const int n_vars = out.mu2_var + 1;

  auto xiv = [&](int i, int c) { return xi_off + rpos[i] * nx + c; };

  sdp::SdpProblem& prob = out.prob;
  prob.resize(n_vars);
  prob.objective[out.mu2_var] = 1.0;
  prob.set_bounds(out.mu2_var, 1e-9, 1e9);
  for (int f = 0; f < nf; ++f) {
    const int gv = g_off + f;
    out.gvar[free_idx[f]] = gv;
    prob.objective[gv] = problem.alpha_gamma;
    prob.set_bounds(gv, 0.0, 1.0);
  }
  out.obj_const = mu0 * mu1 + problem.alpha_gamma * fixed_ones;
  // |Xi| <= M in original coordinates (implied by the indicator rows for free
  // entries; the whole box for fixed-one rows).
  for (int i : rows)
    for (int c = 0; c < nx; ++c) prob.set_bounds(xiv(i, c), -M / t[c], M / t[c]);

  const int b1 = prob.add_block(nx + nd);
  const int b2 = prob.add_block(nx + 2 * np);
  const int b3 = prob.add_block(1 + nx);
  const int b4 = prob.add_block(nx + nu);
  const int bP = prob.add_block(nx);

  // Strictness margin, congruently transformed by the state balancing.
  {
    const VectorXd ti2 = t.cwiseInverse().cwiseAbs2();
    auto add_margin = [&](int blk, const VectorXd& d) {
      for (int i = 0; i < d.size(); ++i) prob.add_const(blk, i, i, kEps1 * d[i]);
    };
    VectorXd d1(nx + nd), d2(nx + 2 * np), d3(1 + nx), d4(nx + nu);
    d1 << ti2, VectorXd::Ones(nd);
    d2 << ti2, VectorXd::Ones(2 * np);
    d3 << 1.0, ti2;
    d4 << ti2, VectorXd::Ones(nu);
    add_margin(b1, d1);
    add_margin(b2, d2);
    add_margin(b3, d3);
    add_margin(b4, d4);
    add_margin(bP, ti2);
  }

  // Decay block with Xi in place of Gamma*Y.
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) {
      MatrixXd TL = detail::sym_basis_product(bss.A, i, j);
      TL(i, j) += alpha;
      TL(j, i) += (i == j) ? 0.0 : alpha;
      add_dense_term(prob, b1, pidx(i, j), TL);
    }
  for (int a = 0; a < nu; ++a) {
    if (fixed[a] == 0) continue;
    for (int c = 0; c < nx; ++c) {
      MatrixXd S = MatrixXd::Zero(nx, nx);
      S.col(c) -= bss.Bu.col(a);
      MatrixXd TL = S + S.transpose();
      add_dense_term(prob, b1, xiv(a, c), TL);
    }
  }
  for (int r = 0; r < nx; ++r)
    for (int d = 0; d < nd; ++d) prob.add_const(b1, r, nx + d, bss.Bd(r, d));
  for (int d = 0; d < nd; ++d) prob.add_const(b1, nx + d, nx + d, -alpha * mu0);

  // Performance block with the applied feedback Xi.
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) {
      prob.add_term(b2, pidx(i, j), i, j, -mu1);
      for (int q = 0; q < np; ++q) {
        prob.add_term(b2, pidx(i, j), i, nx + np + q, bss.C(q, j));
        if (i != j) prob.add_term(b2, pidx(i, j), j, nx + np + q, bss.C(q, i));
      }
    }
  for (int a : rows)
    for (int c = 0; c < nx; ++c)
      for (int q = 0; q < np; ++q)
        if (bss.D(q, a) != 0.0) prob.add_term(b2, xiv(a, c), c, nx + np + q, bss.D(q, a));
  for (int q = 0; q < np; ++q) prob.add_term(b2, out.mu2_var, nx + q, nx + q, -1.0);
  for (int q = 0; q < np; ++q) prob.add_const(b2, nx + np + q, nx + np + q, -1.0);

  // Initial-condition block.
  prob.add_const(b3, 0, 0, -mu0 * rho * rho);
  for (int r = 0; r < nx; ++r)
    if (x0[r] != 0.0) prob.add_const(b3, 0, 1 + r, x0[r]);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(b3, pidx(i, j), 1 + i, 1 + j, -1.0);

  // Input-bound block.
  const double w = (problem.u_max * problem.u_max) / (rho * rho);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(b4, pidx(i, j), i, j, -w);
  for (int a : rows)
    for (int c = 0; c < nx; ++c) prob.add_term(b4, xiv(a, c), c, nx + a, mu0);
  for (int u = 0; u < nu; ++u) prob.add_const(b4, nx + u, nx + u, -mu0);

  // Positivity of P.
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(bP, pidx(i, j), i, j, -1.0);

  // Indicator rows |Xi| <= M*gamma for the free selection entries. Balanced
  // column c scales the original entry by t[c].
  for (int a : free_idx) {
    const int gv = out.gvar[a];
    for (int c = 0; c < nx; ++c) {
      const double tc = t[c];
      prob.add_linear({{xiv(a, c), tc}, {gv, -M}}, 0.0);
      prob.add_linear({{xiv(a, c), -tc}, {gv, -M}}, 0.0);
    }
  }

  if (logi.max_active && nf > 0) {
    std::vector<std::pair<int, double>> row;
    for (int a : free_idx) row.push_back({out.gvar[a], 1.0});
    prob.add_linear(std::move(row), static_cast<double>(*logi.max_active - fixed_ones));
  }

  // Large trace cap keeps the P recession direction bounded.
  {
    std::vector<std::pair<int, double>> tr;
    for (int i = 0; i < nx; ++i) tr.push_back({pidx(i, i), 1.0});
    prob.add_linear(std::move(tr), 1e9);
  }
  return out;
}

std::string index_list(const std::vector<int>& fixed, int value) {
  std::string s;
  for (size_t i = 0; i < fixed.size(); ++i)
    if (fixed[i] == value) {
      if (!s.empty()) s += ';';
      s += std::to_string(i + 1);
    }
  return s;
}

}  // namespace

BnbResult branch_and_bound(const SynthesisProblem& problem, const BigMConfig& cfg,
                           int period) {
  problem.validate();
  cfg.validate();
  const int nu = problem.ss.nu();
  const LogisticConstraints& logi = problem.logistics_for(period);

  BnbResult res;
  std::ostringstream trace;
  trace << "id,parent,fixed_one,fixed_zero,bound,status,incumbent\n";

  struct Node {
    std::vector<int> fixed;  // -1 free, 0/1 fixed
    int parent = -1;
  };
  std::vector<int> root_fixed(nu, -1);
  for (int i : logi.forced_on) root_fixed[i] = 1;
  for (int i : logi.forced_off) root_fixed[i] = 0;

  std::vector<Node> stack{{root_fixed, -1}};
  double incumbent = kInf;
  int next_id = 0;
  bool root_infeasible = false;

  const bool verbose = std::getenv("ESACTRL_BNB_VERBOSE") != nullptr;
  auto emit = [&](int id, int parent, const std::vector<int>& fixed, double bound,
                  const char* status) {
    trace << id << ',' << parent << ',' << index_list(fixed, 1) << ','
          << index_list(fixed, 0) << ',' << bound << ',' << status << ',' << incumbent
          << '\n';
    if (verbose)
      std::fprintf(stderr, "bnb node %d parent %d one=[%s] zero=[%s] bound=%g %s inc=%g\n",
                   id, parent, index_list(fixed, 1).c_str(), index_list(fixed, 0).c_str(),
                   bound, status, incumbent);
  };

  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    const int id = next_id++;
    ++res.node_count;

    std::vector<int> free_idx;
    for (int i = 0; i < nu; ++i)
      if (node.fixed[i] < 0) free_idx.push_back(i);

    if (free_idx.empty()) {
      VectorXd g(nu);
      for (int i = 0; i < nu; ++i) g[i] = node.fixed[i];
      if (!logi.admits(g)) {
        emit(id, node.parent, node.fixed, kInf, "inadmissible");
        continue;
      }
      ControllerSolution sol = certify_fixed(problem, cfg.alpha, cfg.mu0, cfg.mu1, g, period);
      if (sol.certified() && sol.objective < incumbent) {
        incumbent = sol.objective;
        res.gamma = g;
        res.solution = sol;
        emit(id, node.parent, node.fixed, sol.objective, "incumbent");
      } else {
        emit(id, node.parent, node.fixed, sol.certified() ? sol.objective : kInf,
             sol.certified() ? "integer" : "uncertified");
      }
      continue;
    }

    NodeRelax relax = build_relaxation(problem, cfg, node.fixed, period);
    if (relax.trivially_infeasible) {
      emit(id, node.parent, node.fixed, kInf, "infeasible");
      continue;
    }
    sdp::SdpSolution sol = sdp::solve(relax.prob);
    if (sol.status == sdp::SdpStatus::infeasible) {
      emit(id, node.parent, node.fixed, kInf, "infeasible");
      if (id == 0) root_infeasible = true;
      continue;
    }
    // Only a converged solve yields a trusted lower bound; otherwise keep
    // branching without pruning.
    const double bound = sol.status == sdp::SdpStatus::optimal
                             ? relax.obj_const + sol.objective_value
                             : -kInf;
    if (bound >= incumbent - 1e-6) {
      emit(id, node.parent, node.fixed, bound, "pruned");
      continue;
    }

    // Branch on the most fractional entry, ties toward the lower index.
    int pick = free_idx.front();
    double best_frac = -1.0;
    for (int i : free_idx) {
      double gi = 0.5;
      if (relax.gvar[i] >= 0 && sol.z.size() > relax.gvar[i])
        gi = std::clamp(sol.z[relax.gvar[i]], 0.0, 1.0);
      const double frac = std::min(gi, 1.0 - gi);
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        pick = i;
      }
    }
    emit(id, node.parent, node.fixed, bound, "branched");
    Node zero{node.fixed, id}, one{node.fixed, id};
    zero.fixed[pick] = 0;
    one.fixed[pick] = 1;
    stack.push_back(std::move(zero));
    stack.push_back(std::move(one));  // popped first: fix-to-one child leads
  }

  res.trace_csv = trace.str();
  res.feasible = incumbent < kInf;
  if (!res.feasible) {
    res.detail = root_infeasible
                     ? "root relaxation infeasible at the fixed scalars"
                     : "no admissible selection certifies at the fixed scalars";
    return res;
  }
  const double max_y = res.solution.Y.size() > 0 ? res.solution.Y.cwiseAbs().maxCoeff() : 0.0;
  if (max_y > 0.9 * cfg.big_m) {
    res.m_too_small = true;
    res.detail = "big_m check failed: max |Y| = " + std::to_string(max_y);
  }
  return res;
}

EnumerationResult enumerate_oracle(const SynthesisProblem& problem, const BigMConfig& cfg,
                                   int period) {
  problem.validate();
  cfg.validate();
  const int nu = problem.ss.nu();
  if (nu > 12) throw std::invalid_argument("enumerate_oracle: limited to 12 actuators");
  const LogisticConstraints& logi = problem.logistics_for(period);

  EnumerationResult res;
  for (unsigned mask = 0; mask < (1u << nu); ++mask) {
    VectorXd g(nu);
    for (int i = 0; i < nu; ++i) g[i] = (mask >> i) & 1u ? 1.0 : 0.0;
    if (!logi.admits(g)) continue;
    ++res.evaluated;
    ControllerSolution sol = certify_fixed(problem, cfg.alpha, cfg.mu0, cfg.mu1, g, period);
    if (sol.certified() && sol.objective < res.objective) {
      res.objective = sol.objective;
      res.gamma = g;
      res.feasible = true;
    }
  }
  return res;
}

}  // namespace esactrl
