#include "esactrl/lmi.hpp"

#include "detail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace esactrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void LogisticConstraints::validate(int n_u) const {
  std::set<int> on(forced_on.begin(), forced_on.end());
  for (int i : forced_off)
    if (on.count(i)) throw std::invalid_argument("logistics: forced_on and forced_off overlap");
  for (int i : forced_on)
    if (i < 0 || i >= n_u) throw std::invalid_argument("logistics: forced_on index out of range");
  for (int i : forced_off)
    if (i < 0 || i >= n_u) throw std::invalid_argument("logistics: forced_off index out of range");
  if (max_active && (*max_active < 0 || *max_active > n_u))
    throw std::invalid_argument("logistics: max_active out of range");
}

bool LogisticConstraints::admits(const VectorXd& gamma_binary) const {
  for (int i : forced_on)
    if (gamma_binary[i] < 0.5) return false;
  for (int i : forced_off)
    if (gamma_binary[i] >= 0.5) return false;
  if (max_active) {
    int count = 0;
    for (int i = 0; i < gamma_binary.size(); ++i)
      if (gamma_binary[i] >= 0.5) ++count;
    if (count > *max_active) return false;
  }
  return true;
}

double SynthesisProblem::rho_eff() const {
  return rho > 0.0 ? rho : std::sqrt(static_cast<double>(ss.nd()));
}

VectorXd SynthesisProblem::x0_eff() const {
  return x0.size() > 0 ? x0 : VectorXd::Zero(ss.nx());
}

const LogisticConstraints& SynthesisProblem::logistics_for(int period) const {
  static const LogisticConstraints none;
  if (logistics.empty()) return none;
  if (period < static_cast<int>(logistics.size())) return logistics[period];
  return logistics.front();
}

void SynthesisProblem::validate() const {
  if (rho_eff() <= 0.0) throw std::invalid_argument("problem: rho must be positive");
  if (u_max <= 0.0) throw std::invalid_argument("problem: u_max must be positive");
  if (alpha_gamma < 0.0) throw std::invalid_argument("problem: alpha_gamma must be nonnegative");
  if (periods < 1) throw std::invalid_argument("problem: periods must be >= 1");
  if (x0.size() > 0 && x0.size() != ss.nx())
    throw std::invalid_argument("problem: x0 length must equal the state dimension");
  for (const auto& l : logistics) l.validate(ss.nu());
}

namespace detail {

VectorXd balance_scales(const MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  VectorXd t = VectorXd::Ones(n);
  for (int sweep = 0; sweep < 30; ++sweep) {
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        r += std::abs(A(i, j)) * t[j] / t[i];
        c += std::abs(A(j, i)) * t[i] / t[j];
      }
      if (r > 0.0 && c > 0.0) t[i] *= std::sqrt(std::sqrt(r / c));
    }
  }
  t /= t.minCoeff();
  return t;
}

MatrixXd sym_basis_product(const MatrixXd& A, int i, int j) {
  const int n = static_cast<int>(A.rows());
  MatrixXd S = MatrixXd::Zero(n, n);
  S.col(j) += A.col(i);
  if (i != j) S.col(i) += A.col(j);
  return S + S.transpose();
}

BalancedModel balance_model(const StateSpace& ss, const VectorXd& x0) {
  BalancedModel out;
  out.t = balance_scales(ss.A);
  out.ss.A = out.t.cwiseInverse().asDiagonal() * ss.A * out.t.asDiagonal();
  out.ss.Bu = out.t.cwiseInverse().asDiagonal() * ss.Bu;
  out.ss.Bd = out.t.cwiseInverse().asDiagonal() * ss.Bd;
  out.ss.C = ss.C * out.t.asDiagonal();
  out.ss.D = ss.D;
  out.x0 = x0.cwiseQuotient(out.t);
  return out;
}

}  // namespace detail

MatrixXd assemble_m1(const StateSpace& ss, const MatrixXd& P, const MatrixXd& Y,
                     const VectorXd& gamma, double mu0, double alpha) {
  const int nx = ss.nx(), nd = ss.nd();
  if (P.rows() != nx || Y.cols() != nx || gamma.size() != ss.nu())
    throw std::invalid_argument("assemble_m1: dimension mismatch");
  MatrixXd M = MatrixXd::Zero(nx + nd, nx + nd);
  MatrixXd BuGY = ss.Bu * gamma.asDiagonal() * Y;
  MatrixXd TL = P * ss.A.transpose() + ss.A * P + alpha * P - BuGY.transpose() - BuGY;
  M.topLeftCorner(nx, nx) = 0.5 * (TL + TL.transpose());
  M.topRightCorner(nx, nd) = ss.Bd;
  M.bottomLeftCorner(nd, nx) = ss.Bd.transpose();
  M.bottomRightCorner(nd, nd) = -alpha * mu0 * MatrixXd::Identity(nd, nd);
  return M;
}

MatrixXd assemble_m2(const StateSpace& ss, const MatrixXd& P, const MatrixXd& Y, double mu1,
                     double mu2) {
  const int nx = ss.nx(), np = ss.np();
  if (P.rows() != nx || Y.cols() != nx)
    throw std::invalid_argument("assemble_m2: dimension mismatch");
  MatrixXd M = MatrixXd::Zero(nx + 2 * np, nx + 2 * np);
  M.topLeftCorner(nx, nx) = -mu1 * 0.5 * (P + P.transpose());
  M.block(nx, nx, np, np) = -mu2 * MatrixXd::Identity(np, np);
  M.bottomRightCorner(np, np) = -MatrixXd::Identity(np, np);
  MatrixXd CPDY = ss.C * P + ss.D * Y;
  M.topRightCorner(nx, np) = CPDY.transpose();
  M.bottomLeftCorner(np, nx) = CPDY;
  return M;
}

MatrixXd assemble_m3(const VectorXd& x0, const MatrixXd& P, double mu0, double rho) {
  if (rho <= 0.0) throw std::invalid_argument("assemble_m3: rho must be positive");
  const int nx = static_cast<int>(P.rows());
  MatrixXd M = MatrixXd::Zero(1 + nx, 1 + nx);
  M(0, 0) = -mu0 * rho * rho;
  M.block(0, 1, 1, nx) = x0.transpose();
  M.block(1, 0, nx, 1) = x0;
  M.bottomRightCorner(nx, nx) = -0.5 * (P + P.transpose());
  return M;
}

MatrixXd assemble_m4(const MatrixXd& P, const MatrixXd& Y, double mu0, double u_max,
                     double rho) {
  if (u_max <= 0.0 || rho <= 0.0 || mu0 <= 0.0)
    throw std::invalid_argument("assemble_m4: scalars must be positive");
  const int nx = static_cast<int>(P.rows());
  const int nu = static_cast<int>(Y.rows());
  MatrixXd M = MatrixXd::Zero(nx + nu, nx + nu);
  M.topLeftCorner(nx, nx) = -(u_max * u_max) / (rho * rho) * 0.5 * (P + P.transpose());
  M.topRightCorner(nx, nu) = mu0 * Y.transpose();
  M.bottomLeftCorner(nu, nx) = mu0 * Y;
  M.bottomRightCorner(nu, nu) = -mu0 * MatrixXd::Identity(nu, nu);
  return M;
}

std::vector<double> residual(const StateSpace& ss, const SynthVariables& vars,
                             const SynthesisProblem& problem) {
  auto max_eig = [](const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };
  const double rho = problem.rho_eff();
  std::vector<double> out;
  out.push_back(max_eig(assemble_m1(ss, vars.P, vars.Y, vars.gamma, vars.mu0, vars.alpha)));
  out.push_back(max_eig(assemble_m2(ss, vars.P, vars.Y, vars.mu1, vars.mu2)));
  out.push_back(max_eig(assemble_m3(problem.x0_eff(), vars.P, vars.mu0, rho)));
  out.push_back(max_eig(assemble_m4(vars.P, vars.Y, vars.mu0, problem.u_max, rho)));
  out.push_back(max_eig(-vars.P));
  return out;
}

void add_dense_term(sdp::SdpProblem& prob, int blk, int var, const MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (M(i, j) != 0.0) prob.add_term(blk, var, i, j, M(i, j));
}

void add_dense_const(sdp::SdpProblem& prob, int blk, const MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (M(i, j) != 0.0) prob.add_const(blk, i, j, M(i, j));
}

ControllerSolution certify_fixed(const SynthesisProblem& problem, double alpha, double mu0,
                                 double mu1, const VectorXd& gamma_binary, int period) {
  problem.validate();
  if (!(alpha > 0.0 && mu0 > 0.0 && mu1 > 0.0))
    throw std::invalid_argument("certify_fixed: alpha, mu0, mu1 must be positive");
  const StateSpace& ss = problem.ss;
  const int nx = ss.nx(), nu = ss.nu(), nd = ss.nd(), np = ss.np();
  if (gamma_binary.size() != nu)
    throw std::invalid_argument("certify_fixed: gamma size mismatch");
  for (int i = 0; i < nu; ++i)
    if (gamma_binary[i] != 0.0 && gamma_binary[i] != 1.0)
      throw std::invalid_argument("certify_fixed: gamma must be binary");
  if (!problem.logistics_for(period).admits(gamma_binary))
    throw std::invalid_argument("certify_fixed: gamma violates the logistic constraints");

  const double rho = problem.rho_eff();

  // Work in balanced state coordinates (see detail::balance_scales).
  const detail::BalancedModel bal = detail::balance_model(ss, problem.x0_eff());
  const VectorXd& tbal = bal.t;
  const StateSpace& bss = bal.ss;
  const VectorXd& x0 = bal.x0;

  std::vector<int> active;
  for (int i = 0; i < nu; ++i)
    if (gamma_binary[i] == 1.0) active.push_back(i);
  const int na = static_cast<int>(active.size());

  SymIndex pidx{nx};
  const int nP = pidx.size();
  const int y_off = nP;
  const int mu2_var = nP + na * nx;
  auto yvar = [&](int a_local, int col) { return y_off + a_local * nx + col; };

  sdp::SdpProblem prob;
  prob.resize(mu2_var + 1);
  prob.objective[mu2_var] = 1.0;
  prob.set_bounds(mu2_var, 1e-9, 1e9);

  const int b1 = prob.add_block(nx + nd);
  const int b2 = prob.add_block(nx + 2 * np);
  const int b3 = prob.add_block(1 + nx);
  const int b4 = prob.add_block(nx + nu);
  const int bP = prob.add_block(nx);

  // The strictness margin M <= -eps1*I transforms congruently with the state
  // balancing, giving a per-entry diagonal margin eps1 * D^-2 in each block.
  {
    const VectorXd ti2 = tbal.cwiseInverse().cwiseAbs2();
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

  // M1 = [[P A' + A P + a P - Bu G Y - (Bu G Y)', Bd], [Bd', -a mu0 I]]
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) {
      MatrixXd TL = detail::sym_basis_product(bss.A, i, j);
      TL(i, j) += alpha;
      TL(j, i) += (i == j) ? 0.0 : alpha;
      add_dense_term(prob, b1, pidx(i, j), TL);  // placed top-left, same indices
    }
  for (int al = 0; al < na; ++al) {
    const int a = active[al];
    for (int c = 0; c < nx; ++c) {
      MatrixXd S = MatrixXd::Zero(nx, nx);
      S.col(c) -= bss.Bu.col(a);
      MatrixXd TL = S + S.transpose();
      add_dense_term(prob, b1, yvar(al, c), TL);
    }
  }
  for (int r = 0; r < nx; ++r)
    for (int d = 0; d < nd; ++d) prob.add_const(b1, r, nx + d, bss.Bd(r, d));
  for (int d = 0; d < nd; ++d) prob.add_const(b1, nx + d, nx + d, -alpha * mu0);

  // M2 = [[-mu1 P, O, P C' + Y' D'], [O, -mu2 I, O], [C P + D Y, O, -I]]
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) {
      prob.add_term(b2, pidx(i, j), i, j, -mu1);
      for (int q = 0; q < np; ++q) {
        prob.add_term(b2, pidx(i, j), i, nx + np + q, bss.C(q, j));
        if (i != j) prob.add_term(b2, pidx(i, j), j, nx + np + q, bss.C(q, i));
      }
    }
  for (int al = 0; al < na; ++al) {
    const int a = active[al];
    for (int c = 0; c < nx; ++c)
      for (int q = 0; q < np; ++q)
        if (bss.D(q, a) != 0.0) prob.add_term(b2, yvar(al, c), c, nx + np + q, bss.D(q, a));
  }
  for (int q = 0; q < np; ++q) prob.add_term(b2, mu2_var, nx + q, nx + q, -1.0);
  for (int q = 0; q < np; ++q) prob.add_const(b2, nx + np + q, nx + np + q, -1.0);

  // M3 = [[-mu0 rho^2, x0'], [x0, -P]]
  prob.add_const(b3, 0, 0, -mu0 * rho * rho);
  for (int r = 0; r < nx; ++r)
    if (x0[r] != 0.0) prob.add_const(b3, 0, 1 + r, x0[r]);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(b3, pidx(i, j), 1 + i, 1 + j, -1.0);

  // M4 = [[-(umax/rho)^2 P, mu0 Y'], [mu0 Y, -mu0 I]]
  const double w = (problem.u_max * problem.u_max) / (rho * rho);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(b4, pidx(i, j), i, j, -w);
  for (int al = 0; al < na; ++al)
    for (int c = 0; c < nx; ++c) prob.add_term(b4, yvar(al, c), c, nx + active[al], mu0);
  for (int u = 0; u < nu; ++u) prob.add_const(b4, nx + u, nx + u, -mu0);

  // -P block
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(bP, pidx(i, j), i, j, -1.0);

  // Large trace cap keeps the P recession direction bounded.
  {
    std::vector<std::pair<int, double>> tr;
    for (int i = 0; i < nx; ++i) tr.push_back({pidx(i, i), 1.0});
    prob.add_linear(std::move(tr), 1e9);
  }

  if (const char* dumpfile = std::getenv("ESACTRL_DUMP_SDP")) {
    std::ofstream out(dumpfile);
    sdp::dump(prob, out);
    if (std::getenv("ESACTRL_DUMP_ONLY")) return {};
  }
  sdp::SdpSolution sol = sdp::solve(prob);

  ControllerSolution out;
  out.gamma = gamma_binary;
  out.mu0 = mu0;
  out.mu1 = mu1;
  out.alpha = alpha;
  out.solver_status = sol.status;
  out.K = MatrixXd::Zero(nu, nx);

  if (sol.status == sdp::SdpStatus::infeasible ||
      (sol.status != sdp::SdpStatus::optimal)) {
    out.status = CertStatus::uncertified;
    sdp::SdpCheck chk = sdp::check(prob, sol.z);
    int worst = 0;
    for (size_t i = 1; i < chk.block_residuals.size(); ++i)
      if (chk.block_residuals[i] > chk.block_residuals[worst]) worst = static_cast<int>(i);
    out.violating_block = worst;
    out.detail = std::string("certificate solve: ") + sdp::to_string(sol.status);
    return out;
  }

  MatrixXd P(nx, nx), Y = MatrixXd::Zero(nu, nx);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) P(i, j) = P(j, i) = sol.z[pidx(i, j)];
  for (int al = 0; al < na; ++al)
    for (int c = 0; c < nx; ++c) Y(active[al], c) = sol.z[yvar(al, c)];
  P = tbal.asDiagonal() * P * tbal.asDiagonal();  // back to original coordinates
  Y = Y * tbal.asDiagonal();
  out.P = P;
  out.Y = Y;
  out.mu2 = sol.z[mu2_var];

  Eigen::LDLT<MatrixXd> pfact(P);
  if (pfact.info() != Eigen::Success) {
    out.status = CertStatus::uncertified;
    out.detail = "recovered P is not factorizable";
    return out;
  }
  out.K = -pfact.solve(Y.transpose()).transpose();
  out.mu = std::sqrt(mu0 * mu1 + out.mu2);
  out.objective = mu0 * mu1 + out.mu2 + problem.alpha_gamma * gamma_binary.sum();

  SynthVariables vars{P, Y, gamma_binary, mu0, mu1, out.mu2, alpha};
  auto res = residual(ss, vars, problem);
  double worst_res = *std::max_element(res.begin(), res.end());
  out.status = worst_res <= 1e-7 ? CertStatus::certified : CertStatus::uncertified;
  if (out.status == CertStatus::uncertified) out.detail = "residual check failed";
  return out;
}

namespace {

std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("problem config line " + std::to_string(lineno) +
                                  ": expected key = value");
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  return out;
}

std::vector<int> parse_index_list(const std::string& val) {
  std::vector<int> out;
  std::stringstream ss(val);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::stoi(tok) - 1);  // files use 1-based actuator numbers
  }
  return out;
}

}  // namespace

SynthesisProblem parse_problem_config(const std::string& text, const StateSpace& ss) {
  SynthesisProblem p;
  p.ss = ss;
  LogisticConstraints logi;
  bool has_logi = false;
  for (const auto& [key, val] : parse_kv(text)) {
    if (key == "rho") {
      p.rho = std::stod(val);
      if (p.rho <= 0.0) throw std::invalid_argument("problem config: rho must be positive");
    }
    else if (key == "u_max") p.u_max = std::stod(val);
    else if (key == "alpha_gamma") p.alpha_gamma = std::stod(val);
    else if (key == "periods") p.periods = std::stoi(val);
    else if (key == "x0") {
      if (val == "zeros") {
        p.x0 = Eigen::VectorXd::Zero(ss.nx());
      } else {
        std::vector<double> xs;
        std::stringstream s(val);
        std::string tok;
        while (std::getline(s, tok, ',')) xs.push_back(std::stod(tok));
        p.x0 = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
      }
    } else if (key == "forced_on") {
      logi.forced_on = parse_index_list(val);
      has_logi = true;
    } else if (key == "forced_off") {
      logi.forced_off = parse_index_list(val);
      has_logi = true;
    } else if (key == "max_active") {
      logi.max_active = std::stoi(val);
      has_logi = true;
    } else {
      throw std::invalid_argument("problem config: unknown key '" + key + "'");
    }
  }
  if (has_logi) p.logistics.push_back(logi);
  p.validate();
  return p;
}

SynthesisProblem load_problem_config(const std::filesystem::path& file, const StateSpace& ss) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open problem config: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_problem_config(buf.str(), ss);
}

}  // namespace esactrl
