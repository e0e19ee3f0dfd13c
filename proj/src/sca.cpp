#include "esactrl/sca.hpp"

#include "detail.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace esactrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kSqrt2 = 1.4142135623730951;
}  // namespace

void ScaConfig::validate() const {
  if (max_iter < 1) throw std::invalid_argument("sca: max_iter must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("sca: tol must be positive");
  if (!(eps1 > 0.0)) throw std::invalid_argument("sca: eps1 must be positive");
  if (!(init_mu0 > 0.0 && init_mu1 > 0.0))
    throw std::invalid_argument("sca: init_mu0 and init_mu1 must be positive");
  if (alpha_grid.empty()) throw std::invalid_argument("sca: alpha_grid must be nonempty");
  for (double a : alpha_grid)
    if (!(a > 0.0)) throw std::invalid_argument("sca: alpha grid values must be positive");
  for (int i = 0; i < gamma0.size(); ++i)
    if (gamma0[i] < 0.0 || gamma0[i] > 1.0)
      throw std::invalid_argument("sca: gamma0 entries must lie in [0,1]");
}

std::pair<MatrixXd, MatrixXd> dc_split(const MatrixXd& Bu, const VectorXd& gamma,
                                       const MatrixXd& Y) {
  if (Bu.cols() != gamma.size() || Y.rows() != gamma.size() || Y.cols() != Bu.rows())
    throw std::invalid_argument("dc_split: dimension mismatch");
  MatrixXd Gm = Bu * gamma.asDiagonal() - Y.transpose();
  MatrixXd Gp = Bu * gamma.asDiagonal() + Y.transpose();
  return {Gm * Gm.transpose(), Gp * Gp.transpose()};
}

MatrixXd linearize_h(const MatrixXd& Bu, const VectorXd& gamma0, const MatrixXd& Y0,
                     const VectorXd& gamma, const MatrixXd& Y) {
  if (gamma0.size() != gamma.size() || Y0.rows() != Y.rows() || Y0.cols() != Y.cols())
    throw std::invalid_argument("linearize_h: point/argument dimension mismatch");
  MatrixXd G = Bu * gamma.asDiagonal() + Y.transpose();
  MatrixXd G0 = Bu * gamma0.asDiagonal() + Y0.transpose();
  return G * G0.transpose() + G0 * G.transpose() - G0 * G0.transpose();
}

MatrixXd convexify_m1(const StateSpace& ss, const SynthVariables& vars,
                      const SynthVariables& point, double alpha) {
  const int nx = ss.nx(), nd = ss.nd(), nu = ss.nu();
  MatrixXd M = MatrixXd::Zero(nx + nd + nu, nx + nd + nu);
  MatrixXd TL = vars.P * ss.A.transpose() + ss.A * vars.P + alpha * vars.P -
                0.5 * linearize_h(ss.Bu, point.gamma, point.Y, vars.gamma, vars.Y);
  M.topLeftCorner(nx, nx) = 0.5 * (TL + TL.transpose());
  M.block(0, nx, nx, nd) = ss.Bd;
  M.block(nx, 0, nd, nx) = ss.Bd.transpose();
  M.block(nx, nx, nd, nd) = -alpha * vars.mu0 * MatrixXd::Identity(nd, nd);
  MatrixXd U = (ss.Bu * vars.gamma.asDiagonal() - vars.Y.transpose()) / kSqrt2;
  M.block(0, nx + nd, nx, nu) = U;
  M.block(nx + nd, 0, nu, nx) = U.transpose();
  M.bottomRightCorner(nu, nu) = -MatrixXd::Identity(nu, nu);
  return M;
}

double surrogate_product(double a, double b, double a0, double b0) {
  const double d0 = a0 - b0;
  return 0.25 * (a + b) * (a + b) - 0.25 * (2.0 * d0 * (a - b) - d0 * d0);
}

MatrixXd surrogate_mu1_p(double mu1, const MatrixXd& P, double mu10, const MatrixXd& P0) {
  const int n = static_cast<int>(P.rows());
  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd V = mu1 * I - P;
  MatrixXd Q = mu1 * I + P;
  MatrixXd Q0 = mu10 * I + P0;
  return 0.25 * V * V - 0.25 * (Q * Q0 + Q0 * Q - Q0 * Q0);
}

MatrixXd transform_m4(const MatrixXd& P, const MatrixXd& Y, double nu, double u_max,
                      double rho) {
  if (!(u_max > 0.0 && rho > 0.0 && nu > 0.0))
    throw std::invalid_argument("transform_m4: scalars must be positive");
  const int nx = static_cast<int>(P.rows());
  const int m = static_cast<int>(Y.rows());
  MatrixXd M = MatrixXd::Zero(nx + m, nx + m);
  M.topLeftCorner(nx, nx) = -(u_max * u_max) / (rho * rho) * 0.5 * (P + P.transpose());
  M.topRightCorner(nx, m) = Y.transpose();
  M.bottomLeftCorner(m, nx) = Y;
  M.bottomRightCorner(m, m) = -nu * MatrixXd::Identity(m, m);
  return M;
}

namespace {

// Linearization point of one majorize-minimize step, in balanced coordinates.
struct Point {
  VectorXd gamma;
  MatrixXd Y, P;
  double mu0 = 0.0, mu1 = 0.0, nu = 0.0;
};

// Scalar-variable layout of the surrogate SDP.
struct Layout {
  SymIndex pidx;
  int y_off = 0, g_off = 0, n_free = 0;
  std::vector<int> gidx;  // -1 when the selection entry is fixed
  VectorXd gfix;          // value used when fixed
  int mu0v = 0, mu1v = 0, mu2v = 0, nuv = 0, qv = 0, wv = 0, n = 0;
};

struct Surrogate {
  sdp::SdpProblem prob;
  Layout lay;
  double offset = 0.0;  // constant part of the surrogate objective
};

// Builds the convex surrogate at `pt`. The Gram squares are written in the
// equivalent re-centered form (quadratic in the deviation from the point,
// affine elsewhere) so each scalar variable keeps a sparse coefficient
// matrix; the tests check this form against the direct one entrywise.
Surrogate build_surrogate(const SynthesisProblem& problem, const detail::BalancedModel& bal,
                          const ScaConfig& cfg, double alpha, const Point& pt, int period) {
  const StateSpace& ss = bal.ss;
  const int nx = ss.nx(), nu = ss.nu(), nd = ss.nd(), np = ss.np();
  const double rho = problem.rho_eff();
  const double eps1 = cfg.eps1;
  const LogisticConstraints& logi = problem.logistics_for(period);

  Surrogate out;
  Layout& lay = out.lay;
  lay.pidx = SymIndex{nx};
  lay.y_off = lay.pidx.size();
  lay.g_off = lay.y_off + nu * nx;
  lay.gidx.assign(nu, -1);
  lay.gfix = VectorXd::Zero(nu);
  for (int i = 0; i < nu; ++i) {
    bool fixed = cfg.pin_gamma;
    double value = cfg.pin_gamma ? pt.gamma[i] : 0.0;
    for (int f : logi.forced_on)
      if (f == i && !fixed) fixed = true, value = 1.0;
    for (int f : logi.forced_off)
      if (f == i && !fixed) fixed = true, value = 0.0;
    if (fixed)
      lay.gfix[i] = value;
    else
      lay.gidx[i] = lay.g_off + lay.n_free++;
  }
  lay.mu0v = lay.g_off + lay.n_free;
  lay.mu1v = lay.mu0v + 1;
  lay.mu2v = lay.mu0v + 2;
  lay.nuv = lay.mu0v + 3;
  lay.qv = lay.mu0v + 4;
  lay.wv = lay.mu0v + 5;
  lay.n = lay.mu0v + 6;

  sdp::SdpProblem& prob = out.prob;
  prob.resize(lay.n);
  for (int i = 0; i < nu; ++i)
    if (lay.gidx[i] >= 0) prob.set_bounds(lay.gidx[i], 0.0, 1.0);
  prob.set_bounds(lay.mu0v, 1e-6, 1e6);
  prob.set_bounds(lay.mu1v, 1e-6, 1e6);
  prob.set_bounds(lay.mu2v, 1e-9, 1e9);
  prob.set_bounds(lay.nuv, 1e-9, 1e9);
  prob.set_bounds(lay.qv, 0.0, 1e12);
  prob.set_bounds(lay.wv, 0.0, 1e12);

  // Objective: the product mu0*mu1 is over-estimated by the epigraph scalar
  // q >= 0.25 (mu0/s + mu1 s)^2, the point-rescaled quadratic majorizer
  // (exact at the point for s^2 = mu0_0/mu1_0, global by the AM-GM bound).
  prob.objective[lay.qv] = 1.0;
  prob.objective[lay.mu2v] = 1.0;
  out.offset = 0.0;
  for (int i = 0; i < nu; ++i) {
    if (lay.gidx[i] >= 0)
      prob.objective[lay.gidx[i]] = problem.alpha_gamma;
    else
      out.offset += problem.alpha_gamma * lay.gfix[i];
  }

  const int b1 = prob.add_block(nx + nd + lay.n_free);  // decay block + Gram lift
  const int b2 = prob.add_block(nx + 2 * np + nx);  // output block + Gram lift
  const int b3 = prob.add_block(1 + nx);
  const int b4 = prob.add_block(nx + nu);  // congruence-transformed input block
  const int bP = prob.add_block(nx);
  const int bq = prob.add_block(2);  // epigraph of 0.25 (mu0+mu1)^2
  const int bw = prob.add_block(2);  // epigraph of 0.25 (nu+mu0)^2

  // Strictness margins transform congruently with the balancing; the lift
  // rows carry none (eliminating them reproduces the margined surrogate).
  const VectorXd ti2 = bal.t.cwiseInverse().cwiseAbs2();
  auto add_margin = [&](int blk, const VectorXd& d) {
    for (int i = 0; i < d.size(); ++i) prob.add_const(blk, i, i, eps1 * d[i]);
  };
  {
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

  // Decay block. For fixed selection entries the gain product is affine and
  // entered exactly; for free ones it is replaced by its linearization plus
  // the lifted Gram square of the deviation (Bu dGamma c1 - dY'/c1)/sqrt(2),
  // one lift column per free entry. The point-balancing factor c1 does not
  // change the majorized value, only how tight the majorizer is off-point.
  const int l1 = nx + nd;
  double c1 = 1.0;
  {
    double xn = 0.0, yn = 0.0;
    for (int i = 0; i < nu; ++i) {
      if (lay.gidx[i] < 0) continue;
      xn += pt.gamma[i] * pt.gamma[i] * ss.Bu.col(i).squaredNorm();
      yn += pt.Y.row(i).squaredNorm();
    }
    if (xn > 0.0 && yn > 0.0) c1 = std::clamp(std::sqrt(std::sqrt(yn / xn)), 1e-3, 1e3);
  }
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) {
      MatrixXd TL = detail::sym_basis_product(ss.A, i, j);
      TL(i, j) += alpha;
      TL(j, i) += (i == j) ? 0.0 : alpha;
      add_dense_term(prob, b1, lay.pidx(i, j), TL);
    }
  for (int i = 0; i < nu; ++i) {
    const bool free_i = lay.gidx[i] >= 0;
    const int lcol = free_i ? l1 + (lay.gidx[i] - lay.g_off) : -1;
    if (free_i) {
      // gamma_i: -sym(Bu e_i y0_i') top-left, Bu.col(i) c1/sqrt(2) in the lift
      MatrixXd Mi = -(ss.Bu.col(i) * pt.Y.row(i) +
                      pt.Y.row(i).transpose() * ss.Bu.col(i).transpose());
      for (int r = 0; r < nx; ++r)
        for (int c2 = r; c2 < nx; ++c2)
          if (Mi(r, c2) != 0.0) prob.add_term(b1, lay.gidx[i], r, c2, Mi(r, c2));
      for (int r = 0; r < nx; ++r)
        if (ss.Bu(r, i) != 0.0)
          prob.add_term(b1, lay.gidx[i], r, lcol, ss.Bu(r, i) * c1 / kSqrt2);
    }
    // Y_{i,c}: -g sym(Bu.col(i) e_c') top-left (g = fixed value or gamma0_i),
    // plus -1/(c1 sqrt(2)) in the lift when the selection entry is free.
    const double g = free_i ? pt.gamma[i] : lay.gfix[i];
    for (int c = 0; c < nx; ++c) {
      const int var = lay.y_off + i * nx + c;
      for (int r = 0; r < nx; ++r) {
        if (ss.Bu(r, i) == 0.0 || g == 0.0) continue;
        double v = -g * ss.Bu(r, i);
        if (r == c)
          prob.add_term(b1, var, c, c, 2.0 * v);
        else
          prob.add_term(b1, var, std::min(r, c), std::max(r, c), v);
      }
      if (free_i) prob.add_term(b1, var, c, lcol, -1.0 / (c1 * kSqrt2));
    }
    if (free_i) {
      // Constants: +sym(Bu gamma0_i y0_i) top-left and the lift re-centering.
      MatrixXd Ci = pt.gamma[i] * ss.Bu.col(i) * pt.Y.row(i);
      add_dense_const(prob, b1, MatrixXd(Ci + Ci.transpose()));
      for (int r = 0; r < nx; ++r) {
        double v = -(ss.Bu(r, i) * pt.gamma[i] * c1 - pt.Y(i, r) / c1) / kSqrt2;
        if (v != 0.0) prob.add_const(b1, r, lcol, v);
      }
      prob.add_const(b1, lcol, lcol, -1.0);
    }
  }
  for (int r = 0; r < nx; ++r)
    for (int d = 0; d < nd; ++d)
      if (ss.Bd(r, d) != 0.0) prob.add_const(b1, r, nx + d, ss.Bd(r, d));
  for (int d = 0; d < nd; ++d) prob.add_term(b1, lay.mu0v, nx + d, nx + d, -alpha);

  // Output block: -mu1 P is over-estimated by its linearization plus the
  // lifted square 0.25 (c2 (mu1 - mu1_0) I - (P - P0)/c2)^2, with c2 chosen
  // so both halves of the deviation carry comparable magnitudes at the point.
  const int l2 = nx + 2 * np;
  double c2 = 1.0;
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(pt.P, Eigen::EigenvaluesOnly);
    const double pnorm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (pnorm > 0.0 && pt.mu1 > 0.0)
      c2 = std::clamp(std::sqrt(pnorm / pt.mu1), 1e-6, 1e6);
  }
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) {
      const int var = lay.pidx(i, j);
      prob.add_term(b2, var, i, j, -pt.mu1);
      for (int q = 0; q < np; ++q) {
        prob.add_term(b2, var, i, nx + np + q, ss.C(q, j));
        if (i != j) prob.add_term(b2, var, j, nx + np + q, ss.C(q, i));
      }
      prob.add_term(b2, var, i, l2 + j, -0.5 / c2);
      if (i != j) prob.add_term(b2, var, j, l2 + i, -0.5 / c2);
    }
  add_dense_term(prob, b2, lay.mu1v, MatrixXd(-pt.P));
  for (int r = 0; r < nx; ++r) prob.add_term(b2, lay.mu1v, r, l2 + r, 0.5 * c2);
  for (int i = 0; i < nu; ++i)
    for (int c = 0; c < nx; ++c)
      for (int q = 0; q < np; ++q)
        if (ss.D(q, i) != 0.0)
          prob.add_term(b2, lay.y_off + i * nx + c, c, nx + np + q, ss.D(q, i));
  for (int q = 0; q < np; ++q) prob.add_term(b2, lay.mu2v, nx + q, nx + q, -1.0);
  for (int q = 0; q < np; ++q) prob.add_const(b2, nx + np + q, nx + np + q, -1.0);
  {
    add_dense_const(prob, b2, MatrixXd(pt.mu1 * pt.P));
    MatrixXd L0 = 0.5 * (pt.P / c2 - c2 * pt.mu1 * MatrixXd::Identity(nx, nx));
    for (int r = 0; r < nx; ++r)
      for (int c = 0; c < nx; ++c)
        if (L0(r, c) != 0.0) prob.add_const(b2, r, l2 + c, L0(r, c));
  }
  for (int c = 0; c < nx; ++c) prob.add_const(b2, l2 + c, l2 + c, -1.0);

  // Reachability block.
  prob.add_term(b3, lay.mu0v, 0, 0, -rho * rho);
  for (int r = 0; r < nx; ++r)
    if (bal.x0[r] != 0.0) prob.add_const(b3, 0, 1 + r, bal.x0[r]);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(b3, lay.pidx(i, j), 1 + i, 1 + j, -1.0);

  // Input-budget block after the exact congruence, with nu = 1/mu0.
  const double wcoef = (problem.u_max * problem.u_max) / (rho * rho);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(b4, lay.pidx(i, j), i, j, -wcoef);
  for (int i = 0; i < nu; ++i)
    for (int c = 0; c < nx; ++c) prob.add_term(b4, lay.y_off + i * nx + c, c, nx + i, 1.0);
  for (int i = 0; i < nu; ++i) prob.add_term(b4, lay.nuv, nx + i, nx + i, -1.0);

  // -P block.
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) prob.add_term(bP, lay.pidx(i, j), i, j, -1.0);

  // Scalar epigraphs, rescaled to be balanced at the point:
  // q >= 0.25 (mu0/sq + mu1 sq)^2 >= mu0 mu1 (exact when mu0/sq = mu1 sq),
  // w >= 0.25 (nu sw + mu0/sw)^2 >= nu mu0 likewise.
  const double sq = std::clamp(std::sqrt(pt.mu0 / pt.mu1), 1e-6, 1e6);
  prob.add_term(bq, lay.qv, 0, 0, -1.0);
  prob.add_term(bq, lay.mu0v, 0, 1, 0.5 / sq);
  prob.add_term(bq, lay.mu1v, 0, 1, 0.5 * sq);
  prob.add_const(bq, 1, 1, -1.0);
  const double sw = std::clamp(std::sqrt(pt.mu0 / pt.nu), 1e-6, 1e6);
  prob.add_term(bw, lay.wv, 0, 0, -1.0);
  prob.add_term(bw, lay.nuv, 0, 1, 0.5 * sw);
  prob.add_term(bw, lay.mu0v, 0, 1, 0.5 / sw);
  prob.add_const(bw, 1, 1, -1.0);

  // Coupling surrogate: w <= 1 implies nu * mu0 <= 1.
  prob.add_linear({{lay.wv, 1.0}}, 1.0);

  // Large trace cap keeps the P recession direction bounded.
  {
    std::vector<std::pair<int, double>> tr;
    for (int i = 0; i < nx; ++i) tr.push_back({lay.pidx(i, i), 1.0});
    prob.add_linear(std::move(tr), 1e9);
  }

  // Relaxed cap on the number of active actuators.
  if (logi.max_active) {
    std::vector<std::pair<int, double>> row;
    double fixed_sum = 0.0;
    for (int i = 0; i < nu; ++i) {
      if (lay.gidx[i] >= 0)
        row.push_back({lay.gidx[i], 1.0});
      else
        fixed_sum += lay.gfix[i];
    }
    if (!row.empty()) prob.add_linear(std::move(row), *logi.max_active - fixed_sum);
  }

  return out;
}

// Reads the optimizer back into a linearization point (balanced coordinates)
// and the matching iterate in original coordinates.
void extract_point(const VectorXd& z, const Layout& lay, const detail::BalancedModel& bal,
                   double alpha, Point& next, SynthVariables& orig) {
  const int nx = bal.ss.nx(), nu = bal.ss.nu();
  next.P.resize(nx, nx);
  for (int i = 0; i < nx; ++i)
    for (int j = i; j < nx; ++j) next.P(i, j) = next.P(j, i) = z[lay.pidx(i, j)];
  next.Y.resize(nu, nx);
  for (int i = 0; i < nu; ++i)
    for (int c = 0; c < nx; ++c) next.Y(i, c) = z[lay.y_off + i * nx + c];
  next.gamma.resize(nu);
  for (int i = 0; i < nu; ++i)
    next.gamma[i] = lay.gidx[i] >= 0 ? std::clamp(z[lay.gidx[i]], 0.0, 1.0) : lay.gfix[i];
  next.mu0 = z[lay.mu0v];
  next.mu1 = z[lay.mu1v];
  next.nu = z[lay.nuv];

  orig.P = bal.t.asDiagonal() * next.P * bal.t.asDiagonal();
  orig.Y = next.Y * bal.t.asDiagonal();
  orig.gamma = next.gamma;
  orig.mu0 = next.mu0;
  orig.mu1 = next.mu1;
  orig.mu2 = z[lay.mu2v];
  orig.alpha = alpha;
}

struct AlphaOutcome {
  bool has_iterate = false;
  ScaIterate best;
  std::string diag;
  std::vector<std::string> rows;
};

std::string csv_row(int iter, double alpha, double objective, double trace_gamma,
                    sdp::SdpStatus status, double residual) {
  std::ostringstream os;
  os.precision(12);
  os << iter << ',' << alpha << ',' << objective << ',' << trace_gamma << ','
     << sdp::to_string(status) << ',' << residual;
  return os.str();
}

AlphaOutcome run_alpha(const SynthesisProblem& problem, const ScaConfig& cfg,
                       const VectorXd& g0, double alpha, int period) {
  AlphaOutcome out;
  const StateSpace& ss = problem.ss;
  const int nu = ss.nu();

  // A fixed-scalar certificate at the rounded initial selection supplies a
  // linearization point with the right magnitudes; without it the quadratic
  // majorizers are hopelessly tight far from their expansion point.
  VectorXd ginit(nu);
  for (int i = 0; i < nu; ++i) ginit[i] = g0[i] >= 0.5 ? 1.0 : 0.0;
  SynthesisProblem unconstrained = problem;
  unconstrained.logistics.clear();
  ControllerSolution init =
      certify_fixed(unconstrained, alpha, cfg.init_mu0, cfg.init_mu1, ginit, 0);
  if (!init.certified()) {
    std::ostringstream os;
    os.precision(6);
    os << "alpha=" << alpha
       << ": surrogate infeasible at the initial point (init_mu0/init_mu1 too tight): "
       << sdp::to_string(init.solver_status);
    out.diag = os.str();
    out.rows.push_back(csv_row(0, alpha, kNan, g0.sum(), init.solver_status, kNan));
    return out;
  }

  const detail::BalancedModel bal = detail::balance_model(ss, problem.x0_eff());
  Point pt;
  pt.gamma = g0;
  pt.P = bal.t.cwiseInverse().asDiagonal() * init.P * bal.t.cwiseInverse().asDiagonal();
  pt.Y = init.Y * bal.t.cwiseInverse().asDiagonal();
  pt.mu0 = cfg.init_mu0;
  pt.mu1 = cfg.init_mu1;
  pt.nu = 1.0 / cfg.init_mu0;

  double L_prev = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    Surrogate sur = build_surrogate(problem, bal, cfg, alpha, pt, period);
    sdp::SdpSolution sol = sdp::solve(sur.prob);
    bool usable = sol.status == sdp::SdpStatus::optimal;
    if (!usable && sol.z.size() == static_cast<Eigen::Index>(sur.lay.n))
      usable = sdp::check(sur.prob, sol.z).max_residual() <= 1e-6;

    double L = kNan, maxres = kNan, trg = pt.gamma.sum();
    Point next;
    SynthVariables vars;
    if (usable) {
      extract_point(sol.z, sur.lay, bal, alpha, next, vars);
      L = sur.prob.objective.dot(sol.z) + sur.offset;
      auto res = residual(ss, vars, problem);
      maxres = *std::max_element(res.begin(), res.end());
      trg = next.gamma.sum();
    }
    out.rows.push_back(csv_row(k, alpha, L, trg, sol.status, maxres));

    if (!usable) {
      // Re-solving the identical surrogate is deterministic, so stop now.
      if (k == 0) {
        std::ostringstream os;
        os.precision(6);
        os << "alpha=" << alpha << ": surrogate infeasible at the initial point ("
           << sdp::to_string(sol.status) << ")";
        out.diag = os.str();
      }
      break;
    }
    stall = sol.status == sdp::SdpStatus::optimal ? 0 : stall + 1;
    // Majorize-minimize guarantees descent; if solver noise breaks it, keep
    // the previous iterate and stop.
    if (k > 0 && L > L_prev + 1e-9) break;
    out.has_iterate = true;
    out.best.vars = vars;
    out.best.objective = L;
    out.best.iteration = k;
    if (k > 0 && std::abs(L - L_prev) <= cfg.tol) {
      out.best.converged = true;
      break;
    }
    if (stall >= 3) break;
    pt = next;
    L_prev = L;
  }
  return out;
}

}  // namespace

ScaResult sca_run(const SynthesisProblem& problem, const ScaConfig& cfg, int period) {
  problem.validate();
  cfg.validate();
  const int nu = problem.ss.nu();
  if (cfg.gamma0.size() > 0 && cfg.gamma0.size() != nu)
    throw std::invalid_argument("sca: gamma0 length must equal the actuator count");
  const VectorXd g0 = cfg.gamma0.size() > 0 ? cfg.gamma0 : VectorXd::Ones(nu);

  const int ngrid = static_cast<int>(cfg.alpha_grid.size());
  std::vector<AlphaOutcome> outs(ngrid);
  if (cfg.parallel) {
    std::vector<std::future<AlphaOutcome>> futs;
    for (int a = 0; a < ngrid; ++a)
      futs.push_back(std::async(std::launch::async, run_alpha, std::cref(problem),
                                std::cref(cfg), std::cref(g0), cfg.alpha_grid[a], period));
    for (int a = 0; a < ngrid; ++a) outs[a] = futs[a].get();
  } else {
    for (int a = 0; a < ngrid; ++a)
      outs[a] = run_alpha(problem, cfg, g0, cfg.alpha_grid[a], period);
  }

  ScaResult res;
  res.log_csv = "iter,alpha,objective,trace_gamma,solver_status,residual\n";
  for (int a = 0; a < ngrid; ++a) {
    for (const auto& r : outs[a].rows) res.log_csv += r + "\n";
    if (!outs[a].diag.empty()) res.diagnostics.push_back(outs[a].diag);
    if (outs[a].has_iterate && outs[a].best.objective < res.lower) {
      res.final = outs[a].best;
      res.lower = outs[a].best.objective;
      res.alpha = cfg.alpha_grid[a];
      res.feasible = true;
    }
  }
  return res;
}

}  // namespace esactrl
