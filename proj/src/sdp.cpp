#include "esactrl/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace esactrl::sdp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void SdpProblem::resize(int nv) {
  n_vars = nv;
  objective = Eigen::VectorXd::Zero(nv);
  lower.assign(nv, -kInf);
  upper.assign(nv, kInf);
}

int SdpProblem::add_block(int dim) {
  Block b;
  b.dim = dim;
  blocks.push_back(std::move(b));
  return static_cast<int>(blocks.size()) - 1;
}

void SdpProblem::add_const(int blk, int i, int j, double v) {
  if (v == 0.0) return;
  if (i > j) std::swap(i, j);
  blocks[blk].f0.push_back({i, j, v});
}

void SdpProblem::add_term(int blk, int var, int i, int j, double v) {
  if (v == 0.0) return;
  if (i > j) std::swap(i, j);
  blocks[blk].terms.push_back({var, {i, j, v}});
}

void SdpProblem::add_linear(std::vector<std::pair<int, double>> a, double b) {
  linear_ineqs.push_back({std::move(a), b});
}

void SdpProblem::set_bounds(int var, double lo, double up) {
  lower[var] = lo;
  upper[var] = up;
}

void SdpProblem::validate() const {
  if (n_vars < 0) throw std::invalid_argument("sdp: negative variable count");
  if (shift < 0.0) throw std::invalid_argument("sdp: shift must be nonnegative");
  if (objective.size() != n_vars) throw std::invalid_argument("sdp: objective size mismatch");
  for (const auto& b : blocks) {
    if (b.dim < 1 || b.dim > dim_cap) throw std::invalid_argument("sdp: block dimension out of range");
    for (const auto& t : b.f0)
      if (t.i < 0 || t.j >= b.dim) throw std::invalid_argument("sdp: block entry out of range");
    for (const auto& [k, t] : b.terms)
      if (k < 0 || k >= n_vars || t.i < 0 || t.j >= b.dim)
        throw std::invalid_argument("sdp: term index out of range");
  }
  for (const auto& r : linear_ineqs)
    for (const auto& [k, v] : r.a)
      if (k < 0 || k >= n_vars) throw std::invalid_argument("sdp: linear row index out of range");
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::iteration_limit: return "iteration-limit";
    case SdpStatus::numerical_failure: return "numerical-failure";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SymTriplet = SdpProblem::SymTriplet;

// Coalesced term with full-matrix column structure for scaling products.
struct CTerm {
  int var = 0;
  std::vector<SymTriplet> up;  // i <= j
  std::vector<int> cols;
  std::vector<std::vector<std::pair<int, double>>> colent;  // per col: (row, val)
};

struct CBlock {
  int dim = 0;
  MatrixXd F0;  // includes shift * I
  std::vector<CTerm> terms;
};

struct CRow {
  std::vector<std::pair<int, double>> a;
  double b = 0.0;
};

std::vector<SymTriplet> coalesce(std::vector<SymTriplet> v) {
  std::sort(v.begin(), v.end(), [](const SymTriplet& x, const SymTriplet& y) {
    return std::tie(x.i, x.j) < std::tie(y.i, y.j);
  });
  std::vector<SymTriplet> out;
  for (const auto& t : v) {
    if (!out.empty() && out.back().i == t.i && out.back().j == t.j)
      out.back().v += t.v;
    else
      out.push_back(t);
  }
  std::erase_if(out, [](const SymTriplet& t) { return t.v == 0.0; });
  return out;
}

void build_colstruct(CTerm& t, int /*dim*/) {
  std::vector<std::pair<int, std::pair<int, double>>> full;  // (col, (row, val))
  for (const auto& e : t.up) {
    full.push_back({e.j, {e.i, e.v}});
    if (e.i != e.j) full.push_back({e.i, {e.j, e.v}});
  }
  std::sort(full.begin(), full.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  for (const auto& [c, rv] : full) {
    if (t.cols.empty() || t.cols.back() != c) {
      t.cols.push_back(c);
      t.colent.emplace_back();
    }
    t.colent.back().push_back(rv);
  }
}

double dot_sym(const std::vector<SymTriplet>& up, const MatrixXd& M) {
  double s = 0.0;
  for (const auto& e : up) s += e.v * M(e.i, e.j) * (e.i == e.j ? 1.0 : 2.0);
  return s;
}

void add_sym(MatrixXd& M, const std::vector<SymTriplet>& up, double scale) {
  for (const auto& e : up) {
    M(e.i, e.j) += scale * e.v;
    if (e.i != e.j) M(e.j, e.i) += scale * e.v;
  }
}

// G = W * F * W for symmetric W and sparse symmetric F (column-structured).
void scaled_product(const MatrixXd& W, const CTerm& t, MatrixXd& G, MatrixXd& Ycols,
                    MatrixXd& Wc) {
  const int m = static_cast<int>(W.rows());
  const int nc = static_cast<int>(t.cols.size());
  Ycols.resize(m, nc);
  Wc.resize(nc, m);
  for (int c = 0; c < nc; ++c) {
    Ycols.col(c).setZero();
    for (const auto& [r, v] : t.colent[c]) Ycols.col(c) += v * W.col(r);
    Wc.row(c) = W.col(t.cols[c]).transpose();
  }
  G.resize(m, m);
  G.noalias() = Ycols * Wc;
}

struct BlockState {
  MatrixXd S, X, Winv, Sinv, Rp, Corr, Rhsmat, dS, dX, dSa, dXa;
  Eigen::LLT<MatrixXd> sllt;
};

double max_step(const MatrixXd& M, const MatrixXd& dM) {
  // Largest a with M + a*dM >= 0, via min eig of L^-1 dM L^-T.
  Eigen::LLT<MatrixXd> llt(M);
  MatrixXd W;
  if (llt.info() == Eigen::Success) {
    W = llt.matrixL().solve(dM);
    W = llt.matrixL().solve(W.transpose()).eval();
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    VectorXd d = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    MatrixXd Li = d.asDiagonal() * es.eigenvectors().transpose();
    W = Li * dM * Li.transpose();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()),
                                             Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  return lmin >= -1e-14 ? kInf : -1.0 / lmin;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SdpConfig& cfg) {
  problem.validate();
  const int n = problem.n_vars;
  VectorXd c = problem.objective;  // rescaled below alongside the constraints

  // Compile blocks: coalesce, sort terms by variable, add shift to F0.
  std::vector<CBlock> blocks;
  for (const auto& b : problem.blocks) {
    CBlock cb;
    cb.dim = b.dim;
    cb.F0 = MatrixXd::Zero(b.dim, b.dim);
    for (int i = 0; i < b.dim; ++i) cb.F0(i, i) = problem.shift;
    add_sym(cb.F0, coalesce(b.f0), 1.0);
    std::vector<std::pair<int, std::vector<SymTriplet>>> byvar;
    {
      auto terms = b.terms;
      std::sort(terms.begin(), terms.end(), [](const auto& x, const auto& y) {
        return std::tie(x.first, x.second.i, x.second.j) <
               std::tie(y.first, y.second.i, y.second.j);
      });
      for (const auto& [k, t] : terms) {
        if (byvar.empty() || byvar.back().first != k) byvar.push_back({k, {}});
        byvar.back().second.push_back(t);
      }
    }
    for (auto& [k, v] : byvar) {
      CTerm t;
      t.var = k;
      t.up = coalesce(std::move(v));
      if (t.up.empty()) continue;
      build_colstruct(t, b.dim);
      cb.terms.push_back(std::move(t));
    }
    blocks.push_back(std::move(cb));
  }

  // Fold variable bounds into linear rows.
  std::vector<CRow> rows;
  for (const auto& r : problem.linear_ineqs) {
    CRow cr;
    cr.a = r.a;
    std::sort(cr.a.begin(), cr.a.end());
    cr.b = r.b;
    rows.push_back(std::move(cr));
  }
  for (int k = 0; k < n; ++k) {
    if (problem.lower[k] > -kInf) rows.push_back({{{k, -1.0}}, -problem.lower[k]});
    if (problem.upper[k] < kInf) rows.push_back({{{k, 1.0}}, problem.upper[k]});
  }
  const int nrows = static_cast<int>(rows.size());

  // Ruiz equilibration: alternate block/row and variable-column rescaling so
  // that huge caps, bounds, or stiff dynamics do not poison the scaling.
  // Internally we solve the scaled problem in w = varscale .* z.
  VectorXd varscale = VectorXd::Ones(n);
  {
    auto term_max = [](const CTerm& t) {
      double m = 0.0;
      for (const auto& e : t.up) m = std::max(m, std::abs(e.v));
      return m;
    };
    for (int pass = 0; pass < 5; ++pass) {
      for (auto& b : blocks) {
        double m = b.dim > 0 ? b.F0.cwiseAbs().maxCoeff() : 0.0;
        for (const auto& t : b.terms) m = std::max(m, term_max(t));
        if (m <= 0.0) continue;
        double sc = std::sqrt(m);
        b.F0 /= sc;
        for (auto& t : b.terms)
          for (auto& e : t.up) e.v /= sc;
      }
      for (auto& r : rows) {
        double m = std::abs(r.b);
        for (const auto& [k, v] : r.a) m = std::max(m, std::abs(v));
        if (m <= 0.0) continue;
        double sc = std::sqrt(m);
        for (auto& [k, v] : r.a) v /= sc;
        r.b /= sc;
      }
      VectorXd colmax = VectorXd::Zero(n);
      for (const auto& b : blocks)
        for (const auto& t : b.terms) colmax[t.var] = std::max(colmax[t.var], term_max(t));
      for (const auto& r : rows)
        for (const auto& [k, v] : r.a) colmax[k] = std::max(colmax[k], std::abs(v));
      VectorXd cscl = VectorXd::Ones(n);
      for (int k = 0; k < n; ++k)
        if (colmax[k] > 0.0) cscl[k] = std::sqrt(colmax[k]);
      for (auto& b : blocks)
        for (auto& t : b.terms)
          for (auto& e : t.up) e.v /= cscl[t.var];
      for (auto& r : rows)
        for (auto& [k, v] : r.a) v /= cscl[k];
      varscale = varscale.cwiseProduct(cscl);
    }
    for (auto& b : blocks)
      for (auto& t : b.terms) {
        t.cols.clear();
        t.colent.clear();
        build_colstruct(t, b.dim);
      }
    c = c.cwiseQuotient(varscale);
  }

  const int nblk = static_cast<int>(blocks.size());
  double nu = nrows;
  double f0scale = 1.0;
  for (const auto& b : blocks) {
    nu += b.dim;
    f0scale = std::max(f0scale, b.F0.cwiseAbs().maxCoeff());
  }
  for (const auto& r : rows) f0scale = std::max(f0scale, std::abs(r.b));
  const double cscale = 1.0 + (n > 0 ? c.cwiseAbs().maxCoeff() : 0.0);

  // Interior start.
  VectorXd z = VectorXd::Zero(n);
  const double eta = 1.0 + f0scale;
  const double xi = cscale;
  std::vector<BlockState> st(nblk);
  for (int j = 0; j < nblk; ++j) {
    st[j].S = eta * MatrixXd::Identity(blocks[j].dim, blocks[j].dim);
    st[j].X = xi * MatrixXd::Identity(blocks[j].dim, blocks[j].dim);
  }
  VectorXd s = VectorXd::Constant(nrows, eta);
  VectorXd lam = VectorXd::Constant(nrows, xi);

  SdpSolution sol;
  sol.z = z;
  if (nu == 0) {  // vacuous problem
    sol.status = SdpStatus::optimal;
    sol.objective_value = 0.0;
    return sol;
  }

  auto residuals = [&](const VectorXd& zz, const std::vector<BlockState>& bs,
                       const VectorXd& ss, const VectorXd& ll, double& p_inf,
                       double& d_inf, double& mu_out) {
    p_inf = 0.0;
    for (int j = 0; j < nblk; ++j) {
      MatrixXd Fz = blocks[j].F0;
      for (const auto& t : blocks[j].terms) add_sym(Fz, t.up, zz[t.var]);
      double r = (bs[j].S + Fz).cwiseAbs().maxCoeff();
      p_inf = std::max(p_inf, r);
    }
    for (int r = 0; r < nrows; ++r) {
      double az = 0.0;
      for (const auto& [k, v] : rows[r].a) az += v * zz[k];
      p_inf = std::max(p_inf, std::abs(ss[r] + az - rows[r].b));
    }
    p_inf /= (1.0 + f0scale);
    VectorXd rd = c;
    for (int j = 0; j < nblk; ++j)
      for (const auto& t : blocks[j].terms) rd[t.var] += dot_sym(t.up, bs[j].X);
    for (int r = 0; r < nrows; ++r)
      for (const auto& [k, v] : rows[r].a) rd[k] += v * ll[r];
    d_inf = (n > 0 ? rd.cwiseAbs().maxCoeff() : 0.0) / cscale;
    double comp = ll.dot(ss);
    for (int j = 0; j < nblk; ++j) comp += bs[j].X.cwiseProduct(bs[j].S).sum();
    mu_out = comp / nu;
  };

  double best_merit = kInf;
  VectorXd best_z = z;
  double best_obj = 0.0;
  int last_improve_iter = 0;

  MatrixXd H(n, n), G, Ycols, Wc, Fdz, Tmp;
  VectorXd rd(n);

  sol.status = SdpStatus::iteration_limit;

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // Residuals at the current point.
    double p_inf, d_inf, mu;
    for (int j = 0; j < nblk; ++j) {
      MatrixXd Fz = blocks[j].F0;
      for (const auto& t : blocks[j].terms) add_sym(Fz, t.up, z[t.var]);
      st[j].Rp = st[j].S + Fz;
    }
    VectorXd rp(nrows);
    for (int r = 0; r < nrows; ++r) {
      double az = 0.0;
      for (const auto& [k, v] : rows[r].a) az += v * z[k];
      rp[r] = s[r] + az - rows[r].b;
    }
    rd = c;
    for (int j = 0; j < nblk; ++j)
      for (const auto& t : blocks[j].terms) rd[t.var] += dot_sym(t.up, st[j].X);
    for (int r = 0; r < nrows; ++r)
      for (const auto& [k, v] : rows[r].a) rd[k] += v * lam[r];

    double comp = lam.dot(s);
    for (int j = 0; j < nblk; ++j) comp += st[j].X.cwiseProduct(st[j].S).sum();
    mu = comp / nu;

    double pobj = c.dot(z);
    double dobj = 0.0;
    for (int j = 0; j < nblk; ++j) dobj += blocks[j].F0.cwiseProduct(st[j].X).sum();
    for (int r = 0; r < nrows; ++r) dobj -= lam[r] * rows[r].b;

    double maxrp = 0.0;
    for (int j = 0; j < nblk; ++j) maxrp = std::max(maxrp, st[j].Rp.cwiseAbs().maxCoeff());
    if (nrows > 0) maxrp = std::max(maxrp, rp.cwiseAbs().maxCoeff());
    p_inf = maxrp / (1.0 + f0scale);
    d_inf = (n > 0 ? rd.cwiseAbs().maxCoeff() : 0.0) / cscale;
    double gap_rel = std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));

    double merit = mu / (1.0 + f0scale * cscale) + p_inf + d_inf;
    sol.trace.push_back({iter, mu, p_inf, d_inf, gap_rel, merit, 0.0});
    sol.iterations = iter;
    if (merit < best_merit * (1.0 - 1e-8)) last_improve_iter = iter;
    if (merit < best_merit) {
      best_merit = merit;
      best_z = z;
      best_obj = pobj;
    }

    if (p_inf <= cfg.feas_tol && d_inf <= cfg.feas_tol && gap_rel <= cfg.gap_tol) {
      sol.status = SdpStatus::optimal;
      best_z = z;
      best_obj = pobj;
      sol.gap = gap_rel;
      break;
    }

    // Primal infeasibility: approximate Farkas ray (X, lam) with
    // <F_k, X> + a_k . lam ~ 0 and positive ray value <F0, X> - b . lam.
    auto is_certificate = [&]() {
      double nrmray = lam.lpNorm<1>();
      for (int j = 0; j < nblk; ++j) nrmray += st[j].X.norm();
      if (nrmray < 1.0) return false;
      double rayres = (n > 0 ? (rd - c).cwiseAbs().maxCoeff() : 0.0) / nrmray;
      return rayres <= 1e-7 * cscale && dobj / nrmray >= 1e-8 * (1.0 + f0scale);
    };
    if (is_certificate()) {
      sol.status = SdpStatus::infeasible;
      break;
    }
    // Stalled: the merit has not improved for many iterations; further
    // iterations only repeat microscopic accepted steps.
    if (iter - last_improve_iter >= 20) {
      sol.status = is_certificate() ? SdpStatus::infeasible : SdpStatus::iteration_limit;
      break;
    }

    // NT scalings.
    bool scale_ok = true;
    for (int j = 0; j < nblk; ++j) {
      auto& B = st[j];
      B.sllt.compute(B.S);
      if (B.sllt.info() != Eigen::Success) {
        scale_ok = false;
        break;
      }
      const int m = blocks[j].dim;
      MatrixXd A = B.sllt.matrixU() * B.X * B.sllt.matrixL();
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
      if (es.info() != Eigen::Success) {
        scale_ok = false;
        break;
      }
      VectorXd d = es.eigenvalues().cwiseMax(1e-300);
      MatrixXd T = B.sllt.matrixU().solve(es.eigenvectors());
      B.Winv.noalias() = T * d.cwiseSqrt().asDiagonal() * T.transpose();
      B.Sinv = B.sllt.solve(MatrixXd::Identity(m, m));
    }
    if (!scale_ok) {
      sol.status = SdpStatus::numerical_failure;
      break;
    }

    // Schur complement H.
    H.setZero();
    for (int j = 0; j < nblk; ++j) {
      const auto& terms = blocks[j].terms;
      for (size_t kt = 0; kt < terms.size(); ++kt) {
        scaled_product(st[j].Winv, terms[kt], G, Ycols, Wc);
        for (size_t lt = kt; lt < terms.size(); ++lt)
          H(terms[kt].var, terms[lt].var) += dot_sym(terms[lt].up, G);
      }
    }
    for (int r = 0; r < nrows; ++r) {
      double h = lam[r] / s[r];
      for (const auto& [k1, v1] : rows[r].a)
        for (const auto& [k2, v2] : rows[r].a)
          if (k1 <= k2) H(k1, k2) += h * v1 * v2;
    }
    MatrixXd Hs = H.selfadjointView<Eigen::Upper>();
    double hreg = 1e-13 * (1.0 + Hs.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<MatrixXd> hllt;
    for (int attempt = 0; attempt < 4; ++attempt) {
      hllt.compute(Hs + hreg * MatrixXd::Identity(n, n));
      if (hllt.info() == Eigen::Success) break;
      hreg *= 1e3;
    }
    if (hllt.info() != Eigen::Success) {
      sol.status = SdpStatus::numerical_failure;
      break;
    }
    // The Schur complement conditions like 1/mu^2, so refine each solve.
    auto schur_solve = [&](const VectorXd& rhs) {
      VectorXd x = hllt.solve(rhs);
      for (int ref = 0; ref < 2; ++ref) {
        VectorXd r = rhs - Hs.selfadjointView<Eigen::Upper>() * x;
        x += hllt.solve(r);
      }
      return x;
    };

    VectorXd dz, ds, dlam, dza, dsa, dlama;
    // Predictor (affine scaling, sigma = 0).
    {
      VectorXd rhs = -rd;
      for (int j = 0; j < nblk; ++j) {
        auto& B = st[j];
        B.Rhsmat.noalias() = B.Winv * B.Rp * B.Winv;
        B.Rhsmat -= B.X;
        for (const auto& t : blocks[j].terms) rhs[t.var] -= dot_sym(t.up, B.Rhsmat);
      }
      for (int r = 0; r < nrows; ++r) {
        double t = -lam[r] + (lam[r] / s[r]) * rp[r];
        for (const auto& [k, v] : rows[r].a) rhs[k] -= v * t;
      }
      dza = schur_solve(rhs);
      dsa.resize(nrows);
      dlama.resize(nrows);
      for (int r = 0; r < nrows; ++r) {
        double adz = 0.0;
        for (const auto& [k, v] : rows[r].a) adz += v * dza[k];
        dsa[r] = -rp[r] - adz;
        dlama[r] = -lam[r] - (lam[r] / s[r]) * dsa[r];
      }
      for (int j = 0; j < nblk; ++j) {
        auto& B = st[j];
        Fdz = MatrixXd::Zero(blocks[j].dim, blocks[j].dim);
        for (const auto& t : blocks[j].terms) add_sym(Fdz, t.up, dza[t.var]);
        B.dSa = -Fdz - B.Rp;
        Tmp.noalias() = B.Winv * Fdz;
        B.dXa.noalias() = Tmp * B.Winv;
        B.dXa += B.Rhsmat;
      }
    }
    double alpha_aff = 1.0;
    for (int j = 0; j < nblk; ++j) {
      alpha_aff = std::min(alpha_aff, cfg.tau * max_step(st[j].S, st[j].dSa));
      alpha_aff = std::min(alpha_aff, cfg.tau * max_step(st[j].X, st[j].dXa));
    }
    for (int r = 0; r < nrows; ++r) {
      if (dsa[r] < 0) alpha_aff = std::min(alpha_aff, cfg.tau * (-s[r] / dsa[r]));
      if (dlama[r] < 0) alpha_aff = std::min(alpha_aff, cfg.tau * (-lam[r] / dlama[r]));
    }
    double comp_aff = (lam + alpha_aff * dlama).dot(s + alpha_aff * dsa);
    for (int j = 0; j < nblk; ++j)
      comp_aff += (st[j].X + alpha_aff * st[j].dXa)
                      .cwiseProduct(st[j].S + alpha_aff * st[j].dSa)
                      .sum();
    double mu_aff = std::max(comp_aff / nu, 0.0);
    double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 1e-8, 1.0);

    auto compute_direction = [&](double sg, bool with_corr) {
      VectorXd corr_lin = VectorXd::Zero(nrows);
      for (int j = 0; j < nblk; ++j) {
        auto& B = st[j];
        if (with_corr) {
          Tmp.noalias() = B.dXa * B.dSa;
          MatrixXd Q;
          Q.noalias() = Tmp * B.Sinv;
          B.Corr = 0.5 * (Q + Q.transpose());
        } else {
          B.Corr = MatrixXd::Zero(blocks[j].dim, blocks[j].dim);
        }
      }
      if (with_corr)
        for (int r = 0; r < nrows; ++r) corr_lin[r] = dlama[r] * dsa[r];
      // Recentering toward sg * mu plus optional second-order terms.
      VectorXd rhs = -rd;
      for (int j = 0; j < nblk; ++j) {
        auto& B = st[j];
        B.Rhsmat.noalias() = B.Winv * B.Rp * B.Winv;
        B.Rhsmat += sg * mu * B.Sinv - B.X - B.Corr;
        for (const auto& t : blocks[j].terms) rhs[t.var] -= dot_sym(t.up, B.Rhsmat);
      }
      for (int r = 0; r < nrows; ++r) {
        double t = (sg * mu - lam[r] * s[r] - corr_lin[r]) / s[r] +
                   (lam[r] / s[r]) * rp[r];
        for (const auto& [k, v] : rows[r].a) rhs[k] -= v * t;
      }
      dz = schur_solve(rhs);
      ds.resize(nrows);
      dlam.resize(nrows);
      for (int r = 0; r < nrows; ++r) {
        double adz = 0.0;
        for (const auto& [k, v] : rows[r].a) adz += v * dz[k];
        ds[r] = -rp[r] - adz;
        dlam[r] = (sg * mu - lam[r] * s[r] - corr_lin[r]) / s[r] -
                  (lam[r] / s[r]) * ds[r];
      }
      for (int j = 0; j < nblk; ++j) {
        auto& B = st[j];
        Fdz = MatrixXd::Zero(blocks[j].dim, blocks[j].dim);
        for (const auto& t : blocks[j].terms) add_sym(Fdz, t.up, dz[t.var]);
        B.dS = -Fdz - B.Rp;
        Tmp.noalias() = B.Winv * Fdz;
        B.dX.noalias() = Tmp * B.Winv;
        B.dX += B.Rhsmat;
      }
    };

    // Relative centrality: min eig of the X*S pairs over their mean.
    auto centrality = [&](const std::vector<BlockState>& bs, const VectorXd& ss,
                          const VectorXd& ll, double mc) {
      double lo = kInf;
      for (int j = 0; j < nblk; ++j) {
        Eigen::LLT<MatrixXd> l(bs[j].S);
        if (l.info() != Eigen::Success) return 0.0;
        MatrixXd M = l.matrixL().transpose() * bs[j].X * l.matrixL();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
      }
      for (int r = 0; r < nrows; ++r) lo = std::min(lo, ll[r] * ss[r]);
      return lo / std::max(mc, 1e-300);
    };

    // Accept the largest damped step that does not increase the merit value
    // and keeps the iterate inside a wide central-path neighborhood (badly
    // off-center iterates make later Newton directions blow up).
    const double gamma_ctr = 1e-3;
    const double ctr_req = std::min(gamma_ctr, 0.9 * centrality(st, s, lam, mu));
    auto try_accept = [&]() {
      double alpha = 1.0;
      for (int j = 0; j < nblk; ++j) {
        alpha = std::min(alpha, cfg.tau * max_step(st[j].S, st[j].dS));
        alpha = std::min(alpha, cfg.tau * max_step(st[j].X, st[j].dX));
      }
      for (int r = 0; r < nrows; ++r) {
        if (ds[r] < 0) alpha = std::min(alpha, cfg.tau * (-s[r] / ds[r]));
        if (dlam[r] < 0) alpha = std::min(alpha, cfg.tau * (-lam[r] / dlam[r]));
      }
      std::vector<BlockState> cand = st;
      for (int bt = 0; bt < 30; ++bt) {
        VectorXd zc = z + alpha * dz;
        VectorXd sc = s + alpha * ds;
        VectorXd lc = lam + alpha * dlam;
        for (int j = 0; j < nblk; ++j) {
          cand[j].S = st[j].S + alpha * st[j].dS;
          cand[j].X = st[j].X + alpha * st[j].dX;
        }
        double pc, dc, mc;
        residuals(zc, cand, sc, lc, pc, dc, mc);
        double mcand = mc / (1.0 + f0scale * cscale) + pc + dc;
        if (mcand <= merit * (1.0 + 1e-12) + 1e-300 &&
            centrality(cand, sc, lc, mc) >= ctr_req) {
          z = zc;
          s = sc;
          lam = lc;
          for (int j = 0; j < nblk; ++j) {
            st[j].S = cand[j].S;
            st[j].X = cand[j].X;
          }
          sol.trace.back().step = alpha;
          return true;
        }
        alpha *= 0.5;
      }
      return false;
    };

    compute_direction(sigma, cfg.use_corrector);
    bool accepted = try_accept();
    if (!accepted) {
      // Mehrotra step rejected everywhere: fall back to a pure centering
      // step, which still contracts the residuals and restores centrality.
      compute_direction(1.0, false);
      accepted = try_accept();
    }
    if (!accepted) {
      sol.status = is_certificate() ? SdpStatus::infeasible : SdpStatus::iteration_limit;
      break;
    }
  }

  sol.z = best_z.cwiseQuotient(varscale);
  sol.objective_value = best_obj;
  SdpCheck chk = check(problem, sol.z);
  sol.max_residual = chk.max_residual();
  if (sol.status == SdpStatus::optimal) {
    sol.objective_value = problem.objective.dot(sol.z);
  } else if (!sol.trace.empty()) {
    sol.gap = sol.trace.back().gap;
  }
  return sol;
}

double SdpCheck::max_residual() const {
  double r = worst_linear;
  for (double b : block_residuals) r = std::max(r, b);
  return r;
}

SdpCheck check(const SdpProblem& problem, const Eigen::VectorXd& z) {
  if (z.size() != problem.n_vars) throw std::invalid_argument("sdp::check: z size mismatch");
  SdpCheck out;
  for (const auto& b : problem.blocks) {
    MatrixXd F = problem.shift * MatrixXd::Identity(b.dim, b.dim);
    for (const auto& t : b.f0) {
      F(t.i, t.j) += t.v;
      if (t.i != t.j) F(t.j, t.i) += t.v;
    }
    for (const auto& [k, t] : b.terms) {
      F(t.i, t.j) += z[k] * t.v;
      if (t.i != t.j) F(t.j, t.i) += z[k] * t.v;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(F, Eigen::EigenvaluesOnly);
    out.block_residuals.push_back(es.eigenvalues().maxCoeff());
  }
  for (const auto& r : problem.linear_ineqs) {
    double az = 0.0;
    for (const auto& [k, v] : r.a) az += v * z[k];
    out.worst_linear = std::max(out.worst_linear, az - r.b);
  }
  for (int k = 0; k < problem.n_vars; ++k) {
    if (problem.lower[k] > -kInf)
      out.worst_linear = std::max(out.worst_linear, problem.lower[k] - z[k]);
    if (problem.upper[k] < kInf)
      out.worst_linear = std::max(out.worst_linear, z[k] - problem.upper[k]);
  }
  return out;
}

namespace {
void put(std::ostream& o, double v) { o << ' ' << std::hexfloat << v << std::defaultfloat; }
double getd(std::istream& in) {
  std::string tok;
  in >> tok;
  return std::strtod(tok.c_str(), nullptr);
}
}  // namespace

void dump(const SdpProblem& p, std::ostream& out) {
  out << "esactrl-sdp 1\n";
  out << "nvars " << p.n_vars << "\nshift";
  put(out, p.shift);
  out << "\ndimcap " << p.dim_cap << "\nobjective";
  for (int k = 0; k < p.n_vars; ++k) put(out, p.objective[k]);
  out << "\nlower";
  for (double v : p.lower) put(out, v);
  out << "\nupper";
  for (double v : p.upper) put(out, v);
  out << "\nblocks " << p.blocks.size() << "\n";
  for (const auto& b : p.blocks) {
    out << "block " << b.dim << ' ' << b.f0.size() << ' ' << b.terms.size() << "\n";
    for (const auto& t : b.f0) {
      out << t.i << ' ' << t.j;
      put(out, t.v);
      out << "\n";
    }
    for (const auto& [k, t] : b.terms) {
      out << k << ' ' << t.i << ' ' << t.j;
      put(out, t.v);
      out << "\n";
    }
  }
  out << "linrows " << p.linear_ineqs.size() << "\n";
  for (const auto& r : p.linear_ineqs) {
    out << "row " << r.a.size();
    put(out, r.b);
    for (const auto& [k, v] : r.a) {
      out << ' ' << k;
      put(out, v);
    }
    out << "\n";
  }
  out << "end\n";
}

SdpProblem load(std::istream& in) {
  std::string tok;
  int version;
  in >> tok >> version;
  if (tok != "esactrl-sdp" || version != 1)
    throw std::runtime_error("sdp::load: unrecognized header");
  SdpProblem p;
  int nv;
  in >> tok >> nv;
  p.resize(nv);
  in >> tok;
  p.shift = getd(in);
  in >> tok >> p.dim_cap;
  in >> tok;
  for (int k = 0; k < nv; ++k) p.objective[k] = getd(in);
  in >> tok;
  for (int k = 0; k < nv; ++k) p.lower[k] = getd(in);
  in >> tok;
  for (int k = 0; k < nv; ++k) p.upper[k] = getd(in);
  size_t nb;
  in >> tok >> nb;
  for (size_t j = 0; j < nb; ++j) {
    int dim;
    size_t nf, nt;
    in >> tok >> dim >> nf >> nt;
    int blk = p.add_block(dim);
    for (size_t e = 0; e < nf; ++e) {
      int i, jj;
      in >> i >> jj;
      p.blocks[blk].f0.push_back({i, jj, getd(in)});
    }
    for (size_t e = 0; e < nt; ++e) {
      int k, i, jj;
      in >> k >> i >> jj;
      p.blocks[blk].terms.push_back({k, {i, jj, getd(in)}});
    }
  }
  size_t nr;
  in >> tok >> nr;
  for (size_t r = 0; r < nr; ++r) {
    size_t nnz;
    in >> tok >> nnz;
    SdpProblem::LinearRow row;
    row.b = getd(in);
    for (size_t e = 0; e < nnz; ++e) {
      int k;
      in >> k;
      row.a.push_back({k, getd(in)});
    }
    p.linear_ineqs.push_back(std::move(row));
  }
  in >> tok;
  if (tok != "end") throw std::runtime_error("sdp::load: missing trailer");
  return p;
}

}  // namespace esactrl::sdp
