#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "esactrl/sdp.hpp"

using namespace esactrl::sdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// min z s.t. [[-z, 1], [1, -1]] <= 0; Schur gives z >= 1.
SdpProblem schur_example() {
  SdpProblem p;
  p.resize(1);
  p.objective << 1.0;
  int b = p.add_block(2);
  p.add_const(b, 0, 1, 1.0);
  p.add_const(b, 1, 1, -1.0);
  p.add_term(b, 0, 0, 0, -1.0);
  return p;
}

// Max eigenvalue of a small symmetric matrix, closed-form-free oracle helper.
double max_eig(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("2x2 Schur example solves to z = 1") {
  SdpProblem p = schur_example();
  SdpSolution sol = solve(p);
  REQUIRE(sol.status == SdpStatus::optimal);
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sol.max_residual <= 1e-7);
}

TEST_CASE("constant positive block is infeasible") {
  SdpProblem p;
  p.resize(1);
  int b = p.add_block(1);
  p.add_const(b, 0, 0, 1.0);
  SdpSolution sol = solve(p);
  CHECK(sol.status == SdpStatus::infeasible);
}

TEST_CASE("checker evaluates residuals independently") {
  SdpProblem p = schur_example();
  VectorXd z = VectorXd::Zero(1);
  SdpCheck chk = check(p, z);
  REQUIRE(chk.block_residuals.size() == 1);
  CHECK(chk.block_residuals[0] == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0));

  SdpSolution sol = solve(p);
  SdpCheck at_opt = check(p, sol.z);
  CHECK(at_opt.max_residual() <= 1e-7);
  CHECK(std::abs(at_opt.max_residual() - sol.max_residual) <= 1e-10);

  SdpProblem empty;
  empty.resize(2);
  SdpCheck vac = check(empty, VectorXd::Zero(2));
  CHECK(vac.block_residuals.empty());
  CHECK(vac.worst_linear == 0.0);
}

TEST_CASE("linear rows only") {
  SdpProblem p;
  p.resize(1);
  p.objective << 1.0;
  p.add_linear({{0, -1.0}}, -1.0);  // z >= 1
  p.set_bounds(0, -10.0, 10.0);
  SdpSolution sol = solve(p);
  REQUIRE(sol.status == SdpStatus::optimal);
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("random 2-variable problems match grid search") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 10; ++trial) {
    SdpProblem p;
    p.resize(2);
    p.objective << unif(rng), unif(rng);
    int b = p.add_block(3);
    MatrixXd F0 = -MatrixXd::Identity(3, 3);
    MatrixXd F1(3, 3), F2(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double r = 0.3 * unif(rng);
        F0(i, j) += r;
        F0(j, i) = F0(i, j);
        F1(i, j) = F1(j, i) = unif(rng);
        F2(i, j) = F2(j, i) = unif(rng);
      }
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        p.add_const(b, i, j, F0(i, j));
        p.add_term(b, 0, i, j, F1(i, j));
        p.add_term(b, 1, i, j, F2(i, j));
      }
    p.set_bounds(0, -1.0, 1.0);
    p.set_bounds(1, -1.0, 1.0);

    SdpSolution sol = solve(p);
    REQUIRE(sol.status == SdpStatus::optimal);
    ++solved;

    double best = std::numeric_limits<double>::infinity();
    const double h = 1e-3;
    for (double z1 = -1.0; z1 <= 1.0 + 1e-12; z1 += h) {
      for (double z2 = -1.0; z2 <= 1.0 + 1e-12; z2 += h) {
        double val = p.objective[0] * z1 + p.objective[1] * z2;
        if (val >= best) continue;
        if (max_eig(F0 + z1 * F1 + z2 * F2) <= 0.0) best = val;
      }
    }
    CHECK(std::abs(sol.objective_value - best) <= 5e-3);
  }
  CHECK(solved == 10);
}

TEST_CASE("determinism and scale robustness") {
  SdpProblem p = schur_example();
  SdpSolution a = solve(p);
  SdpSolution b = solve(p);
  CHECK(a.status == b.status);
  CHECK(a.objective_value == b.objective_value);
  CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);

  SdpProblem p10 = schur_example();
  p10.objective *= 10.0;
  SdpSolution c = solve(p10);
  REQUIRE(c.status == SdpStatus::optimal);
  CHECK(std::abs(c.z[0] - a.z[0]) <= 1e-5);
}

TEST_CASE("merit decreases across accepted iterations") {
  SdpProblem p = schur_example();
  SdpSolution sol = solve(p);
  for (size_t i = 1; i < sol.trace.size(); ++i)
    CHECK(sol.trace[i].merit <= sol.trace[i - 1].merit * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("iteration limit carries the best iterate") {
  SdpProblem p = schur_example();
  SdpConfig cfg;
  cfg.max_iter = 2;
  SdpSolution sol = solve(p, cfg);
  CHECK(sol.status == SdpStatus::iteration_limit);
  CHECK(sol.z.size() == 1);
  CHECK(std::isfinite(sol.z[0]));
}

TEST_CASE("dump/load round-trips bit-exactly") {
  SdpProblem p = schur_example();
  p.shift = 1e-4;
  p.add_linear({{0, 0.25}}, 17.0 / 3.0);
  p.set_bounds(0, -1e-9, 123.456789);
  std::ostringstream first;
  dump(p, first);
  std::istringstream in(first.str());
  SdpProblem q = load(in);
  std::ostringstream second;
  dump(q, second);
  CHECK(first.str() == second.str());

  SdpSolution sp = solve(p);
  SdpSolution sq = solve(q);
  CHECK(sp.objective_value == sq.objective_value);
}
