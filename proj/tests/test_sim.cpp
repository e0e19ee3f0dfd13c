#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "esactrl/lmi.hpp"
#include "esactrl/model.hpp"
#include "esactrl/sim.hpp"

using namespace esactrl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

StateSpace scalar_system(double a, double bu) {
  StateSpace ss;
  ss.A = MatrixXd::Constant(1, 1, a);
  ss.Bu = MatrixXd::Constant(1, 1, bu);
  ss.Bd = MatrixXd::Constant(1, 1, 1.0);
  ss.C = MatrixXd::Constant(1, 1, 1.0);
  ss.D = MatrixXd::Zero(1, 1);
  return ss;
}

/// Mechanical energy of a chain trace sample: the stiffness matrix is read
/// off the velocity rows of A (A = [[0, I], [-Ks/m, -Cs/m]]).
double chain_energy(const StateSpace& ss, double mass, const Eigen::RowVectorXd& x) {
  const int n = ss.nx() / 2;
  MatrixXd Ks = -mass * ss.A.block(n, 0, n, n);
  VectorXd pos = x.head(n).transpose(), vel = x.tail(n).transpose();
  return 0.5 * mass * vel.squaredNorm() + 0.5 * pos.dot(Ks * pos);
}

}  // namespace

TEST_CASE("zero disturbance from the origin stays identically zero") {
  StateSpace ss = build_chain(EsaParams{}, 2);
  SimConfig cfg;
  cfg.t_end = 5.0;
  cfg.disturbance.kind = DisturbanceSpec::Kind::zero;
  MatrixXd K = MatrixXd::Random(ss.nu(), ss.nx());
  SimTrace tr = simulate(ss, K, VectorXd::Ones(ss.nu()), cfg);
  CHECK(!tr.diverged);
  CHECK(tr.samples() == 5001);
  CHECK(tr.norm_x.maxCoeff() == 0.0);
  CHECK(tr.norm_p.maxCoeff() == 0.0);
  LinfReport rep = verify_linf(tr, 0.5, 2.0);
  CHECK(rep.margin == 1.0);  // exactly mu * rho
  CHECK(rep.max_norm_u == 0.0);
}

TEST_CASE("first-order response matches the closed-form amplitude") {
  // x' = -x + cos(0.1 t): steady-state amplitude 1/sqrt(1 + 0.01).
  StateSpace ss = scalar_system(-1.0, 0.0);
  SimConfig cfg;  // default cosine at 0.1 rad/s
  SimTrace tr = simulate(ss, MatrixXd::Zero(1, 1), VectorXd::Ones(1), cfg);
  REQUIRE(!tr.diverged);
  double peak = 0.0;
  for (int i = 0; i < tr.samples(); ++i)
    if (tr.times[i] >= 20.0) peak = std::max(peak, std::abs(tr.x(i, 0)));
  CHECK(peak == doctest::Approx(1.0 / std::sqrt(1.01)).epsilon(1e-4));
}

TEST_CASE("undamped unforced chain conserves mechanical energy") {
  EsaParams params;
  params.c1 = params.c2 = 0.0;
  StateSpace ss = build_chain(params, 2);
  SimConfig cfg;
  cfg.disturbance.kind = DisturbanceSpec::Kind::zero;
  cfg.x_init = VectorXd::Zero(ss.nx());
  cfg.x_init.head(4) << 1e-3, -5e-4, 2e-4, 8e-4;
  SimTrace tr = simulate(ss, MatrixXd::Zero(ss.nu(), ss.nx()), VectorXd::Zero(ss.nu()), cfg);
  REQUIRE(!tr.diverged);
  const double e0 = chain_energy(ss, params.m, tr.x.row(0));
  REQUIRE(e0 > 0.0);
  double worst = 0.0;
  for (int i = 0; i < tr.samples(); ++i)
    worst = std::max(worst, std::abs(chain_energy(ss, params.m, tr.x.row(i)) - e0));
  CHECK(worst / e0 <= 1e-6);
}

TEST_CASE("energy input equals energy stored in the undamped forced chain") {
  EsaParams params;
  params.c1 = params.c2 = 0.0;
  StateSpace ss = build_chain(params, 2);
  SimConfig cfg;  // cosine disturbance, open loop
  SimTrace tr = simulate(ss, MatrixXd::Zero(ss.nu(), ss.nx()), VectorXd::Zero(ss.nu()), cfg);
  REQUIRE(!tr.diverged);
  const int n = ss.nx() / 2;
  // Work done by the disturbance forces on the masses, trapezoidal rule.
  double work = 0.0, prev_power = 0.0;
  double stored_scale = 0.0;
  for (int i = 0; i < tr.samples(); ++i) {
    VectorXd force = params.m * (ss.Bd * tr.d.row(i).transpose()).tail(n);
    double power = tr.x.row(i).tail(n).dot(force);
    if (i > 0) work += 0.5 * (power + prev_power) * cfg.dt;
    prev_power = power;
    stored_scale = std::max(stored_scale, chain_energy(ss, params.m, tr.x.row(i)));
  }
  const double e0 = chain_energy(ss, params.m, tr.x.row(0));
  const double efinal = chain_energy(ss, params.m, tr.x.row(tr.samples() - 1));
  CHECK(std::abs(efinal - e0 - work) <= 1e-4 * stored_scale);
}

TEST_CASE("halving the step leaves the trajectory unchanged to 1e-6") {
  StateSpace ss = build_network(EsaParams{}, NetworkTopology{2, 4});
  MatrixXd K = MatrixXd::Zero(ss.nu(), ss.nx());
  VectorXd g = VectorXd::Zero(ss.nu());
  SimConfig coarse, fine;
  fine.dt = 5e-4;
  const double a = simulate(ss, K, g, coarse).norm_x.maxCoeff();
  const double b = simulate(ss, K, g, fine).norm_x.maxCoeff();
  CHECK(std::abs(a - b) / b <= 1e-6);
}

TEST_CASE("the 8-channel cosine reaches the expected supremum norm") {
  StateSpace ss = build_network(EsaParams{}, NetworkTopology{2, 4});
  SimConfig cfg;
  cfg.t_end = 1.0;
  SimTrace tr = simulate(ss, MatrixXd::Zero(ss.nu(), ss.nx()), VectorXd::Zero(ss.nu()), cfg);
  CHECK(tr.norm_d.maxCoeff() == doctest::Approx(2.8284).epsilon(1e-4));
}

TEST_CASE("a destabilizing gain is caught by the divergence flag and margin") {
  StateSpace ss = scalar_system(-1.0, 1.0);
  MatrixXd K = MatrixXd::Constant(1, 1, 2.0);  // closed loop at +1
  SimTrace tr = simulate(ss, K, VectorXd::Ones(1), SimConfig{});
  CHECK(tr.diverged);
  CHECK(tr.samples() < 60001);
  CHECK(verify_linf(tr, 1.0, 1.0).margin < 0.0);
}

TEST_CASE("spectral abscissa reference values") {
  StateSpace chain = build_chain(EsaParams{}, 2);
  MatrixXd K0 = MatrixXd::Zero(chain.nu(), chain.nx());
  CHECK(spectral_abscissa(chain, K0, VectorXd::Ones(chain.nu())) ==
        doctest::Approx(0.0).epsilon(1e-6));
  StateSpace scalar = scalar_system(-1.0, 1.0);
  CHECK(spectral_abscissa(scalar, MatrixXd::Zero(1, 1), VectorXd::Ones(1)) ==
        doctest::Approx(-1.0));
  CHECK_THROWS_AS(spectral_abscissa(chain, MatrixXd::Zero(1, 1), VectorXd::Ones(1)),
                  std::invalid_argument);
}

TEST_CASE("a certified gain honors its closed-loop guarantees") {
  EsaParams params;
  params.c1 = params.c2 = 0.05;
  SynthesisProblem p;
  p.ss = build_network(params, NetworkTopology{1, 2});
  p.u_max = 250.0;
  const double alpha = 0.1;
  ControllerSolution sol = certify_fixed(p, alpha, 1.0, 10.0, VectorXd::Ones(2));
  REQUIRE(sol.certified());

  CHECK(spectral_abscissa(p.ss, sol.K, sol.gamma) <= -alpha / 2.0 + 1e-6);

  SimTrace tr = simulate(p.ss, sol.K, sol.gamma, SimConfig{});
  REQUIRE(!tr.diverged);
  LinfReport rep = verify_linf(tr, sol.mu, p.rho_eff());
  CHECK(rep.margin >= 0.0);
  CHECK(rep.max_norm_u <= p.u_max);
}

TEST_CASE("trace CSV layout") {
  StateSpace ss = scalar_system(-1.0, 0.0);
  SimConfig cfg;
  cfg.t_end = 0.01;
  SimTrace tr = simulate(ss, MatrixXd::Zero(1, 1), VectorXd::Ones(1), cfg);
  std::istringstream in(trace_csv(tr));
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,norm_x,norm_p,norm_u,norm_d,x1");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == tr.samples());

  std::istringstream full(trace_csv(tr, true));
  std::getline(full, header);
  CHECK(header == "t,norm_x,norm_p,norm_u,norm_d,x1,x1");
}
