#include "esactrl/sim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace esactrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd DisturbanceSpec::at(double t, int n_d) const {
  switch (kind) {
    case Kind::zero:
      return VectorXd::Zero(n_d);
    case Kind::cosine:
      return VectorXd::Constant(n_d, std::cos(frequency * t));
    case Kind::custom:
      if (amplitudes.size() != n_d)
        throw std::invalid_argument("disturbance: amplitude list length mismatch");
      return amplitudes * std::cos(frequency * t);
  }
  return VectorXd::Zero(n_d);
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("sim: dt must be positive");
  if (!(t_end >= dt)) throw std::invalid_argument("sim: t_end must be at least dt");
}

SimTrace simulate(const StateSpace& ss, const MatrixXd& K, const VectorXd& gamma,
                  const SimConfig& cfg) {
  cfg.validate();
  const int nx = ss.nx(), nu = ss.nu(), nd = ss.nd(), np = ss.np();
  if (K.rows() != nu || K.cols() != nx)
    throw std::invalid_argument("simulate: K must be n_u x n_x");
  if (gamma.size() != nu) throw std::invalid_argument("simulate: gamma size mismatch");
  if (cfg.x_init.size() > 0 && cfg.x_init.size() != nx)
    throw std::invalid_argument("simulate: x_init size mismatch");

  const MatrixXd GK = gamma.asDiagonal() * K;  // applied feedback
  const MatrixXd Acl = ss.A + ss.Bu * GK;
  const MatrixXd Cp = ss.C + ss.D * GK;  // p = (C + D Gamma K) x

  const int n_steps = static_cast<int>(std::llround(cfg.t_end / cfg.dt));
  const int n_samples = n_steps + 1;

  SimTrace out;
  out.times.resize(n_samples);
  out.x.resize(n_samples, nx);
  out.u.resize(n_samples, nu);
  out.p.resize(n_samples, np);
  out.d.resize(n_samples, nd);

  VectorXd x = cfg.x_init.size() > 0 ? cfg.x_init : VectorXd::Zero(nx);
  const double h = cfg.dt;
  int recorded = 0;
  for (int i = 0; i < n_samples; ++i) {
    const double t = i * h;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12) {
      out.diverged = true;
      break;
    }
    out.times[i] = t;
    out.x.row(i) = x;
    out.u.row(i) = GK * x;
    out.p.row(i) = Cp * x;
    out.d.row(i) = cfg.disturbance.at(t, nd);
    ++recorded;
    if (i == n_steps) break;

    auto f = [&](double tau, const VectorXd& xs) -> VectorXd {
      return Acl * xs + ss.Bd * cfg.disturbance.at(tau, nd);
    };
    const VectorXd k1 = f(t, x);
    const VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const VectorXd k4 = f(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  out.times.conservativeResize(recorded);
  out.x.conservativeResize(recorded, nx);
  out.u.conservativeResize(recorded, nu);
  out.p.conservativeResize(recorded, np);
  out.d.conservativeResize(recorded, nd);
  out.norm_x = out.x.rowwise().norm();
  out.norm_u = out.u.rowwise().norm();
  out.norm_p = out.p.rowwise().norm();
  out.norm_d = out.d.rowwise().norm();
  return out;
}

LinfReport verify_linf(const SimTrace& trace, double mu, double rho) {
  LinfReport rep;
  rep.bound = mu * rho;
  rep.max_norm_p = trace.norm_p.size() > 0 ? trace.norm_p.maxCoeff() : 0.0;
  rep.max_norm_u = trace.norm_u.size() > 0 ? trace.norm_u.maxCoeff() : 0.0;
  rep.margin = rep.bound - rep.max_norm_p;
  return rep;
}

double spectral_abscissa(const StateSpace& ss, const MatrixXd& K, const VectorXd& gamma) {
  if (K.rows() != ss.nu() || K.cols() != ss.nx() || gamma.size() != ss.nu())
    throw std::invalid_argument("spectral_abscissa: dimension mismatch");
  Eigen::EigenSolver<MatrixXd> es(ss.A + ss.Bu * gamma.asDiagonal() * K, false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_abscissa: eigensolve failed");
  return es.eigenvalues().real().maxCoeff();
}

std::string trace_csv(const SimTrace& trace, bool full_state) {
  std::ostringstream os;
  os.precision(12);
  os << "t,norm_x,norm_p,norm_u,norm_d,x1";
  const int nx = static_cast<int>(trace.x.cols());
  if (full_state)
    for (int j = 0; j < nx; ++j) os << ",x" << j + 1;
  os << '\n';
  for (int i = 0; i < trace.samples(); ++i) {
    os << trace.times[i] << ',' << trace.norm_x[i] << ',' << trace.norm_p[i] << ','
       << trace.norm_u[i] << ',' << trace.norm_d[i] << ',' << (nx > 0 ? trace.x(i, 0) : 0.0);
    if (full_state)
      for (int j = 0; j < nx; ++j) os << ',' << trace.x(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace esactrl
