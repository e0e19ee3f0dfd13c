#include "esactrl/model.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace esactrl {

void EsaParams::validate() const {
  if (!(m > 0.0)) throw std::invalid_argument("EsaParams: mass must be positive");
  if (k1 < 0.0 || k2 < 0.0) throw std::invalid_argument("EsaParams: stiffness must be nonnegative");
  if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("EsaParams: damping must be nonnegative");
  if (k1 == 0.0 && k2 == 0.0) throw std::invalid_argument("EsaParams: k1 and k2 cannot both be zero");
}

void NetworkTopology::validate() const {
  if (columns < 1 || actuators_per_column < 1)
    throw std::invalid_argument("NetworkTopology: counts must be positive");
}

double force_from_voltage(const ForceVoltageMap& map, double volts) {
  return map.slope * volts + map.offset;
}

double voltage_from_force(const ForceVoltageMap& map, double newtons) {
  if (map.slope == 0.0) throw std::invalid_argument("ForceVoltageMap: zero slope is not invertible");
  return (newtons - map.offset) / map.slope;
}

namespace {

// Tridiagonal coupling matrix of one chain of 2n masses: spring pattern
// k2, k1, k2, k1, ..., k2 including both anchored ends. Same layout serves
// stiffness and damping.
Eigen::MatrixXd chain_coupling(int n_masses, double intra, double inter) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n_masses, n_masses);
  auto link = [&](int j) {  // spring between mass j and j+1 (1-based masses)
    return (j % 2 == 1) ? intra : inter;
  };
  for (int i = 1; i <= n_masses; ++i) {
    double left = (i == 1) ? inter : link(i - 1);
    double right = (i == n_masses) ? inter : link(i);
    K(i - 1, i - 1) = left + right;
    if (i < n_masses) {
      K(i - 1, i) = -link(i);
      K(i, i - 1) = -link(i);
    }
  }
  return K;
}

StateSpace assemble(const EsaParams& p, int n_act_total, int columns, double c_weight,
                    double d_weight) {
  const int per_col = n_act_total / columns;
  const int n_masses = 2 * n_act_total;
  const int nx = 2 * n_masses;

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n_masses, n_masses);
  Eigen::MatrixXd Cd = Eigen::MatrixXd::Zero(n_masses, n_masses);
  for (int c = 0; c < columns; ++c) {
    const int off = 2 * per_col * c;
    K.block(off, off, 2 * per_col, 2 * per_col) = chain_coupling(2 * per_col, p.k1, p.k2);
    Cd.block(off, off, 2 * per_col, 2 * per_col) = chain_coupling(2 * per_col, p.c1, p.c2);
  }

  StateSpace ss;
  ss.A = Eigen::MatrixXd::Zero(nx, nx);
  ss.A.topRightCorner(n_masses, n_masses).setIdentity();
  ss.A.bottomLeftCorner(n_masses, n_masses) = -K / p.m;
  ss.A.bottomRightCorner(n_masses, n_masses) = -Cd / p.m;

  ss.Bu = Eigen::MatrixXd::Zero(nx, n_act_total);
  for (int i = 0; i < n_act_total; ++i) {
    ss.Bu(n_masses + 2 * i, i) = 1.0 / p.m;
    ss.Bu(n_masses + 2 * i + 1, i) = 1.0 / p.m;
  }
  ss.Bd = ss.Bu;

  ss.C = Eigen::MatrixXd::Zero(n_masses, nx);
  ss.C.leftCols(n_masses) = c_weight * Eigen::MatrixXd::Identity(n_masses, n_masses);
  ss.D = Eigen::MatrixXd::Zero(n_masses, n_act_total);
  ss.D.topRows(n_act_total) = d_weight * Eigen::MatrixXd::Identity(n_act_total, n_act_total);
  return ss;
}

}  // namespace

StateSpace build_chain(const EsaParams& params, int n_actuators) {
  params.validate();
  if (n_actuators < 1) throw std::invalid_argument("build_chain: n_actuators must be positive");
  return assemble(params, n_actuators, 1, 0.1, 0.01);
}

StateSpace build_network(const EsaParams& params, const NetworkTopology& topo, double c_weight,
                         double d_weight) {
  params.validate();
  topo.validate();
  return assemble(params, topo.total_actuators(), topo.columns, c_weight, d_weight);
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig cfg;
  std::map<std::string, double*> scalar_keys = {
      {"m", &cfg.params.m},          {"k1", &cfg.params.k1},
      {"c1", &cfg.params.c1},        {"k2", &cfg.params.k2},
      {"c2", &cfg.params.c2},        {"c_weight", &cfg.c_weight},
      {"d_weight", &cfg.d_weight},   {"fv_slope", &cfg.fv.slope},
      {"fv_offset", &cfg.fv.offset},
  };
  std::map<std::string, int*> int_keys = {
      {"columns", &cfg.topo.columns},
      {"actuators_per_column", &cfg.topo.actuators_per_column},
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::invalid_argument("model config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    try {
      if (auto it = scalar_keys.find(key); it != scalar_keys.end()) {
        *it->second = std::stod(val);
      } else if (auto jt = int_keys.find(key); jt != int_keys.end()) {
        *jt->second = std::stoi(val);
      } else {
        throw std::invalid_argument("model config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("model config line " + std::to_string(lineno) +
                                  ": bad value '" + val + "'");
    }
  }
  cfg.params.validate();
  cfg.topo.validate();
  return cfg;
}

ModelConfig load_model_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open model config: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model_config(buf.str());
}

}  // namespace esactrl
