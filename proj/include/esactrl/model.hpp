#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

namespace esactrl {

/// Physical constants of one electromagnetic soft actuator (ESA) cell.
/// An actuator is two coil masses joined by a spring linkage (k1, c1);
/// neighboring actuators (and the fixed frame at both chain ends) couple
/// through a second linkage (k2, c2).
struct EsaParams {
  double m = 2.94e-3;    // coil mass [kg]
  double k1 = 0.343;     // intra-actuator stiffness [N/m]
  double c1 = 1.75e-16;  // intra-actuator damping [N s/m]
  double k2 = 0.343;     // inter-actuator stiffness [N/m]
  double c2 = 1.75e-16;  // inter-actuator damping [N s/m]

  void validate() const;
};

/// Grid layout: mechanically independent serial chains ("columns"), each
/// holding the same number of actuators.
struct NetworkTopology {
  int columns = 2;
  int actuators_per_column = 4;

  int total_actuators() const { return columns * actuators_per_column; }
  int total_masses() const { return 2 * total_actuators(); }
  int state_dim() const { return 4 * total_actuators(); }

  void validate() const;
};

/// Linear dynamics  x' = A x + Bu u + Bd d,  p = C x + D u.
/// States are ordered [positions; velocities]; Bd = Bu (matched disturbance).
struct StateSpace {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Bu;
  Eigen::MatrixXd Bd;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(Bu.cols()); }
  int nd() const { return static_cast<int>(Bd.cols()); }
  int np() const { return static_cast<int>(C.rows()); }
};

/// Affine force-voltage characteristic F = slope * V + offset.
struct ForceVoltageMap {
  double slope = 0.0146;    // [N/V]
  double offset = -0.0088;  // [N]
};

double force_from_voltage(const ForceVoltageMap& map, double volts);
double voltage_from_force(const ForceVoltageMap& map, double newtons);

/// One serial chain of n actuators (2n masses, 4n states). Both chain ends
/// anchor to the fixed frame through (k2, c2). Input i pushes masses 2i-1
/// and 2i with +1/m each.
StateSpace build_chain(const EsaParams& params, int n_actuators);

/// Block-diagonal composition of per-column chains with global
/// [positions; velocities] ordering; C = [c_weight*I_{2N}  O] selects the
/// positions, D = [d_weight*I_N ; O].
StateSpace build_network(const EsaParams& params, const NetworkTopology& topo,
                         double c_weight = 0.1, double d_weight = 0.01);

/// Flat key-value model description, one `key = value` per line.
/// Keys: m, k1, c1, k2, c2, columns, actuators_per_column, c_weight,
/// d_weight, fv_slope, fv_offset. Unknown keys are rejected.
struct ModelConfig {
  EsaParams params;
  NetworkTopology topo;
  double c_weight = 0.1;
  double d_weight = 0.01;
  ForceVoltageMap fv;
};

ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::filesystem::path& file);

}  // namespace esactrl
