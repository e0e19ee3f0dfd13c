#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "esactrl/lmi.hpp"
#include "esactrl/misdp.hpp"
#include "esactrl/model.hpp"
#include "esactrl/scenario.hpp"
#include "esactrl/sca.hpp"
#include "esactrl/selection.hpp"
#include "esactrl/sim.hpp"

namespace py = pybind11;
using namespace esactrl;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Controller synthesis and simulation for electromagnetic soft actuator networks";

  // --- model ---
  py::class_<EsaParams>(m, "EsaParams")
      .def(py::init<>())
      .def_readwrite("m", &EsaParams::m)
      .def_readwrite("k1", &EsaParams::k1)
      .def_readwrite("c1", &EsaParams::c1)
      .def_readwrite("k2", &EsaParams::k2)
      .def_readwrite("c2", &EsaParams::c2);
  py::class_<NetworkTopology>(m, "NetworkTopology")
      .def(py::init<>())
      .def(py::init([](int columns, int per_column) {
             return NetworkTopology{columns, per_column};
           }),
           py::arg("columns"), py::arg("actuators_per_column"))
      .def_readwrite("columns", &NetworkTopology::columns)
      .def_readwrite("actuators_per_column", &NetworkTopology::actuators_per_column)
      .def("total_actuators", &NetworkTopology::total_actuators)
      .def("state_dim", &NetworkTopology::state_dim);
  py::class_<StateSpace>(m, "StateSpace")
      .def(py::init<>())
      .def_readwrite("A", &StateSpace::A)
      .def_readwrite("Bu", &StateSpace::Bu)
      .def_readwrite("Bd", &StateSpace::Bd)
      .def_readwrite("C", &StateSpace::C)
      .def_readwrite("D", &StateSpace::D)
      .def("nx", &StateSpace::nx)
      .def("nu", &StateSpace::nu)
      .def("nd", &StateSpace::nd)
      .def("np", &StateSpace::np);
  m.def("build_chain", &build_chain, py::arg("params"), py::arg("n_actuators"));
  m.def("build_network", &build_network, py::arg("params"), py::arg("topology"),
        py::arg("c_weight") = 0.1, py::arg("d_weight") = 0.01);

  // --- certification ---
  py::class_<LogisticConstraints>(m, "LogisticConstraints")
      .def(py::init<>())
      .def_readwrite("forced_on", &LogisticConstraints::forced_on)
      .def_readwrite("forced_off", &LogisticConstraints::forced_off)
      .def_readwrite("max_active", &LogisticConstraints::max_active)
      .def("admits", &LogisticConstraints::admits);
  py::class_<SynthesisProblem>(m, "SynthesisProblem")
      .def(py::init<>())
      .def_readwrite("ss", &SynthesisProblem::ss)
      .def_readwrite("rho", &SynthesisProblem::rho)
      .def_readwrite("u_max", &SynthesisProblem::u_max)
      .def_readwrite("alpha_gamma", &SynthesisProblem::alpha_gamma)
      .def_readwrite("x0", &SynthesisProblem::x0)
      .def_readwrite("logistics", &SynthesisProblem::logistics)
      .def("rho_eff", &SynthesisProblem::rho_eff);
  py::class_<ControllerSolution>(m, "ControllerSolution")
      .def_readonly("K", &ControllerSolution::K)
      .def_readonly("P", &ControllerSolution::P)
      .def_readonly("Y", &ControllerSolution::Y)
      .def_readonly("gamma", &ControllerSolution::gamma)
      .def_readonly("mu", &ControllerSolution::mu)
      .def_readonly("mu0", &ControllerSolution::mu0)
      .def_readonly("mu1", &ControllerSolution::mu1)
      .def_readonly("mu2", &ControllerSolution::mu2)
      .def_readonly("alpha", &ControllerSolution::alpha)
      .def_readonly("objective", &ControllerSolution::objective)
      .def_readonly("detail", &ControllerSolution::detail)
      .def("certified", &ControllerSolution::certified)
      .def("active_count", &ControllerSolution::active_count);
  m.def("certify_fixed", &certify_fixed, py::arg("problem"), py::arg("alpha"),
        py::arg("mu0"), py::arg("mu1"), py::arg("gamma_binary"), py::arg("period") = 0);

  // --- relaxation ---
  py::class_<ScaConfig>(m, "ScaConfig")
      .def(py::init<>())
      .def_readwrite("max_iter", &ScaConfig::max_iter)
      .def_readwrite("tol", &ScaConfig::tol)
      .def_readwrite("init_mu0", &ScaConfig::init_mu0)
      .def_readwrite("init_mu1", &ScaConfig::init_mu1)
      .def_readwrite("alpha_grid", &ScaConfig::alpha_grid)
      .def_readwrite("gamma0", &ScaConfig::gamma0)
      .def_readwrite("pin_gamma", &ScaConfig::pin_gamma)
      .def_readwrite("parallel", &ScaConfig::parallel);
  py::class_<SynthVariables>(m, "SynthVariables")
      .def_readonly("P", &SynthVariables::P)
      .def_readonly("Y", &SynthVariables::Y)
      .def_readonly("gamma", &SynthVariables::gamma)
      .def_readonly("mu0", &SynthVariables::mu0)
      .def_readonly("mu1", &SynthVariables::mu1)
      .def_readonly("mu2", &SynthVariables::mu2)
      .def_readonly("alpha", &SynthVariables::alpha);
  py::class_<ScaIterate>(m, "ScaIterate")
      .def_readonly("vars", &ScaIterate::vars)
      .def_readonly("objective", &ScaIterate::objective)
      .def_readonly("iteration", &ScaIterate::iteration)
      .def_readonly("converged", &ScaIterate::converged);
  py::class_<ScaResult>(m, "ScaResult")
      .def_readonly("final", &ScaResult::final)
      .def_readonly("lower", &ScaResult::lower)
      .def_readonly("alpha", &ScaResult::alpha)
      .def_readonly("feasible", &ScaResult::feasible)
      .def_readonly("log_csv", &ScaResult::log_csv)
      .def_readonly("diagnostics", &ScaResult::diagnostics);
  m.def("sca_run", &sca_run, py::arg("problem"), py::arg("config") = ScaConfig{},
        py::arg("period") = 0, py::call_guard<py::gil_scoped_release>());

  // --- selection recovery ---
  py::class_<BoundReport>(m, "BoundReport")
      .def(py::init<>())
      .def_readwrite("lower", &BoundReport::lower)
      .def_readwrite("upper", &BoundReport::upper)
      .def_readwrite("gamma_real", &BoundReport::gamma_real)
      .def_readwrite("gamma_binary", &BoundReport::gamma_binary)
      .def_readwrite("method", &BoundReport::method)
      .def_readwrite("solution", &BoundReport::solution);
  m.def("slice_threshold", &slice_threshold, py::arg("gamma_real"),
        py::arg("logistics") = LogisticConstraints{});
  m.def("slice_ranked", &slice_ranked, py::arg("gamma_real"), py::arg("problem"),
        py::arg("alpha"), py::arg("mu0"), py::arg("mu1"), py::arg("period") = 0);
  m.def("selection_report", &selection_report);

  // --- exact selection ---
  py::class_<BigMConfig>(m, "BigMConfig")
      .def(py::init<>())
      .def_readwrite("big_m", &BigMConfig::big_m)
      .def_readwrite("alpha", &BigMConfig::alpha)
      .def_readwrite("mu0", &BigMConfig::mu0)
      .def_readwrite("mu1", &BigMConfig::mu1);
  py::class_<BnbResult>(m, "BnbResult")
      .def_readonly("gamma", &BnbResult::gamma)
      .def_readonly("solution", &BnbResult::solution)
      .def_readonly("node_count", &BnbResult::node_count)
      .def_readonly("feasible", &BnbResult::feasible)
      .def_readonly("m_too_small", &BnbResult::m_too_small)
      .def_readonly("detail", &BnbResult::detail)
      .def_readonly("trace_csv", &BnbResult::trace_csv);
  py::class_<EnumerationResult>(m, "EnumerationResult")
      .def_readonly("gamma", &EnumerationResult::gamma)
      .def_readonly("objective", &EnumerationResult::objective)
      .def_readonly("feasible", &EnumerationResult::feasible)
      .def_readonly("evaluated", &EnumerationResult::evaluated);
  m.def("bigm_rows", &bigm_rows, py::arg("Xi"), py::arg("Y"), py::arg("gamma"),
        py::arg("big_m"));
  m.def("branch_and_bound", &branch_and_bound, py::arg("problem"),
        py::arg("config") = BigMConfig{}, py::arg("period") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("enumerate_oracle", &enumerate_oracle, py::arg("problem"),
        py::arg("config") = BigMConfig{}, py::arg("period") = 0,
        py::call_guard<py::gil_scoped_release>());

  // --- simulation ---
  py::class_<DisturbanceSpec> dist(m, "DisturbanceSpec");
  py::enum_<DisturbanceSpec::Kind>(dist, "Kind")
      .value("cosine", DisturbanceSpec::Kind::cosine)
      .value("zero", DisturbanceSpec::Kind::zero)
      .value("custom", DisturbanceSpec::Kind::custom);
  dist.def(py::init<>())
      .def_readwrite("kind", &DisturbanceSpec::kind)
      .def_readwrite("frequency", &DisturbanceSpec::frequency)
      .def_readwrite("amplitudes", &DisturbanceSpec::amplitudes);
  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("t_end", &SimConfig::t_end)
      .def_readwrite("dt", &SimConfig::dt)
      .def_readwrite("disturbance", &SimConfig::disturbance)
      .def_readwrite("x_init", &SimConfig::x_init);
  py::class_<SimTrace>(m, "SimTrace")
      .def_readonly("times", &SimTrace::times)
      .def_readonly("x", &SimTrace::x)
      .def_readonly("u", &SimTrace::u)
      .def_readonly("p", &SimTrace::p)
      .def_readonly("d", &SimTrace::d)
      .def_readonly("norm_x", &SimTrace::norm_x)
      .def_readonly("norm_u", &SimTrace::norm_u)
      .def_readonly("norm_p", &SimTrace::norm_p)
      .def_readonly("norm_d", &SimTrace::norm_d)
      .def_readonly("diverged", &SimTrace::diverged)
      .def("samples", &SimTrace::samples);
  py::class_<LinfReport>(m, "LinfReport")
      .def_readonly("margin", &LinfReport::margin)
      .def_readonly("bound", &LinfReport::bound)
      .def_readonly("max_norm_p", &LinfReport::max_norm_p)
      .def_readonly("max_norm_u", &LinfReport::max_norm_u);
  m.def("simulate", &simulate, py::arg("ss"), py::arg("K"), py::arg("gamma"),
        py::arg("config") = SimConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("verify_linf", &verify_linf, py::arg("trace"), py::arg("mu"), py::arg("rho"));
  m.def("spectral_abscissa", &spectral_abscissa, py::arg("ss"), py::arg("K"),
        py::arg("gamma"));
  m.def("trace_csv", &trace_csv, py::arg("trace"), py::arg("full_state") = false);

  // --- scenarios ---
  py::class_<ScenarioSpec>(m, "ScenarioSpec")
      .def(py::init<>())
      .def_readwrite("kind", &ScenarioSpec::kind)
      .def_readwrite("model_file", &ScenarioSpec::model_file)
      .def_readwrite("problem_file", &ScenarioSpec::problem_file)
      .def_readwrite("method_file", &ScenarioSpec::method_file)
      .def_readwrite("out_dir", &ScenarioSpec::out_dir)
      .def_readwrite("parallel", &ScenarioSpec::parallel);
  py::class_<RunReport>(m, "RunReport")
      .def_readonly("scenario", &RunReport::scenario)
      .def_readonly("alpha", &RunReport::alpha)
      .def_readonly("mu", &RunReport::mu)
      .def_readonly("active_count", &RunReport::active_count)
      .def_readonly("gamma", &RunReport::gamma)
      .def_readonly("wall_time_seconds", &RunReport::wall_time_seconds)
      .def_readonly("lower", &RunReport::lower)
      .def_readonly("upper", &RunReport::upper)
      .def_readonly("margin", &RunReport::margin)
      .def_readonly("max_norm_u", &RunReport::max_norm_u)
      .def_readonly("m_too_small", &RunReport::m_too_small);
  m.def("run_scenario", &run_scenario, py::arg("spec"),
        py::call_guard<py::gil_scoped_release>());
  m.def("report_table", &report_table);
  m.def("report_csv", &report_csv);

  // --- configuration files ---
  m.def("load_model_config", [](const std::filesystem::path& p) {
    ModelConfig mc = load_model_config(p);
    return py::make_tuple(mc.params, mc.topo, mc.c_weight, mc.d_weight);
  });
  m.def("load_problem_config", &load_problem_config, py::arg("file"), py::arg("ss"));
}
