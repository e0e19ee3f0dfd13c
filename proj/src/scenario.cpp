#include "esactrl/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "esactrl/model.hpp"
#include "esactrl/selection.hpp"
#include "esactrl/sim.hpp"

namespace esactrl {

using Eigen::VectorXd;

void ScenarioSpec::validate() const {
  if (kind != 'A' && kind != 'B' && kind != 'C')
    throw std::invalid_argument("scenario: kind must be A, B, or C");
  if (model_file.empty() || problem_file.empty() || out_dir.empty())
    throw std::invalid_argument("scenario: model, problem, and output paths are required");
}

MethodConfig parse_method_config(const std::string& text) {
  MethodConfig m;
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
      throw std::invalid_argument("method config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "alpha_grid") {
      m.sca.alpha_grid.clear();
      std::stringstream s(val);
      std::string tok;
      while (std::getline(s, tok, ',')) m.sca.alpha_grid.push_back(std::stod(tok));
    }
    else if (key == "max_iter") m.sca.max_iter = std::stoi(val);
    else if (key == "tol") m.sca.tol = std::stod(val);
    else if (key == "init_mu0") m.sca.init_mu0 = std::stod(val);
    else if (key == "init_mu1") m.sca.init_mu1 = std::stod(val);
    else if (key == "big_m") m.bigm.big_m = std::stod(val);
    else if (key == "alpha") m.bigm.alpha = std::stod(val);
    else if (key == "mu0") m.bigm.mu0 = std::stod(val);
    else if (key == "mu1") m.bigm.mu1 = std::stod(val);
    else throw std::invalid_argument("method config: unknown key '" + key + "'");
  }
  m.sca.validate();
  m.bigm.validate();
  return m;
}

MethodConfig load_method_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open method config: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_method_config(buf.str());
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) {
    if (!s.empty()) s += "; ";
    s += p;
  }
  return s;
}

}  // namespace

RunReport run_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const ModelConfig mc = load_model_config(spec.model_file);
  const StateSpace ss = build_network(mc.params, mc.topo, mc.c_weight, mc.d_weight);
  const SynthesisProblem problem = load_problem_config(spec.problem_file, ss);
  const MethodConfig method =
      spec.method_file.empty() ? MethodConfig{} : load_method_config(spec.method_file);
  std::filesystem::create_directories(spec.out_dir);

  RunReport rep;
  rep.scenario = spec.kind;
  ControllerSolution sol;

  if (spec.kind == 'A' || spec.kind == 'B') {
    ScaConfig cfg = method.sca;
    cfg.parallel = spec.parallel;
    if (spec.kind == 'A') {
      cfg.pin_gamma = true;
      cfg.gamma0 = VectorXd::Ones(ss.nu());
    }
    const ScaResult relax = sca_run(problem, cfg);
    write_file(spec.out_dir / "sca_iterations.csv", relax.log_csv);
    if (!relax.feasible)
      throw ScenarioError(ScenarioError::Kind::infeasible, "relaxation",
                          join(relax.diagnostics));
    rep.lower = relax.lower;
    const double mu0 = relax.final.vars.mu0, mu1 = relax.final.vars.mu1;

    if (spec.kind == 'A') {
      sol = certify_fixed(problem, relax.alpha, mu0, mu1, VectorXd::Ones(ss.nu()));
      if (!sol.certified())
        throw ScenarioError(ScenarioError::Kind::numerical, "certification", sol.detail);
    } else {
      const LogisticConstraints& logi = problem.logistics_for(0);
      const VectorXd greal = relax.final.vars.gamma;
      bool have = false;
      std::string chosen_method;
      VectorXd best_g;
      try {
        VectorXd gt = slice_threshold(greal, logi);
        if (logi.admits(gt)) {
          ControllerSolution st = certify_fixed(problem, relax.alpha, mu0, mu1, gt);
          if (st.certified()) {
            sol = st;
            best_g = gt;
            chosen_method = "threshold";
            have = true;
          }
        }
      } catch (const std::runtime_error&) {
        // the overridden threshold selection conflicted with the cap
      }
      auto [gr, sr] = slice_ranked(greal, problem, relax.alpha, mu0, mu1);
      if (sr.certified() && (!have || sr.objective < sol.objective)) {
        sol = sr;
        best_g = gr;
        chosen_method = "ranked";
        have = true;
      }
      if (!have)
        throw ScenarioError(ScenarioError::Kind::infeasible, "selection",
                            "neither slicing method yielded a certifiable selection");
      BoundReport br;
      br.lower = relax.lower;
      br.upper = sol.objective;
      br.gamma_real = greal;
      br.gamma_binary = best_g;
      br.method = chosen_method;
      br.solution = sol;
      write_file(spec.out_dir / "selection_report.txt", selection_report(br));
    }
  } else {
    const BnbResult bnb = branch_and_bound(problem, method.bigm);
    write_file(spec.out_dir / "bnb_trace.csv", bnb.trace_csv);
    if (!bnb.feasible)
      throw ScenarioError(ScenarioError::Kind::infeasible, "exact selection", bnb.detail);
    sol = bnb.solution;
    rep.lower = sol.objective;
    rep.m_too_small = bnb.m_too_small;
  }
  rep.upper = sol.objective;

  SimConfig sim_cfg;  // shared-phase cosine on every disturbance channel
  const SimTrace trace = simulate(ss, sol.K, sol.gamma, sim_cfg);
  write_file(spec.out_dir / "sim_trace.csv", trace_csv(trace));
  if (trace.diverged)
    throw ScenarioError(ScenarioError::Kind::numerical, "simulation",
                        "closed-loop state diverged");
  const LinfReport linf = verify_linf(trace, sol.mu, problem.rho_eff());

  rep.alpha = sol.alpha;
  rep.mu = sol.mu;
  rep.gamma = sol.gamma;
  rep.active_count = sol.active_count();
  rep.margin = linf.margin;
  rep.max_norm_u = linf.max_norm_u;
  rep.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

namespace {

std::string diag_set(const VectorXd& gamma) {
  std::string s = "{";
  for (int i = 0; i < gamma.size(); ++i) {
    if (i) s += ',';
    s += gamma[i] >= 0.5 ? '1' : '0';
  }
  return s + "}";
}

}  // namespace

std::string report_table(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("report_table: no reports");
  std::string out =
      "Scenario |  alpha |     mu | active |    dt_s | diag_gamma\n"
      "---------+--------+--------+--------+---------+-----------\n";
  char buf[160];
  for (const RunReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%8c | %6.3f | %6.4f | %6d | %7.1f | %s\n", r.scenario,
                  r.alpha, r.mu, r.active_count, r.wall_time_seconds,
                  diag_set(r.gamma).c_str());
    out += buf;
  }
  return out;
}

std::string report_csv(const std::vector<RunReport>& reports) {
  std::ostringstream os;
  os.precision(12);
  os << "scenario,alpha,mu,active_count,wall_time_s,lower,upper,margin,max_norm_u,"
        "diag_gamma\n";
  for (const RunReport& r : reports) {
    os << r.scenario << ',' << r.alpha << ',' << r.mu << ',' << r.active_count << ','
       << r.wall_time_seconds << ',' << r.lower << ',' << r.upper << ',' << r.margin << ','
       << r.max_norm_u << ',';
    for (int i = 0; i < r.gamma.size(); ++i) os << (i ? ";" : "") << (r.gamma[i] >= 0.5 ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

}  // namespace esactrl
