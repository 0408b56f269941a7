// Command-line front end: scenario-driven simulation, stability
// certification, steady-state reporting, and the time-scale separation
// sweep.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lwvoc/commands.hpp"
#include "lwvoc/scenario.hpp"

namespace {

struct CommonOptions {
  std::string scenario_path;
  std::optional<std::string> out_dir;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<int> stride;
  std::optional<std::string> frame;
  bool with_lines = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--scenario", opts.scenario_path, "scenario file")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--dt", opts.dt, "integration step, seconds");
  cmd->add_option("--t-end", opts.t_end, "simulation horizon, seconds");
  cmd->add_option("--stride", opts.stride, "output every n-th step");
  cmd->add_option("--frame", opts.frame, "model: alphabeta, dq, or reduced")
      ->check(CLI::IsMember({"alphabeta", "dq", "reduced"}));
  cmd->add_flag("--with-lines", opts.with_lines, "append line-current columns to the CSV");
}

// Loads the scenario and applies command-line overrides.
lwvoc::Scenario load(const CommonOptions& opts) {
  lwvoc::Scenario sc = lwvoc::parse_scenario(opts.scenario_path);
  if (opts.frame) {
    const lwvoc::ModelKind model = lwvoc::parse_model_kind(*opts.frame);
    if (model != sc.model && !opts.dt) sc.dt = lwvoc::default_dt(model);
    sc.model = model;
  }
  if (opts.out_dir) sc.out_dir = *opts.out_dir;
  if (opts.dt) sc.dt = *opts.dt;
  if (opts.t_end) sc.t_end = *opts.t_end;
  if (opts.stride) sc.stride = *opts.stride;
  sc.with_lines = opts.with_lines;
  if (!(sc.dt > 0.0)) throw lwvoc::ScenarioError("--dt: step size must be positive");
  if (!(sc.t_end > 0.0)) throw lwvoc::ScenarioError("--t-end: horizon must be positive");
  if (sc.stride < 1) throw lwvoc::ScenarioError("--stride: stride must be at least 1");
  for (const lwvoc::LoadStepEvent& ev : sc.events)
    if (ev.time > sc.t_end)
      throw lwvoc::ScenarioError("events.step_g: event time outside [0, t_end]");
  return sc;
}

lwvoc::LoadStepEvent parse_step_shortcut(const std::string& text) {
  // NODE:VALUE:TIME
  const size_t a = text.find(':');
  const size_t b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (a == std::string::npos || b == std::string::npos)
    throw lwvoc::ScenarioError("--step-g: expected NODE:VALUE:TIME, got '" + text + "'");
  try {
    lwvoc::LoadStepEvent ev;
    ev.node = std::stoi(text.substr(0, a));
    ev.conductance = std::stod(text.substr(a + 1, b - a - 1));
    ev.time = std::stod(text.substr(b + 1));
    return ev;
  } catch (const std::exception&) {
    throw lwvoc::ScenarioError("--step-g: expected NODE:VALUE:TIME, got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lambda-omega virtual oscillator control: simulation and stability certification"};
  app.require_subcommand(1);

  CommonOptions sim_opts, check_opts, steady_opts, step_opts, sweep_opts;
  bool strict = false;
  std::vector<std::string> step_shortcuts;
  std::vector<double> sweep_scales{1.0, 0.5, 0.25};

  CLI::App* sim = app.add_subcommand("simulate", "integrate the selected model and emit a CSV");
  add_common(sim, sim_opts);

  CLI::App* check = app.add_subcommand("check-stability", "evaluate the stability certificates");
  add_common(check, check_opts);
  check->add_flag("--strict", strict, "exit nonzero when a condition fails");

  CLI::App* steady = app.add_subcommand("steady-state", "print the induced steady state");
  add_common(steady, steady_opts);

  CLI::App* step = app.add_subcommand("load-step", "simulate with a conductance step shortcut");
  add_common(step, step_opts);
  step->add_option("--step-g", step_shortcuts, "load step NODE:VALUE:TIME")->required();

  CLI::App* sweep = app.add_subcommand("sweep-epsilon",
                                       "full-vs-reduced deviation across line inductance scales");
  add_common(sweep, sweep_opts);
  sweep->add_option("--scales", sweep_scales, "line inductance scale factors");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return lwvoc::cmd_simulate(load(sim_opts));
    if (check->parsed()) return lwvoc::cmd_check(load(check_opts), strict);
    if (steady->parsed()) return lwvoc::cmd_steady_state(load(steady_opts));
    if (step->parsed()) {
      lwvoc::Scenario sc = load(step_opts);
      for (const std::string& text : step_shortcuts) {
        const lwvoc::LoadStepEvent ev = parse_step_shortcut(text);
        if (ev.node < 1 || ev.node > sc.network.node_count)
          throw lwvoc::ScenarioError("--step-g: node outside [1, n]");
        if (!(ev.conductance > 0.0)) throw lwvoc::ScenarioError("conductance must be positive");
        if (ev.time < 0.0 || ev.time > sc.t_end)
          throw lwvoc::ScenarioError("--step-g: event time outside [0, t_end]");
        sc.events.push_back(ev);
      }
      std::sort(sc.events.begin(), sc.events.end(),
                [](const lwvoc::LoadStepEvent& a, const lwvoc::LoadStepEvent& b) {
                  return a.time < b.time;
                });
      return lwvoc::cmd_simulate(sc);
    }
    if (sweep->parsed()) return lwvoc::cmd_sweep_epsilon(load(sweep_opts), sweep_scales);
  } catch (const lwvoc::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return lwvoc::kExitScenarioError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lwvoc::kExitNumericalError;
  }
  return lwvoc::kExitOk;
}
