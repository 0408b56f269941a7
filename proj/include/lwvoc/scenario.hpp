// Scenario files: a line-oriented key tree with braced sections.
//
//   # comment
//   network {
//     n = 3
//     edge = 1 2 0.2 5e-5 1e-8      # from to R_O L_O [C_O], repeatable
//     capacitance = 1e-3            # one value or one per node
//     conductance = 0.5
//   }
//   controller { gamma = 0.1  alpha = 0.03 }      (one value or one per node)
//   setpoints { amplitude = 20  phase = 1.1780  omega = 314.159265358979 }
//   simulation { model = alphabeta  dt = 1e-6  t_end = 0.5  stride = 20
//                init = steady | perturbed NODE DVA DVB | explicit }
//   events { step_g = 1 1.0 0.5 }                 (node new-G time, repeatable)
//   output { dir = out }
//
// Keys are addressed by their dotted path, e.g. network.n.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lwvoc/controller.hpp"
#include "lwvoc/dynamics.hpp"
#include "lwvoc/network.hpp"

namespace lwvoc {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class InitKind { Steady, Perturbed, Explicit };

struct LoadStepEvent {
  double time = 0.0;
  int node = 0;  // 1-based
  double conductance = 0.0;
};

struct Scenario {
  std::string id;
  NetworkSpec network;
  ControllerGains gains;
  Eigen::VectorXd amplitude;  // r*
  Eigen::VectorXd phase;      // theta0*
  double omega = 0.0;

  ModelKind model = ModelKind::AlphaBetaFull;
  InitKind init = InitKind::Steady;
  int perturb_node = 1;
  Eigen::Vector2d perturb_dv = Eigen::Vector2d::Zero();
  Eigen::VectorXd init_u, init_v, init_i;  // explicit initial state; i optional

  std::vector<LoadStepEvent> events;
  double dt = 0.0;
  double t_end = 0.0;
  int stride = 20;
  std::string out_dir = "out";
  bool with_lines = false;

  double tau_star = 1e-3;
  double mixing = 0.5;

  // optional published reference for the steady-state report
  double v_amplitude_ref = std::numeric_limits<double>::quiet_NaN();
  double v_phase_ref = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

class KeyTree {
 public:
  void parse(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> stack;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed == "}") {
        if (stack.empty()) fail(source, lineno, "unmatched '}'");
        stack.pop_back();
        continue;
      }
      if (trimmed.back() == '{') {
        const std::string name = trim(trimmed.substr(0, trimmed.size() - 1));
        if (name.empty() || name.find('=') != std::string::npos)
          fail(source, lineno, "malformed section header '" + trimmed + "'");
        stack.push_back(name);
        continue;
      }
      const size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        fail(source, lineno, "expected 'key = value' or a section, got '" + trimmed + "'");
      const std::string key = trim(trimmed.substr(0, eq));
      if (key.empty()) fail(source, lineno, "empty key");
      if (key.find_first_not_of(
              "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
          std::string::npos)
        fail(source, lineno, "malformed line '" + trimmed + "' (one 'key = value' per line)");
      std::string path;
      for (const std::string& s : stack) path += s + ".";
      path += key;
      values_[path].push_back(split(trimmed.substr(eq + 1)));
    }
    if (!stack.empty()) fail(source, lineno, "unclosed section '" + stack.back() + "'");
  }

  bool has(const std::string& path) const { return values_.count(path) > 0; }

  const std::vector<std::vector<std::string>>& occurrences(const std::string& path) const {
    auto it = values_.find(path);
    if (it == values_.end()) throw ScenarioError("missing key: " + path);
    return it->second;
  }

  const std::vector<std::string>& tokens(const std::string& path) const {
    const auto& occ = occurrences(path);
    if (occ.size() != 1) throw ScenarioError(path + ": key given more than once");
    return occ.front();
  }

  double number(const std::string& path, size_t idx = 0) const {
    const auto& toks = tokens(path);
    if (idx >= toks.size()) throw ScenarioError(path + ": expected a number");
    return to_number(path, toks[idx]);
  }

  static double to_number(const std::string& path, const std::string& tok) {
    try {
      size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ScenarioError("invalid value for " + path + ": '" + tok + "' (expected a number)");
    }
  }

  // One value broadcast to n, or exactly n values.
  std::vector<double> per_node(const std::string& path, int n) const {
    const auto& toks = tokens(path);
    std::vector<double> vals;
    for (const std::string& t : toks) vals.push_back(to_number(path, t));
    if (vals.size() == 1) return std::vector<double>(n, vals[0]);
    if (static_cast<int>(vals.size()) != n)
      throw ScenarioError(path + ": expected 1 or " + std::to_string(n) + " values, got " +
                          std::to_string(vals.size()));
    return vals;
  }

  std::string word(const std::string& path) const {
    const auto& toks = tokens(path);
    if (toks.size() != 1) throw ScenarioError(path + ": expected a single word");
    return toks[0];
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  static std::vector<std::string> split(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
  }
  [[noreturn]] static void fail(const std::string& source, int lineno, const std::string& what) {
    throw ScenarioError(source + ":" + std::to_string(lineno) + ": " + what);
  }

  std::map<std::string, std::vector<std::vector<std::string>>> values_;
};

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

}  // namespace detail

inline ModelKind parse_model_kind(const std::string& word) {
  if (word == "alphabeta") return ModelKind::AlphaBetaFull;
  if (word == "dq") return ModelKind::DqFull;
  if (word == "reduced") return ModelKind::DqReduced;
  throw ScenarioError("invalid value for simulation.model: '" + word +
                      "' (expected alphabeta, dq, or reduced)");
}

inline double default_dt(ModelKind model) {
  return model == ModelKind::DqReduced ? 1e-5 : 1e-6;
}

inline Scenario parse_scenario_text(const std::string& text, const std::string& source) {
  detail::KeyTree kv;
  kv.parse(text, source);

  Scenario sc;
  sc.id = source;

  if (kv.has("id")) sc.id = kv.word("id");

  if (!kv.has("network.n")) throw ScenarioError("missing key: network.n");
  const double n_raw = kv.number("network.n");
  const int n = static_cast<int>(n_raw);
  if (n_raw != n || n < 1) throw ScenarioError("invalid value for network.n: node count must be a positive integer");
  sc.network.node_count = n;
  if (kv.has("network.edge")) {
    for (const auto& toks : kv.occurrences("network.edge")) {
      if (toks.size() != 4 && toks.size() != 5)
        throw ScenarioError("network.edge: expected 'from to resistance inductance [shunt]'");
      NetworkEdge e;
      e.from = static_cast<int>(detail::KeyTree::to_number("network.edge", toks[0]));
      e.to = static_cast<int>(detail::KeyTree::to_number("network.edge", toks[1]));
      e.resistance = detail::KeyTree::to_number("network.edge", toks[2]);
      e.inductance = detail::KeyTree::to_number("network.edge", toks[3]);
      if (toks.size() == 5) e.shunt_capacitance = detail::KeyTree::to_number("network.edge", toks[4]);
      sc.network.edges.push_back(e);
    }
  }
  if (!kv.has("network.capacitance")) throw ScenarioError("missing key: network.capacitance");
  if (!kv.has("network.conductance")) throw ScenarioError("missing key: network.conductance");
  sc.network.capacitance = kv.per_node("network.capacitance", n);
  sc.network.conductance = kv.per_node("network.conductance", n);
  try {
    sc.network.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }

  if (!kv.has("controller.gamma")) throw ScenarioError("missing key: controller.gamma");
  if (!kv.has("controller.alpha")) throw ScenarioError("missing key: controller.alpha");
  sc.gains.gamma = kv.per_node("controller.gamma", n);
  sc.gains.alpha = kv.per_node("controller.alpha", n);
  try {
    sc.gains.validate(n);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }

  if (!kv.has("setpoints.amplitude")) throw ScenarioError("missing key: setpoints.amplitude");
  if (!kv.has("setpoints.omega")) throw ScenarioError("missing key: setpoints.omega");
  sc.amplitude = detail::to_vector(kv.per_node("setpoints.amplitude", n));
  sc.phase = kv.has("setpoints.phase") ? detail::to_vector(kv.per_node("setpoints.phase", n))
                                       : Eigen::VectorXd::Zero(n).eval();
  sc.omega = kv.number("setpoints.omega");
  if (!(sc.omega > 0.0)) throw ScenarioError("setpoints.omega: nominal frequency must be positive");
  for (int k = 0; k < n; ++k)
    if (!(sc.amplitude[k] > 0.0)) throw ScenarioError("setpoints.amplitude: amplitude setpoint must be positive");
  if (kv.has("setpoints.v_amplitude_ref")) sc.v_amplitude_ref = kv.number("setpoints.v_amplitude_ref");
  if (kv.has("setpoints.v_phase_ref")) sc.v_phase_ref = kv.number("setpoints.v_phase_ref");

  sc.model = kv.has("simulation.model") ? parse_model_kind(kv.word("simulation.model"))
                                        : ModelKind::AlphaBetaFull;
  sc.dt = kv.has("simulation.dt") ? kv.number("simulation.dt") : default_dt(sc.model);
  if (!(sc.dt > 0.0)) throw ScenarioError("simulation.dt: step size must be positive");
  sc.t_end = kv.has("simulation.t_end") ? kv.number("simulation.t_end") : 0.5;
  if (!(sc.t_end > 0.0)) throw ScenarioError("simulation.t_end: horizon must be positive");
  if (kv.has("simulation.stride")) {
    sc.stride = static_cast<int>(kv.number("simulation.stride"));
    if (sc.stride < 1) throw ScenarioError("simulation.stride: stride must be at least 1");
  }

  if (kv.has("simulation.init")) {
    const auto& toks = kv.tokens("simulation.init");
    if (toks[0] == "steady") {
      sc.init = InitKind::Steady;
    } else if (toks[0] == "perturbed") {
      if (toks.size() != 4)
        throw ScenarioError("simulation.init: expected 'perturbed NODE DVA DVB'");
      sc.init = InitKind::Perturbed;
      sc.perturb_node = static_cast<int>(detail::KeyTree::to_number("simulation.init", toks[1]));
      sc.perturb_dv[0] = detail::KeyTree::to_number("simulation.init", toks[2]);
      sc.perturb_dv[1] = detail::KeyTree::to_number("simulation.init", toks[3]);
      if (sc.perturb_node < 1 || sc.perturb_node > n)
        throw ScenarioError("simulation.init: perturbed node outside [1, n]");
    } else if (toks[0] == "explicit") {
      sc.init = InitKind::Explicit;
      auto read_vec = [&](const std::string& path, int expected) {
        const auto& vt = kv.tokens(path);
        if (static_cast<int>(vt.size()) != expected)
          throw ScenarioError(path + ": expected " + std::to_string(expected) + " values");
        Eigen::VectorXd v(expected);
        for (int i = 0; i < expected; ++i) v[i] = detail::KeyTree::to_number(path, vt[i]);
        return v;
      };
      sc.init_u = read_vec("simulation.u0", 2 * n);
      sc.init_v = read_vec("simulation.v0", 2 * n);
      if (kv.has("simulation.i0")) sc.init_i = read_vec("simulation.i0", 2 * sc.network.edge_count());
    } else {
      throw ScenarioError("invalid value for simulation.init: '" + toks[0] +
                          "' (expected steady, perturbed, or explicit)");
    }
  }

  if (kv.has("events.step_g")) {
    for (const auto& toks : kv.occurrences("events.step_g")) {
      if (toks.size() != 3) throw ScenarioError("events.step_g: expected 'node conductance time'");
      LoadStepEvent ev;
      ev.node = static_cast<int>(detail::KeyTree::to_number("events.step_g", toks[0]));
      ev.conductance = detail::KeyTree::to_number("events.step_g", toks[1]);
      ev.time = detail::KeyTree::to_number("events.step_g", toks[2]);
      if (ev.node < 1 || ev.node > n) throw ScenarioError("events.step_g: node outside [1, n]");
      if (!(ev.conductance > 0.0)) throw ScenarioError("conductance must be positive");
      if (ev.time < 0.0 || ev.time > sc.t_end)
        throw ScenarioError("events.step_g: event time outside [0, t_end]");
      sc.events.push_back(ev);
    }
    std::sort(sc.events.begin(), sc.events.end(),
              [](const LoadStepEvent& a, const LoadStepEvent& b) { return a.time < b.time; });
  }

  if (kv.has("output.dir")) sc.out_dir = kv.word("output.dir");
  if (kv.has("check.tau_star")) {
    sc.tau_star = kv.number("check.tau_star");
    if (!(sc.tau_star > 0.0)) throw ScenarioError("check.tau_star: threshold must be positive");
  }
  if (kv.has("check.mixing")) {
    sc.mixing = kv.number("check.mixing");
    if (!(sc.mixing > 0.0 && sc.mixing < 1.0))
      throw ScenarioError("check.mixing: mixing constant must lie in (0, 1)");
  }
  return sc;
}

inline Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario sc = parse_scenario_text(buf.str(), path);
  if (!sc.id.empty() && sc.id == path) sc.id = std::filesystem::path(path).stem().string();
  return sc;
}

inline std::string model_name(ModelKind m) {
  switch (m) {
    case ModelKind::AlphaBetaFull: return "alphabeta";
    case ModelKind::DqFull: return "dq";
    case ModelKind::DqReduced: return "reduced";
  }
  return "?";
}

// Effective configuration echo printed by the commands.
inline std::string describe(const Scenario& sc) {
  std::ostringstream os;
  os << "scenario " << sc.id << ": n=" << sc.network.node_count
     << " m=" << sc.network.edge_count() << " model=" << model_name(sc.model)
     << " dt=" << sc.dt << " t_end=" << sc.t_end << " stride=" << sc.stride;
  os << " init=";
  switch (sc.init) {
    case InitKind::Steady: os << "steady"; break;
    case InitKind::Perturbed:
      os << "perturbed(node " << sc.perturb_node << ", dv=[" << sc.perturb_dv[0] << ", "
         << sc.perturb_dv[1] << "])";
      break;
    case InitKind::Explicit: os << "explicit"; break;
  }
  if (!sc.events.empty()) {
    os << " events=";
    for (size_t i = 0; i < sc.events.size(); ++i) {
      if (i) os << ",";
      os << "G" << sc.events[i].node << "->" << sc.events[i].conductance << "@" << sc.events[i].time;
    }
  }
  return os.str();
}

}  // namespace lwvoc
