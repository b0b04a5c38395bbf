#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "rpsim/ensembles.hpp"
#include "rpsim/trajectories.hpp"

// Run configuration as a YAML tree with one root table per section:
// system, hamiltonian, reaction, initial_state, integrator, trajectories,
// outputs. Only reaction and initial_state are required.

namespace rpsim::io {

struct StateComponent {
  double weight = 1.0;
  NamedState name = NamedState::coherent_plus;
  std::vector<Complex> amplitudes;  // only for NamedState::custom

  friend bool operator==(const StateComponent&, const StateComponent&) = default;
};

struct InitialStateSpec {
  bool proper_mixture = false;
  std::vector<StateComponent> components{StateComponent{}};

  friend bool operator==(const InitialStateSpec&, const InitialStateSpec&) = default;
};

struct TrajectorySection {
  bool enabled = false;
  TrajectoryConfig config;
};

struct OutputSection {
  std::string csv;
  std::string json;
  std::string plot;
  int stride = 1;

  friend bool operator==(const OutputSection&, const OutputSection&) = default;
};

struct RunConfig {
  SpinSystem system;
  HamiltonianSpec hamiltonian;
  ReactionParams reaction;
  InitialStateSpec initial_state;
  IntegratorConfig integrator;
  TrajectorySection trajectories;
  OutputSection outputs;

  RadicalPairModel model() const { return RadicalPairModel::build(system, hamiltonian, reaction); }

  std::optional<Vector> amplitudes_of(const StateComponent& c) const;
};

inline bool operator==(const TrajectorySection& a, const TrajectorySection& b) {
  return a.enabled == b.enabled && a.config == b.config;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.system == b.system && a.hamiltonian == b.hamiltonian && a.reaction == b.reaction &&
         a.initial_state == b.initial_state && a.integrator == b.integrator &&
         a.trajectories == b.trajectories && a.outputs == b.outputs;
}

// Config errors carry the YAML location when one is known.
inline InputError config_error(const YAML::Node& at, const std::string& what) {
  const YAML::Mark m = at.Mark();
  if (m.is_null()) return InputError(what);
  return InputError("line " + std::to_string(m.line + 1) + ", column " +
                    std::to_string(m.column + 1) + ": " + what);
}

namespace detail {

inline void allow_keys(const YAML::Node& node, const std::string& section,
                       std::initializer_list<const char*> keys) {
  if (!node.IsMap()) throw config_error(node, "'" + section + "' must be a table");
  const std::set<std::string> known(keys.begin(), keys.end());
  std::set<std::string> seen;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!seen.insert(key).second)
      throw config_error(kv.first, "duplicate key '" + key + "' in '" + section + "'");
    if (!known.count(key)) {
      std::string list;
      for (const char* k : keys) list += (list.empty() ? "" : ", ") + std::string(k);
      throw config_error(kv.first, "unknown key '" + key + "' in '" + section +
                                       "' (allowed: " + list + ")");
    }
  }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& name) {
  if (!node.IsScalar()) throw config_error(node, "'" + name + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    throw config_error(node, "'" + name + "' has the wrong type");
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& section) {
  if (const YAML::Node n = parent[key]) out = scalar<T>(n, section + "." + key);
}

template <class T>
T require(const YAML::Node& parent, const char* key, const std::string& section) {
  const YAML::Node n = parent[key];
  if (!n) throw config_error(parent, "missing required key '" + section + "." + key + "'");
  return scalar<T>(n, section + "." + key);
}

inline std::vector<double> numbers(const YAML::Node& node, const std::string& name,
                                   std::optional<std::size_t> size = std::nullopt) {
  if (!node.IsSequence()) throw config_error(node, "'" + name + "' must be a list");
  if (size && node.size() != *size)
    throw config_error(node, "'" + name + "' must have " + std::to_string(*size) + " entries");
  std::vector<double> out;
  for (const auto& v : node) out.push_back(scalar<double>(v, name));
  return out;
}

// Amplitude: a number, or [re, im].
inline Complex amplitude(const YAML::Node& node) {
  if (node.IsScalar()) return scalar<double>(node, "amplitude");
  const auto v = numbers(node, "amplitude", 2);
  return {v[0], v[1]};
}

inline StateComponent state_component(const YAML::Node& node, const std::string& section,
                                      bool with_weight) {
  if (with_weight)
    allow_keys(node, section, {"weight", "named", "custom"});
  else
    allow_keys(node, section, {"named", "custom", "proper_mixture"});
  StateComponent c;
  if (with_weight) c.weight = require<double>(node, "weight", section);
  const bool has_named = bool(node["named"]), has_custom = bool(node["custom"]);
  if (has_named == has_custom)
    throw config_error(node, "'" + section + "' needs exactly one of 'named' or 'custom'");
  if (has_named) {
    try {
      c.name = parse_named_state(scalar<std::string>(node["named"], section + ".named"));
    } catch (const InputError& e) {
      throw config_error(node["named"], e.what());
    }
    if (c.name == NamedState::custom)
      throw config_error(node["named"], "use the 'custom' key to give amplitudes");
  } else {
    c.name = NamedState::custom;
    const YAML::Node amps = node["custom"];
    if (!amps.IsSequence()) throw config_error(amps, "'custom' must be a list of amplitudes");
    for (const auto& a : amps) c.amplitudes.push_back(amplitude(a));
  }
  return c;
}

inline InitialStateSpec initial_state(const YAML::Node& node) {
  InitialStateSpec spec;
  if (node["proper_mixture"]) {
    allow_keys(node, "initial_state", {"proper_mixture"});
    const YAML::Node list = node["proper_mixture"];
    if (!list.IsSequence() || list.size() == 0)
      throw config_error(list, "'proper_mixture' must be a non-empty list");
    spec.proper_mixture = true;
    spec.components.clear();
    for (const auto& item : list)
      spec.components.push_back(state_component(item, "initial_state.proper_mixture[]", true));
  } else {
    spec.components = {state_component(node, "initial_state", false)};
  }
  return spec;
}

inline SpinSystem system(const YAML::Node& node) {
  allow_keys(node, "system", {"electrons", "nuclei"});
  if (const YAML::Node e = node["electrons"]; e && scalar<int>(e, "system.electrons") != 2)
    throw config_error(e, "only radical pairs (electrons: 2) are supported");
  std::vector<NuclearSpec> nuclei;
  if (const YAML::Node list = node["nuclei"]) {
    if (!list.IsSequence()) throw config_error(list, "'system.nuclei' must be a list");
    for (const auto& n : list) {
      allow_keys(n, "system.nuclei[]", {"spin", "electron"});
      NuclearSpec spec;
      const double spin = require<double>(n, "spin", "system.nuclei[]");
      try {
        spec.spin = SpinQuantum::from_value(spin);
      } catch (const InputError& e) {
        throw config_error(n["spin"], e.what());
      }
      read(n, "electron", spec.coupled_electron, "system.nuclei[]");
      if (spec.coupled_electron != 1 && spec.coupled_electron != 2)
        throw config_error(n, "nucleus electron must be 1 or 2");
      nuclei.push_back(spec);
    }
  }
  return SpinSystem(std::move(nuclei));
}

inline HamiltonianSpec hamiltonian(const YAML::Node& node) {
  allow_keys(node, "hamiltonian",
             {"magnetic_field", "g_scale", "hyperfine", "exchange_J", "delta_g_z"});
  HamiltonianSpec spec;
  if (const YAML::Node b = node["magnetic_field"]) {
    const auto v = numbers(b, "hamiltonian.magnetic_field", 3);
    spec.magnetic_field = {v[0], v[1], v[2]};
  }
  if (const YAML::Node g = node["g_scale"]) {
    const auto v = numbers(g, "hamiltonian.g_scale", 2);
    spec.g_scale = {v[0], v[1]};
  }
  read(node, "exchange_J", spec.exchange_J, "hamiltonian");
  read(node, "delta_g_z", spec.delta_g_z, "hamiltonian");
  if (const YAML::Node list = node["hyperfine"]) {
    if (!list.IsSequence()) throw config_error(list, "'hamiltonian.hyperfine' must be a list");
    for (const auto& h : list) {
      allow_keys(h, "hamiltonian.hyperfine[]", {"nucleus", "electron", "A", "tensor"});
      HyperfineCoupling hf;
      const int nucleus = require<int>(h, "nucleus", "hamiltonian.hyperfine[]");
      if (nucleus < 0) throw config_error(h["nucleus"], "nucleus index must be >= 0");
      hf.nucleus = static_cast<std::size_t>(nucleus);
      read(h, "electron", hf.electron, "hamiltonian.hyperfine[]");
      const bool iso = bool(h["A"]), tensor = bool(h["tensor"]);
      if (iso == tensor) throw config_error(h, "hyperfine entry needs exactly one of 'A' or 'tensor'");
      if (iso) {
        hf.coupling = scalar<double>(h["A"], "hamiltonian.hyperfine[].A");
      } else {
        const YAML::Node rows = h["tensor"];
        if (!rows.IsSequence() || rows.size() != 3)
          throw config_error(rows, "'tensor' must be a 3x3 list of lists");
        Tensor3 t{};
        for (std::size_t i = 0; i < 3; ++i) {
          const auto r = numbers(rows[i], "hamiltonian.hyperfine[].tensor row", 3);
          t[i] = {r[0], r[1], r[2]};
        }
        hf.coupling = t;
      }
      spec.hyperfine.push_back(hf);
    }
  }
  return spec;
}

inline IntegratorConfig integrator(const YAML::Node& node) {
  allow_keys(node, "integrator",
             {"dt", "t_max", "trace_floor", "theory", "coherence_mode", "tau_window", "tau_samples",
              "epsilon_denominator", "check_invariants"});
  IntegratorConfig ic;
  read(node, "dt", ic.dt, "integrator");
  read(node, "t_max", ic.t_max, "integrator");
  read(node, "trace_floor", ic.trace_floor, "integrator");
  read(node, "check_invariants", ic.check_invariants, "integrator");
  try {
    if (const YAML::Node t = node["theory"]) ic.theory = parse_theory(scalar<std::string>(t, "theory"));
    if (const YAML::Node m = node["coherence_mode"])
      ic.coherence_mode = parse_coherence_mode(scalar<std::string>(m, "coherence_mode"));
  } catch (const InputError& e) {
    throw config_error(node, e.what());
  }
  if (const YAML::Node w = node["tau_window"])
    ic.coherence.tau_window = scalar<double>(w, "integrator.tau_window");
  read(node, "tau_samples", ic.coherence.tau_samples, "integrator");
  read(node, "epsilon_denominator", ic.coherence.epsilon_denominator, "integrator");
  return ic;
}

inline TrajectorySection trajectories(const YAML::Node& node, double default_t_max) {
  allow_keys(node, "trajectories",
             {"enabled", "n", "seed", "dt", "t_max", "sample_times", "threads"});
  TrajectorySection s;
  s.config.t_max = default_t_max;
  read(node, "enabled", s.enabled, "trajectories");
  if (const YAML::Node n = node["n"]) {
    const long long v = scalar<long long>(n, "trajectories.n");
    if (v < 1) throw config_error(n, "trajectories.n must be >= 1");
    s.config.n_trajectories = static_cast<std::size_t>(v);
  }
  read(node, "seed", s.config.seed, "trajectories");
  read(node, "dt", s.config.dt, "trajectories");
  read(node, "t_max", s.config.t_max, "trajectories");
  read(node, "threads", s.config.threads, "trajectories");
  if (const YAML::Node st = node["sample_times"]) {
    s.config.sample_times = numbers(st, "trajectories.sample_times");
    s.config.record_mean_state = !s.config.sample_times.empty();
  }
  return s;
}

inline OutputSection outputs(const YAML::Node& node) {
  allow_keys(node, "outputs", {"csv", "json", "plot", "stride"});
  OutputSection o;
  read(node, "csv", o.csv, "outputs");
  read(node, "json", o.json, "outputs");
  read(node, "plot", o.plot, "outputs");
  read(node, "stride", o.stride, "outputs");
  if (o.stride < 1) throw config_error(node["stride"], "outputs.stride must be >= 1");
  return o;
}

}  // namespace detail

inline std::optional<Vector> RunConfig::amplitudes_of(const StateComponent& c) const {
  if (c.name != NamedState::custom) return std::nullopt;
  return Vector(Eigen::Map<const Vector>(c.amplitudes.data(),
                                         static_cast<Eigen::Index>(c.amplitudes.size())));
}

// Pure-state ensemble for trajectories: each component contributes its
// nuclear-basis members, scaled by the component weight.
inline PureEnsemble pure_ensemble(const RunConfig& cfg) {
  PureEnsemble out;
  for (const auto& c : cfg.initial_state.components) {
    const PureEnsemble part = named_components(cfg.system, c.name, cfg.amplitudes_of(c));
    for (std::size_t i = 0; i < part.states.size(); ++i) {
      out.weights.push_back(c.weight * part.weights[i]);
      out.states.push_back(part.states[i]);
    }
  }
  return out;
}

inline ProperMixture proper_mixture(const RunConfig& cfg) {
  std::vector<ProperMixture::Component> comps;
  for (const auto& c : cfg.initial_state.components)
    comps.push_back({c.weight, named_state(cfg.system, c.name, cfg.amplitudes_of(c))});
  return ProperMixture(std::move(comps));
}

// The density matrix of the initial state (the weighted sum for mixtures).
inline DensityState initial_density(const RunConfig& cfg) {
  if (cfg.initial_state.components.size() == 1) {
    const auto& c = cfg.initial_state.components.front();
    return named_state(cfg.system, c.name, cfg.amplitudes_of(c));
  }
  return proper_mixture(cfg).summed();
}

// Checks that need more than one section: indices, dimensions, step bounds.
inline void validate(const RunConfig& cfg) {
  const RadicalPairModel model = cfg.model();
  if (cfg.initial_state.proper_mixture)
    (void)proper_mixture(cfg);
  else
    (void)initial_density(cfg);
  if (cfg.integrator.theory == Theory::nonreacting || cfg.reaction.total() > 0.0)
    validate(cfg.integrator, model);
  else
    throw InputError("theory '" + std::string(to_string(cfg.integrator.theory)) +
                     "' needs k_S + k_T > 0 (use theory: nonreacting for k_S = k_T = 0)");
  if (cfg.trajectories.enabled) validate(cfg.trajectories.config, cfg.reaction);
}

inline RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  if (!root.IsMap()) throw InputError("config must be a table of sections");
  detail::allow_keys(root, "config",
                     {"system", "hamiltonian", "reaction", "initial_state", "integrator",
                      "trajectories", "outputs"});
  RunConfig cfg;
  if (root["system"]) cfg.system = detail::system(root["system"]);
  if (root["hamiltonian"]) cfg.hamiltonian = detail::hamiltonian(root["hamiltonian"]);

  const YAML::Node reaction = root["reaction"];
  if (!reaction) throw config_error(root, "missing required section 'reaction'");
  detail::allow_keys(reaction, "reaction", {"k_S", "k_T"});
  cfg.reaction.k_S = detail::require<double>(reaction, "k_S", "reaction");
  cfg.reaction.k_T = detail::require<double>(reaction, "k_T", "reaction");
  try {
    cfg.reaction.validate();
  } catch (const InputError& e) {
    throw config_error(reaction, e.what());
  }

  const YAML::Node init = root["initial_state"];
  if (!init) throw config_error(root, "missing required section 'initial_state'");
  cfg.initial_state = detail::initial_state(init);

  if (root["integrator"]) cfg.integrator = detail::integrator(root["integrator"]);
  cfg.trajectories.config.t_max = cfg.integrator.t_max;
  if (root["trajectories"])
    cfg.trajectories = detail::trajectories(root["trajectories"], cfg.integrator.t_max);
  if (root["outputs"]) cfg.outputs = detail::outputs(root["outputs"]);

  validate(cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Every field, defaults included, so the echo documents the run. JSON text is
// also valid YAML, so the echo parses back to an equal RunConfig.
inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
  using J = nlohmann::ordered_json;
  J nuclei = J::array();
  for (const auto& n : cfg.system.nuclei())
    nuclei.push_back({{"spin", n.spin.value()}, {"electron", n.coupled_electron}});

  const auto& h = cfg.hamiltonian;
  J hyperfine = J::array();
  for (const auto& hf : h.hyperfine) {
    J entry{{"nucleus", hf.nucleus}, {"electron", hf.electron}};
    if (const auto* a = std::get_if<double>(&hf.coupling))
      entry["A"] = *a;
    else
      entry["tensor"] = std::get<Tensor3>(hf.coupling);
    hyperfine.push_back(entry);
  }

  auto component = [](const StateComponent& c, J into) {
    if (c.name == NamedState::custom) {
      J amps = J::array();
      for (const Complex& a : c.amplitudes) amps.push_back({a.real(), a.imag()});
      into["custom"] = amps;
    } else {
      into["named"] = std::string(to_string(c.name));
    }
    return into;
  };
  J init;
  if (cfg.initial_state.proper_mixture) {
    J list = J::array();
    for (const auto& c : cfg.initial_state.components)
      list.push_back(component(c, J{{"weight", c.weight}}));
    init["proper_mixture"] = list;
  } else {
    init = component(cfg.initial_state.components.front(), J::object());
  }

  const auto& ic = cfg.integrator;
  J integ{{"dt", ic.dt},
          {"t_max", ic.t_max},
          {"trace_floor", ic.trace_floor},
          {"theory", std::string(to_string(ic.theory))},
          {"coherence_mode", std::string(to_string(ic.coherence_mode))}};
  if (ic.coherence.tau_window) integ["tau_window"] = *ic.coherence.tau_window;
  integ["tau_samples"] = ic.coherence.tau_samples;
  integ["epsilon_denominator"] = ic.coherence.epsilon_denominator;
  integ["check_invariants"] = ic.check_invariants;

  const auto& tc = cfg.trajectories.config;
  return J{
      {"system", {{"electrons", 2}, {"nuclei", nuclei}}},
      {"hamiltonian",
       {{"magnetic_field", h.magnetic_field},
        {"g_scale", h.g_scale},
        {"exchange_J", h.exchange_J},
        {"delta_g_z", h.delta_g_z},
        {"hyperfine", hyperfine}}},
      {"reaction", {{"k_S", cfg.reaction.k_S}, {"k_T", cfg.reaction.k_T}}},
      {"initial_state", init},
      {"integrator", integ},
      {"trajectories",
       {{"enabled", cfg.trajectories.enabled},
        {"n", tc.n_trajectories},
        {"seed", tc.seed},
        {"dt", tc.dt},
        {"t_max", tc.t_max},
        {"threads", tc.threads},
        {"sample_times", tc.sample_times}}},
      {"outputs",
       {{"csv", cfg.outputs.csv},
        {"json", cfg.outputs.json},
        {"plot", cfg.outputs.plot},
        {"stride", cfg.outputs.stride}}},
  };
}

namespace detail {

inline void emit_yaml(YAML::Emitter& out, const nlohmann::ordered_json& j) {
  switch (j.type()) {
    case nlohmann::ordered_json::value_t::object:
      out << YAML::BeginMap;
      for (const auto& [k, v] : j.items()) {
        out << YAML::Key << k << YAML::Value;
        emit_yaml(out, v);
      }
      out << YAML::EndMap;
      break;
    case nlohmann::ordered_json::value_t::array: {
      const bool flat = std::none_of(j.begin(), j.end(), [](const auto& v) { return v.is_object(); });
      if (flat) out << YAML::Flow;
      out << YAML::BeginSeq;
      for (const auto& v : j) emit_yaml(out, v);
      out << YAML::EndSeq;
      break;
    }
    case nlohmann::ordered_json::value_t::boolean: out << j.get<bool>(); break;
    case nlohmann::ordered_json::value_t::number_integer: out << j.get<long long>(); break;
    case nlohmann::ordered_json::value_t::number_unsigned: out << j.get<unsigned long long>(); break;
    case nlohmann::ordered_json::value_t::number_float: out << j.get<double>(); break;
    case nlohmann::ordered_json::value_t::string: {
      const auto s = j.get<std::string>();
      if (s.empty())
        out << YAML::DoubleQuoted << s;
      else
        out << s;
      break;
    }
    default: out << YAML::Null;
  }
}

}  // namespace detail

inline std::string emit_config(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  detail::emit_yaml(out, to_json(cfg));
  return std::string(out.c_str()) + "\n";
}

}  // namespace rpsim::io
