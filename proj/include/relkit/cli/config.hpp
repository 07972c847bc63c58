#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "relkit/control.hpp"
#include "relkit/core.hpp"
#include "relkit/dynamics.hpp"
#include "relkit/errors.hpp"
#include "relkit/sim.hpp"

namespace relkit::cli {

using nlohmann::json;

struct ScheduleEntry {
  double t = 0.0;
  std::vector<double> value;
};

struct PlantSection {
  int dim = 1;
  Flavor flavor = Flavor::relativistic;
  double rest_mass = 1.0;
  std::optional<double> speed_of_light;  // overrides the unit preset
};

enum class ControllerKind { none, state_feedback, output_feedback, pid };

struct ControllerSection {
  ControllerKind kind = ControllerKind::none;
  bool wrapped = true;
  std::vector<std::vector<double>> gain;  // N rows of 2N entries; empty when poles are used
  std::vector<Pole> poles;
  std::vector<double> kp, ki, kd;
  std::optional<double> integral_limit;
  std::vector<std::vector<double>> output_gain;  // N x N
  OutputFeedback3dMode of3d_mode = OutputFeedback3dMode::verbatim;
  std::vector<ScheduleEntry> force_schedule;  // kind none
  std::optional<double> force_limit;
  std::optional<double> zoh_dt;
  DerivativeSource derivative_source = DerivativeSource::state;
};

struct StateSection {
  std::vector<double> position;
  std::vector<double> velocity;
};

struct OutputsSection {
  std::string csv = "trajectory.csv";
  std::string json = "report.json";
  std::string schedule_csv = "schedule.csv";
  std::string table_csv = "compare.csv";
  std::size_t stride = 1;
};

struct SteeringSection {
  StateSection initial;
  StateSection target;
  double horizon = 1.0;
  int max_doublings = 20;
  double speed_margin = 0.95;
  std::size_t steps_per_horizon = 4000;
  double tolerance = 1e-6;
};

struct CompareSection {
  std::vector<double> regimes;
  std::optional<double> t_end;  // defaults to integrator.t_end
  std::vector<double> direction{1.0, 0.0, 0.0};
  double settle_band = 0.02;
};

struct ScenarioConfig {
  std::string units = "natural";
  PlantSection plant;
  ControllerSection controller;
  std::vector<ScheduleEntry> reference;
  StateSection initial_state;
  IntegratorCfg integrator;
  Tolerances tolerances;
  OutputsSection outputs;
  std::optional<SteeringSection> steering;
  std::optional<CompareSection> compare;

  PhysConsts consts() const {
    const double c = plant.speed_of_light.value_or(units == "si" ? kSpeedOfLightSI : 1.0);
    return PhysConsts(c, plant.rest_mass);
  }
};

inline const char* to_string(Flavor f) { return f == Flavor::newtonian ? "newtonian" : "relativistic"; }

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::none: return "none";
    case ControllerKind::state_feedback: return "state_feedback";
    case ControllerKind::output_feedback: return "output_feedback";
    case ControllerKind::pid: return "pid";
  }
  return "none";
}

inline const char* to_string(Method m) { return m == Method::rk4 ? "rk4" : "rk45_adaptive"; }

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void require_map(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap()) throw ConfigError("'" + path + "' must be a mapping");
}

inline void check_keys(const YAML::Node& node, const std::string& path,
                       const std::set<std::string>& allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + join(path, key) + "'");
  }
}

inline double to_double(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError("'" + path + "' must be a number");
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + path + "' must be a number, got '" + node.Scalar() + "'");
  }
}

inline long long to_integer(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError("'" + path + "' must be an integer");
  try {
    return node.as<long long>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + path + "' must be an integer, got '" + node.Scalar() + "'");
  }
}

inline std::size_t to_count(const YAML::Node& node, const std::string& path) {
  const long long v = to_integer(node, path);
  if (v <= 0) throw ConfigError("'" + path + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

inline bool to_bool(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError("'" + path + "' must be true or false");
  try {
    return node.as<bool>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + path + "' must be true or false, got '" + node.Scalar() + "'");
  }
}

inline std::string to_string_value(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError("'" + path + "' must be a string");
  return node.Scalar();
}

inline std::string to_choice(const YAML::Node& node, const std::string& path,
                             std::initializer_list<const char*> choices) {
  const std::string v = to_string_value(node, path);
  std::string listing;
  for (const char* c : choices) {
    if (v == c) return v;
    listing += listing.empty() ? c : std::string(", ") + c;
  }
  throw ConfigError("'" + path + "' must be one of {" + listing + "}, got '" + v + "'");
}

inline double positive(double v, const std::string& path) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'" + path + "' must be positive");
  return v;
}

/// A vector with `dim` entries; a scalar is accepted when dim == 1 or `broadcast` is set.
inline std::vector<double> to_vector(const YAML::Node& node, const std::string& path, int dim,
                                     bool broadcast = false) {
  if (node.IsScalar()) {
    if (dim != 1 && !broadcast)
      throw ConfigError("'" + path + "' needs " + std::to_string(dim) + " components");
    return std::vector<double>(static_cast<std::size_t>(dim), to_double(node, path));
  }
  if (!node.IsSequence()) throw ConfigError("'" + path + "' must be a number or a list");
  if (static_cast<int>(node.size()) != dim)
    throw ConfigError("'" + path + "' needs " + std::to_string(dim) + " components, got " +
                      std::to_string(node.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(to_double(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::vector<double>> to_matrix(const YAML::Node& node, const std::string& path,
                                                  int rows, int cols) {
  if (!node.IsSequence() || static_cast<int>(node.size()) != rows)
    throw ConfigError("'" + path + "' must be a list of " + std::to_string(rows) + " rows");
  std::vector<std::vector<double>> out;
  for (int r = 0; r < rows; ++r)
    out.push_back(to_vector(node[r], path + "[" + std::to_string(r) + "]", cols));
  return out;
}

inline std::vector<ScheduleEntry> to_schedule(const YAML::Node& node, const std::string& path,
                                              int dim) {
  if (!node.IsSequence() || node.size() == 0)
    throw ConfigError("'" + path + "' must be a non-empty list of {t, value} entries");
  std::vector<ScheduleEntry> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string item = path + "[" + std::to_string(i) + "]";
    require_map(node[i], item);
    check_keys(node[i], item, {"t", "value"});
    if (!node[i]["t"] || !node[i]["value"]) throw ConfigError("'" + item + "' needs both t and value");
    ScheduleEntry e{to_double(node[i]["t"], item + ".t"), to_vector(node[i]["value"], item + ".value", dim)};
    if (!out.empty() && !(e.t > out.back().t))
      throw ConfigError("'" + path + "' times must be strictly increasing");
    out.push_back(std::move(e));
  }
  return out;
}

inline StateSection parse_state(const YAML::Node& node, const std::string& path, int dim) {
  StateSection s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  if (!node) return s;
  require_map(node, path);
  check_keys(node, path, {"position", "velocity"});
  if (node["position"]) s.position = to_vector(node["position"], path + ".position", dim);
  if (node["velocity"]) s.velocity = to_vector(node["velocity"], path + ".velocity", dim);
  return s;
}

inline PlantSection parse_plant(const YAML::Node& node) {
  PlantSection p;
  if (!node) throw ConfigError("missing required section 'plant'");
  require_map(node, "plant");
  check_keys(node, "plant", {"dim", "flavor", "rest_mass", "speed_of_light"});
  if (node["dim"]) {
    const long long d = to_integer(node["dim"], "plant.dim");
    if (d != 1 && d != 3) throw ConfigError("'plant.dim' must be 1 or 3");
    p.dim = static_cast<int>(d);
  }
  if (node["flavor"])
    p.flavor = to_choice(node["flavor"], "plant.flavor", {"relativistic", "newtonian"}) == "newtonian"
                   ? Flavor::newtonian
                   : Flavor::relativistic;
  if (node["rest_mass"]) p.rest_mass = positive(to_double(node["rest_mass"], "plant.rest_mass"), "plant.rest_mass");
  if (node["speed_of_light"])
    p.speed_of_light = positive(to_double(node["speed_of_light"], "plant.speed_of_light"), "plant.speed_of_light");
  return p;
}

inline std::vector<Pole> parse_poles(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) throw ConfigError("'" + path + "' must be a list");
  std::vector<Pole> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string item = path + "[" + std::to_string(i) + "]";
    if (node[i].IsScalar()) {
      out.emplace_back(to_double(node[i], item), 0.0);
    } else {
      const auto ri = to_vector(node[i], item, 2);
      out.emplace_back(ri[0], ri[1]);
    }
  }
  return out;
}

inline ControllerSection parse_controller(const YAML::Node& node, int dim) {
  ControllerSection c;
  if (!node) {
    c.force_schedule = {{0.0, std::vector<double>(dim, 0.0)}};
    return c;
  }
  const std::string path = "controller";
  require_map(node, path);
  if (node["kind"]) {
    const std::string kind =
        to_choice(node["kind"], "controller.kind", {"none", "state_feedback", "output_feedback", "pid"});
    if (kind == "state_feedback") c.kind = ControllerKind::state_feedback;
    if (kind == "output_feedback") c.kind = ControllerKind::output_feedback;
    if (kind == "pid") c.kind = ControllerKind::pid;
  }
  std::set<std::string> allowed{"kind", "force_limit", "zoh_dt"};
  switch (c.kind) {
    case ControllerKind::none: allowed.insert({"force", "force_schedule"}); break;
    case ControllerKind::state_feedback: allowed.insert({"wrapped", "gain", "poles"}); break;
    case ControllerKind::output_feedback: allowed.insert({"wrapped", "output_gain", "of3d_mode"}); break;
    case ControllerKind::pid:
      allowed.insert({"wrapped", "kp", "ki", "kd", "integral_limit", "derivative_source"});
      break;
  }
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      static const std::set<std::string> known{"wrapped", "gain", "poles", "kp", "ki", "kd",
                                               "integral_limit", "output_gain", "of3d_mode",
                                               "force", "force_schedule", "derivative_source"};
      if (known.count(key))
        throw ConfigError("key 'controller." + key + "' does not apply to kind " + to_string(c.kind));
      throw ConfigError("unknown key 'controller." + key + "'");
    }
  }

  if (node["wrapped"]) c.wrapped = to_bool(node["wrapped"], "controller.wrapped");
  if (node["force_limit"])
    c.force_limit = positive(to_double(node["force_limit"], "controller.force_limit"), "controller.force_limit");
  if (node["zoh_dt"]) c.zoh_dt = positive(to_double(node["zoh_dt"], "controller.zoh_dt"), "controller.zoh_dt");

  if (c.kind == ControllerKind::none) {
    if (node["force"] && node["force_schedule"])
      throw ConfigError("give either 'controller.force' or 'controller.force_schedule', not both");
    if (node["force"])
      c.force_schedule = {{0.0, to_vector(node["force"], "controller.force", dim)}};
    else if (node["force_schedule"])
      c.force_schedule = to_schedule(node["force_schedule"], "controller.force_schedule", dim);
    else
      c.force_schedule = {{0.0, std::vector<double>(dim, 0.0)}};
  }

  if (c.kind == ControllerKind::state_feedback) {
    if (!!node["gain"] == !!node["poles"])
      throw ConfigError("state_feedback needs exactly one of 'controller.gain' or 'controller.poles'");
    if (node["poles"]) {
      c.poles = parse_poles(node["poles"], "controller.poles");
    } else {
      const YAML::Node g = node["gain"];
      const bool flat = g.IsSequence() && g.size() == 2 && g[0].IsScalar();
      if (flat) {
        // Per-axis [position gain, velocity gain] applied to every axis.
        const auto pk = to_vector(g, "controller.gain", 2);
        c.gain.assign(dim, std::vector<double>(2 * dim, 0.0));
        for (int i = 0; i < dim; ++i) {
          c.gain[i][i] = pk[0];
          c.gain[i][dim + i] = pk[1];
        }
      } else {
        c.gain = to_matrix(g, "controller.gain", dim, 2 * dim);
      }
    }
  }

  if (c.kind == ControllerKind::output_feedback) {
    c.output_gain.assign(dim, std::vector<double>(dim, 0.0));
    for (int i = 0; i < dim; ++i) c.output_gain[i][i] = 1.0;
    if (node["output_gain"]) {
      const YAML::Node g = node["output_gain"];
      if (g.IsScalar()) {
        const double k = to_double(g, "controller.output_gain");
        for (int i = 0; i < dim; ++i) c.output_gain[i][i] = k;
      } else {
        c.output_gain = to_matrix(g, "controller.output_gain", dim, dim);
      }
    }
    if (node["of3d_mode"])
      c.of3d_mode = to_choice(node["of3d_mode"], "controller.of3d_mode", {"verbatim", "composed"}) == "composed"
                        ? OutputFeedback3dMode::composed
                        : OutputFeedback3dMode::verbatim;
  }

  if (c.kind == ControllerKind::pid) {
    const auto gain = [&](const char* key) {
      const std::string p = std::string("controller.") + key;
      return node[key] ? to_vector(node[key], p, dim, true) : std::vector<double>(dim, 0.0);
    };
    c.kp = gain("kp");
    c.ki = gain("ki");
    c.kd = gain("kd");
    if (node["integral_limit"])
      c.integral_limit =
          positive(to_double(node["integral_limit"], "controller.integral_limit"), "controller.integral_limit");
    if (node["derivative_source"])
      c.derivative_source = to_choice(node["derivative_source"], "controller.derivative_source",
                                      {"state", "backward_difference"}) == "backward_difference"
                                ? DerivativeSource::backward_difference
                                : DerivativeSource::state;
    if (c.derivative_source == DerivativeSource::backward_difference && !c.zoh_dt)
      throw ConfigError("'controller.derivative_source: backward_difference' requires 'controller.zoh_dt'");
  }
  return c;
}

inline std::vector<ScheduleEntry> parse_reference(const YAML::Node& node, int dim) {
  if (!node) return {{0.0, std::vector<double>(dim, 0.0)}};
  require_map(node, "reference");
  check_keys(node, "reference", {"value", "schedule"});
  if (!!node["value"] == !!node["schedule"])
    throw ConfigError("'reference' needs exactly one of 'value' or 'schedule'");
  if (node["value"]) return {{0.0, to_vector(node["value"], "reference.value", dim)}};
  return to_schedule(node["schedule"], "reference.schedule", dim);
}

inline IntegratorCfg parse_integrator(const YAML::Node& node) {
  IntegratorCfg cfg;
  if (!node) return cfg;
  const std::string path = "integrator";
  require_map(node, path);
  check_keys(node, path, {"method", "dt", "rel_tol", "abs_tol", "t_end", "max_steps"});
  if (node["method"])
    cfg.method = to_choice(node["method"], "integrator.method", {"rk4", "rk45_adaptive"}) == "rk4"
                     ? Method::rk4
                     : Method::rk45;
  if (node["dt"]) cfg.dt = positive(to_double(node["dt"], "integrator.dt"), "integrator.dt");
  if (node["rel_tol"]) cfg.rel_tol = positive(to_double(node["rel_tol"], "integrator.rel_tol"), "integrator.rel_tol");
  if (node["abs_tol"]) cfg.abs_tol = positive(to_double(node["abs_tol"], "integrator.abs_tol"), "integrator.abs_tol");
  if (node["t_end"]) cfg.t_end = positive(to_double(node["t_end"], "integrator.t_end"), "integrator.t_end");
  if (node["max_steps"]) cfg.max_steps = to_count(node["max_steps"], "integrator.max_steps");
  return cfg;
}

inline Tolerances parse_tolerances(const YAML::Node& node) {
  if (!node) return {};
  require_map(node, "tolerances");
  check_keys(node, "tolerances", {"speed_guard", "numeric"});
  const Tolerances defaults;
  const double ev = node["speed_guard"] ? to_double(node["speed_guard"], "tolerances.speed_guard") : defaults.eps_v;
  const double en = node["numeric"] ? to_double(node["numeric"], "tolerances.numeric") : defaults.eps_num;
  try {
    return Tolerances(ev, en);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("tolerances: ") + e.what());
  }
}

inline OutputsSection parse_outputs(const YAML::Node& node) {
  OutputsSection o;
  if (!node) return o;
  require_map(node, "outputs");
  check_keys(node, "outputs", {"csv", "json", "schedule_csv", "table_csv", "stride"});
  if (node["csv"]) o.csv = to_string_value(node["csv"], "outputs.csv");
  if (node["json"]) o.json = to_string_value(node["json"], "outputs.json");
  if (node["schedule_csv"]) o.schedule_csv = to_string_value(node["schedule_csv"], "outputs.schedule_csv");
  if (node["table_csv"]) o.table_csv = to_string_value(node["table_csv"], "outputs.table_csv");
  if (node["stride"]) o.stride = to_count(node["stride"], "outputs.stride");
  return o;
}

inline SteeringSection parse_steering(const YAML::Node& node, int dim) {
  SteeringSection s;
  const std::string path = "steering";
  require_map(node, path);
  check_keys(node, path, {"initial", "target", "horizon", "max_doublings", "speed_margin",
                          "steps_per_horizon", "tolerance"});
  if (!node["target"]) throw ConfigError("'steering.target' is required");
  s.initial = parse_state(node["initial"], "steering.initial", dim);
  s.target = parse_state(node["target"], "steering.target", dim);
  if (node["horizon"]) s.horizon = positive(to_double(node["horizon"], "steering.horizon"), "steering.horizon");
  if (node["max_doublings"]) {
    const long long d = to_integer(node["max_doublings"], "steering.max_doublings");
    if (d < 0) throw ConfigError("'steering.max_doublings' must be non-negative");
    s.max_doublings = static_cast<int>(d);
  }
  if (node["speed_margin"]) {
    s.speed_margin = to_double(node["speed_margin"], "steering.speed_margin");
    if (!(s.speed_margin > 0.0 && s.speed_margin < 1.0))
      throw ConfigError("'steering.speed_margin' must lie in (0, 1)");
  }
  if (node["steps_per_horizon"]) s.steps_per_horizon = to_count(node["steps_per_horizon"], "steering.steps_per_horizon");
  if (node["tolerance"]) s.tolerance = positive(to_double(node["tolerance"], "steering.tolerance"), "steering.tolerance");
  return s;
}

inline CompareSection parse_compare(const YAML::Node& node) {
  CompareSection c;
  const std::string path = "compare";
  require_map(node, path);
  check_keys(node, path, {"regimes", "t_end", "direction", "settle_band"});
  if (!node["regimes"] || !node["regimes"].IsSequence()) throw ConfigError("'compare.regimes' must be a list");
  if (node["regimes"].size() == 0) throw ConfigError("'compare.regimes' must not be empty");
  for (std::size_t i = 0; i < node["regimes"].size(); ++i) {
    const std::string item = "compare.regimes[" + std::to_string(i) + "]";
    const double s = to_double(node["regimes"][i], item);
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("'" + item + "' must lie in (0, 1)");
    c.regimes.push_back(s);
  }
  if (node["t_end"]) c.t_end = positive(to_double(node["t_end"], "compare.t_end"), "compare.t_end");
  if (node["direction"]) {
    c.direction = to_vector(node["direction"], "compare.direction", 3);
    if (c.direction[0] == 0.0 && c.direction[1] == 0.0 && c.direction[2] == 0.0)
      throw ConfigError("'compare.direction' must be non-zero");
  }
  if (node["settle_band"]) {
    c.settle_band = to_double(node["settle_band"], "compare.settle_band");
    if (!(c.settle_band > 0.0 && c.settle_band < 1.0)) throw ConfigError("'compare.settle_band' must lie in (0, 1)");
  }
  return c;
}

}  // namespace detail

/// Parses and validates one scenario document. Unknown keys are rejected with their full path.
inline ScenarioConfig parse_config(const YAML::Node& root) {
  if (!root || root.IsNull()) throw ConfigError("empty scenario document");
  detail::require_map(root, "<root>");
  detail::check_keys(root, "", {"units", "plant", "controller", "reference", "initial_state", "integrator",
                                "tolerances", "outputs", "steering", "compare"});
  ScenarioConfig cfg;
  if (root["units"]) cfg.units = detail::to_choice(root["units"], "units", {"natural", "si"});
  cfg.plant = detail::parse_plant(root["plant"]);
  const int dim = cfg.plant.dim;
  cfg.controller = detail::parse_controller(root["controller"], dim);
  cfg.reference = detail::parse_reference(root["reference"], dim);
  cfg.initial_state = detail::parse_state(root["initial_state"], "initial_state", dim);
  cfg.integrator = detail::parse_integrator(root["integrator"]);
  cfg.tolerances = detail::parse_tolerances(root["tolerances"]);
  cfg.outputs = detail::parse_outputs(root["outputs"]);
  if (root["steering"]) cfg.steering = detail::parse_steering(root["steering"], dim);
  if (root["compare"]) cfg.compare = detail::parse_compare(root["compare"]);
  return cfg;
}

inline ScenarioConfig parse_config_string(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

inline ScenarioConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("malformed scenario '" + path + "': " + e.what());
  }
  return parse_config(root);
}

// --- resolved-config echo -------------------------------------------------------------------

inline json schedule_json(const std::vector<ScheduleEntry>& s) {
  json out = json::array();
  for (const auto& e : s) out.push_back({{"t", e.t}, {"value", e.value}});
  return out;
}

inline json state_json(const StateSection& s) {
  return {{"position", s.position}, {"velocity", s.velocity}};
}

inline json to_json(const ScenarioConfig& cfg) {
  const PhysConsts k = cfg.consts();
  json plant{{"dim", cfg.plant.dim},
             {"flavor", to_string(cfg.plant.flavor)},
             {"rest_mass", k.m0},
             {"speed_of_light", k.c}};

  const auto& c = cfg.controller;
  json ctrl{{"kind", to_string(c.kind)}};
  if (c.force_limit) ctrl["force_limit"] = *c.force_limit;
  if (c.zoh_dt) ctrl["zoh_dt"] = *c.zoh_dt;
  switch (c.kind) {
    case ControllerKind::none: ctrl["force_schedule"] = schedule_json(c.force_schedule); break;
    case ControllerKind::state_feedback:
      ctrl["wrapped"] = c.wrapped;
      if (!c.poles.empty()) {
        json poles = json::array();
        for (const Pole p : c.poles) poles.push_back(json::array({p.real(), p.imag()}));
        ctrl["poles"] = poles;
      } else {
        ctrl["gain"] = c.gain;
      }
      break;
    case ControllerKind::output_feedback:
      ctrl["wrapped"] = c.wrapped;
      ctrl["output_gain"] = c.output_gain;
      ctrl["of3d_mode"] = c.of3d_mode == OutputFeedback3dMode::composed ? "composed" : "verbatim";
      break;
    case ControllerKind::pid:
      ctrl["wrapped"] = c.wrapped;
      ctrl["kp"] = c.kp;
      ctrl["ki"] = c.ki;
      ctrl["kd"] = c.kd;
      if (c.integral_limit) ctrl["integral_limit"] = *c.integral_limit;
      ctrl["derivative_source"] =
          c.derivative_source == DerivativeSource::backward_difference ? "backward_difference" : "state";
      break;
  }

  const auto& ic = cfg.integrator;
  json out{{"units", cfg.units},
           {"plant", plant},
           {"controller", ctrl},
           {"reference", {{"schedule", schedule_json(cfg.reference)}}},
           {"initial_state", state_json(cfg.initial_state)},
           {"integrator",
            {{"method", to_string(ic.method)},
             {"dt", ic.dt},
             {"rel_tol", ic.rel_tol},
             {"abs_tol", ic.abs_tol},
             {"t_end", ic.t_end},
             {"max_steps", ic.max_steps}}},
           {"tolerances", {{"speed_guard", cfg.tolerances.eps_v}, {"numeric", cfg.tolerances.eps_num}}},
           {"outputs",
            {{"csv", cfg.outputs.csv},
             {"json", cfg.outputs.json},
             {"schedule_csv", cfg.outputs.schedule_csv},
             {"table_csv", cfg.outputs.table_csv},
             {"stride", cfg.outputs.stride}}}};
  if (cfg.steering) {
    const auto& s = *cfg.steering;
    out["steering"] = {{"initial", state_json(s.initial)},
                       {"target", state_json(s.target)},
                       {"horizon", s.horizon},
                       {"max_doublings", s.max_doublings},
                       {"speed_margin", s.speed_margin},
                       {"steps_per_horizon", s.steps_per_horizon},
                       {"tolerance", s.tolerance}};
  }
  if (cfg.compare) {
    const auto& s = *cfg.compare;
    out["compare"] = {{"regimes", s.regimes},
                      {"t_end", s.t_end.value_or(cfg.integrator.t_end)},
                      {"direction", s.direction},
                      {"settle_band", s.settle_band}};
  }
  return out;
}

}  // namespace relkit::cli
