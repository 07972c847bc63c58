#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "relkit/analysis.hpp"
#include "relkit/cli/config.hpp"
#include "relkit/cli/io.hpp"
#include "relkit/relkit.hpp"

namespace relkit::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitValidation = 2, kExitSimulation = 3 };

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  bool gnuplot_script = false;
};

template <int N>
struct Scenario {
  PlantModel<N> plant;
  ControlLaw<N> law;
  Reference<N> reference;
  State<N> x0;
  Tolerances tol;
};

namespace detail {

template <int N>
Reference<N> to_reference(const std::vector<ScheduleEntry>& schedule) {
  Reference<N> ref;
  ref.segments.clear();
  for (const auto& e : schedule) ref.segments.emplace_back(e.t, to_vec<N>(e.value));
  ref.validate();
  return ref;
}

template <int Rows, int Cols>
Eigen::Matrix<double, Rows, Cols> to_matrix(const std::vector<std::vector<double>>& m) {
  if (m.size() != Rows) throw DimensionMismatch(Rows, m.size());
  Eigen::Matrix<double, Rows, Cols> out;
  for (int r = 0; r < Rows; ++r) {
    if (m[r].size() != Cols) throw DimensionMismatch(Cols, m[r].size());
    for (int c = 0; c < Cols; ++c) out(r, c) = m[r][c];
  }
  return out;
}

template <int N>
State<N> to_state(const StateSection& s) {
  return State<N>{to_vec<N>(s.position), to_vec<N>(s.velocity)};
}

inline std::filesystem::path output_path(const CommandOptions& opts, const std::string& name) {
  const std::filesystem::path p(name);
  return p.is_absolute() ? p : opts.out_dir / p;
}

template <int N>
json state_json(const State<N>& x) {
  return {{"position", std::vector<double>(x.p.data(), x.p.data() + N)},
          {"velocity", std::vector<double>(x.v.data(), x.v.data() + N)}};
}

inline json error_json(const std::string& type, const std::string& message) {
  return {{"type", type}, {"message", message}};
}

template <int N>
json trajectory_metrics(const Trajectory<N>& traj, const PhysConsts& k) {
  json m;
  if (traj.samples.empty()) {
    m["samples"] = 0;
    return m;
  }
  const auto& last = traj.back();
  double peak_v = 0.0, peak_u = 0.0;
  for (const auto& s : traj.samples) {
    peak_v = std::max(peak_v, s.x.v.norm());
    peak_u = std::max(peak_u, s.u.norm());
  }
  m["final_time"] = last.t;
  m["final_state"] = state_json<N>(last.x);
  m["tracking_error_norm"] = last.e.norm();
  m["settling_time"] = finite_or_null(settling_time<N>(traj, 0.02));
  m["peak_speed_over_c"] = peak_v / k.c;
  m["peak_force"] = peak_u;
  m["energy_audit_residual"] = traj.samples.size() >= 2 ? json(energy_audit<N>(traj)) : json(nullptr);
  m["steps"] = traj.steps;
  m["rejected_steps"] = traj.rejected;
  m["samples"] = traj.samples.size();
  return m;
}

template <int N>
std::vector<int> state_columns() {
  std::vector<int> cols;
  for (int i = 0; i < 2 * N; ++i) cols.push_back(2 + i);
  return cols;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Turns a parsed config into library objects, applying every check that can fail before
/// integration starts. Throws relkit::Error subclasses, all of which are validation errors.
template <int N>
Scenario<N> build_scenario(const ScenarioConfig& cfg) {
  const PhysConsts k = cfg.consts();
  const auto& c = cfg.controller;
  Scenario<N> s;
  s.tol = cfg.tolerances;
  s.plant = PlantModel<N>{k, cfg.plant.flavor};
  switch (c.kind) {
    case ControllerKind::none: {
      const Reference<N> schedule = detail::to_reference<N>(c.force_schedule);
      s.law.kind = OpenLoopForce<N>{[schedule](double t) { return schedule.at(t); }};
      break;
    }
    case ControllerKind::state_feedback: {
      StateFeedbackGain<N> gain;
      if (!c.poles.empty())
        gain = design_pole_placement<N>(c.poles, k, cfg.tolerances);
      else
        gain.K = detail::to_matrix<N, 2 * N>(c.gain);
      if (!gain.K.allFinite()) throw InvalidArgument("state-feedback gain must be finite");
      s.law.kind = StateFeedbackLaw<N>{gain};
      break;
    }
    case ControllerKind::output_feedback: {
      OutputFeedbackLaw<N> of;
      of.gain = detail::to_matrix<N, N>(c.output_gain);
      of.mode = c.of3d_mode;
      s.law.kind = of;
      break;
    }
    case ControllerKind::pid: {
      PidGains<N> g;
      g.kp = to_vec<N>(c.kp);
      g.ki = to_vec<N>(c.ki);
      g.kd = to_vec<N>(c.kd);
      g.integral_limit = c.integral_limit;
      g.validate();
      s.law.kind = PidLaw<N>{g};
      break;
    }
  }
  s.law.wrapped = c.wrapped;
  s.law.force_limit = c.force_limit;
  s.law.zoh_dt = c.zoh_dt;
  s.law.derivative_source = c.derivative_source;
  if (s.law.derivative_source == DerivativeSource::backward_difference && !s.law.zoh_dt)
    throw ConfigError("backward_difference derivatives require controller.zoh_dt");
  s.reference = detail::to_reference<N>(cfg.reference);
  s.x0 = detail::to_state<N>(cfg.initial_state);
  cfg.integrator.validate();
  if (cfg.plant.flavor == Flavor::relativistic) {
    try {
      check_speed<N>(s.x0.v, k, s.tol);
    } catch (const SpeedBoundViolation&) {
      throw ConfigError("initial_state.velocity must be below the speed of light");
    }
  }
  return s;
}

/// `RELKIT_THREADS` caps the worker count; unset means one worker per hardware thread.
inline unsigned resolve_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("RELKIT_THREADS");
  if (env == nullptr || *env == '\0') return hw;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v <= 0) throw ConfigError("RELKIT_THREADS must be a positive integer");
  return std::min<unsigned>(hw, static_cast<unsigned>(v));
}

template <int N>
int run_simulate(const ScenarioConfig& cfg, const CommandOptions& opts, std::ostream& err) {
  Scenario<N> sc;
  try {
    sc = build_scenario<N>(cfg);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  const auto start = std::chrono::steady_clock::now();
  Trajectory<N> traj;
  json report{{"command", "simulate"}, {"truncated", false}};
  int code = kExitOk;
  try {
    traj = integrate_closed_loop<N>(sc.plant, sc.law, sc.reference, cfg.integrator, sc.x0, sc.tol);
  } catch (const IntegrationFailure<N>& e) {
    traj = e.partial();
    report["truncated"] = true;
    report["error"] = detail::error_json(to_string(e.cause()), e.what());
    err << "error: " << e.what() << '\n';
    code = kExitSimulation;
  } catch (const Error& e) {
    report["truncated"] = true;
    report["error"] = detail::error_json("SimulationError", e.what());
    err << "error: " << e.what() << '\n';
    code = kExitSimulation;
  }
  report["wall_time_s"] = detail::seconds_since(start);
  report.update(detail::trajectory_metrics<N>(traj, sc.plant.consts));
  report["config"] = to_json(cfg);

  const auto csv = detail::output_path(opts, cfg.outputs.csv);
  write_trajectory_csv<N>(csv, traj, cfg.outputs.stride);
  report["csv"] = csv.string();
  if (opts.gnuplot_script) {
    const auto gp = std::filesystem::path(csv).replace_extension(".gp");
    write_gnuplot_script(gp, csv.filename().string(), trajectory_header<N>(), 1, detail::state_columns<N>());
  }
  write_json(detail::output_path(opts, cfg.outputs.json), report);
  return code;
}

template <int N>
int run_steer(const ScenarioConfig& cfg, const CommandOptions& opts, std::ostream& err) {
  const PhysConsts k = cfg.consts();
  SteeringProblem<N> prob;
  SteeringOptions so;
  try {
    if (!cfg.steering) throw ConfigError("steer needs a 'steering' section");
    if (cfg.plant.flavor != Flavor::relativistic)
      throw ConfigError("steer realizes schedules on the relativistic plant; set plant.flavor: relativistic");
    const auto& s = *cfg.steering;
    prob = SteeringProblem<N>::create(detail::to_state<N>(s.initial), detail::to_state<N>(s.target),
                                      s.horizon, k, cfg.tolerances);
    so.speed_margin = s.speed_margin;
    so.max_doublings = s.max_doublings;
    so.steps_per_horizon = s.steps_per_horizon;
    so.tolerance = s.tolerance;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  const auto start = std::chrono::steady_clock::now();
  json report{{"command", "steer"}, {"truncated", false}, {"config", to_json(cfg)}};
  report["target"] = detail::state_json<N>(prob.xT);
  const auto csv = detail::output_path(opts, cfg.outputs.csv);
  const auto json_path = detail::output_path(opts, cfg.outputs.json);
  SteeringSolution<N> sol;
  try {
    sol = min_energy_steer<N>(prob, k, so, cfg.tolerances);
  } catch (const IntegrationFailure<N>& e) {
    report["truncated"] = true;
    report["error"] = detail::error_json(to_string(e.cause()), e.what());
    report.update(detail::trajectory_metrics<N>(e.partial(), k));
    write_trajectory_csv<N>(csv, e.partial(), cfg.outputs.stride);
    write_json(json_path, report);
    err << "error: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const HorizonExhausted& e) {
    report["error"] = detail::error_json("HorizonExhausted", e.what());
    write_json(json_path, report);
    err << "error: " << e.what() << '\n';
    return kExitSimulation;
  }

  report["wall_time_s"] = detail::seconds_since(start);
  report.update(detail::trajectory_metrics<N>(sol.trajectory, k));
  report["achieved"] = detail::state_json<N>(sol.achieved);
  report["endpoint_error"] = sol.endpoint_error;
  report["within_tolerance"] = sol.within_tolerance;
  report["horizon"] = sol.horizon;
  report["doublings"] = sol.doublings;
  report["predicted_peak_speed_over_c"] = sol.predicted_peak_speed / k.c;
  report["peak_w_by_horizon"] = sol.peak_w_by_horizon;
  report["horizon_relief_violated"] = sol.horizon_relief_violated;

  write_trajectory_csv<N>(csv, sol.trajectory, cfg.outputs.stride);
  std::vector<std::string> header{"t"};
  const char* axes[] = {"x", "y", "z"};
  for (const char* q : {"w", "u"})
    for (int i = 0; i < N; ++i) header.push_back(N == 1 ? std::string(q) : std::string(q) + axes[i]);
  std::vector<std::vector<double>> rows;
  const auto& samples = sol.trajectory.samples;
  for (std::size_t i = 0; i < samples.size(); i += cfg.outputs.stride) {
    const auto& s = samples[i];
    std::vector<double> row{s.t};
    const Vec<N> w = sol.law.w(s.t);
    for (int j = 0; j < N; ++j) row.push_back(w(j));
    for (int j = 0; j < N; ++j) row.push_back(s.u(j));
    rows.push_back(std::move(row));
  }
  if ((samples.size() - 1) % cfg.outputs.stride != 0) {
    const auto& s = samples.back();
    std::vector<double> row{s.t};
    const Vec<N> w = sol.law.w(s.t);
    for (int j = 0; j < N; ++j) row.push_back(w(j));
    for (int j = 0; j < N; ++j) row.push_back(s.u(j));
    rows.push_back(std::move(row));
  }
  const auto schedule = detail::output_path(opts, cfg.outputs.schedule_csv);
  write_csv(schedule, header, rows);
  report["csv"] = csv.string();
  report["schedule_csv"] = schedule.string();
  if (opts.gnuplot_script) {
    write_gnuplot_script(std::filesystem::path(csv).replace_extension(".gp"), csv.filename().string(),
                         trajectory_header<N>(), 1, detail::state_columns<N>());
    std::vector<int> cols;
    for (int i = 0; i < 2 * N; ++i) cols.push_back(2 + i);
    write_gnuplot_script(std::filesystem::path(schedule).replace_extension(".gp"),
                         schedule.filename().string(), header, 1, cols);
  }
  write_json(json_path, report);
  if (!sol.within_tolerance) {
    err << "error: endpoint error " << sol.endpoint_error << " exceeds the steering tolerance\n";
    return kExitSimulation;
  }
  return kExitOk;
}

template <int N>
int run_compare(const ScenarioConfig& cfg, const CommandOptions& opts, std::ostream& err) {
  StateFeedbackGain<N> gain;
  StudyOptions so;
  try {
    if (!cfg.compare) throw ConfigError("compare needs a 'compare' section");
    if (cfg.controller.kind != ControllerKind::state_feedback)
      throw ConfigError("compare needs controller.kind: state_feedback");
    if (cfg.integrator.method != Method::rk4)
      throw ConfigError("compare pairs samples on the fixed-step grid; set integrator.method: rk4");
    const Scenario<N> sc = build_scenario<N>(cfg);
    gain = std::get<StateFeedbackLaw<N>>(sc.law.kind).gain;
    so.t_end = cfg.compare->t_end.value_or(cfg.integrator.t_end);
    so.integrator = cfg.integrator;
    so.direction = Vec3(cfg.compare->direction[0], cfg.compare->direction[1], cfg.compare->direction[2]);
    so.settle_band = cfg.compare->settle_band;
    so.threads = resolve_threads();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  const PhysConsts k = cfg.consts();
  const auto start = std::chrono::steady_clock::now();
  std::vector<MismatchRow> rows;
  try {
    rows = newtonian_mismatch_study<N>(gain, cfg.compare->regimes, k, so, cfg.tolerances);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  const std::vector<std::string> header{
      "v_over_c",          "ok",
      "mismatch",          "wrapped_fit_residual",
      "unwrapped_fit_residual", "wrapped_final_error",
      "unwrapped_final_error",  "tracking_error_delta",
      "wrapped_settling_time",  "unwrapped_settling_time",
      "settling_time_delta",    "wrapped_first_u",
      "unwrapped_first_u",      "wrapped_peak_speed_over_c",
      "unwrapped_peak_speed_over_c"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> table;
  json cells = json::array();
  bool all_ok = true;
  for (const auto& r : rows) {
    all_ok = all_ok && r.ok;
    if (r.ok) {
      table.push_back({r.v_over_c, 1.0, r.mismatch, r.wrapped_fit_residual, r.unwrapped_fit_residual,
                       r.wrapped_final_error, r.unwrapped_final_error, r.tracking_error_delta,
                       r.wrapped_settling_time, r.unwrapped_settling_time, r.settling_time_delta,
                       r.wrapped_first_u, r.unwrapped_first_u, r.wrapped_peak_speed, r.unwrapped_peak_speed});
    } else {
      std::vector<double> row(header.size(), nan);
      row[0] = r.v_over_c;
      row[1] = 0.0;
      table.push_back(row);
    }
    json cell{{"v_over_c", r.v_over_c}, {"ok", r.ok}};
    if (r.ok) {
      cell["mismatch"] = r.mismatch;
      cell["wrapped_fit_residual"] = r.wrapped_fit_residual;
      cell["unwrapped_fit_residual"] = r.unwrapped_fit_residual;
      cell["tracking_error_delta"] = r.tracking_error_delta;
      cell["wrapped_settling_time"] = finite_or_null(r.wrapped_settling_time);
      cell["unwrapped_settling_time"] = finite_or_null(r.unwrapped_settling_time);
      cell["settling_time_delta"] = finite_or_null(r.settling_time_delta);
    } else {
      cell["error"] = r.error;
    }
    cells.push_back(cell);
  }

  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].ok && rows[i - 1].ok && rows[i].v_over_c > rows[i - 1].v_over_c)
      monotone = monotone && rows[i].mismatch > rows[i - 1].mismatch;

  const auto table_path = detail::output_path(opts, cfg.outputs.table_csv);
  write_csv(table_path, header, table);
  if (opts.gnuplot_script)
    write_gnuplot_script(std::filesystem::path(table_path).replace_extension(".gp"),
                         table_path.filename().string(), header, 1, {3}, true);
  json report{{"command", "compare"},
              {"truncated", !all_ok},
              {"threads", so.threads},
              {"wall_time_s", detail::seconds_since(start)},
              {"regimes", cells},
              {"mismatch_increasing", monotone},
              {"table_csv", table_path.string()},
              {"config", to_json(cfg)}};
  write_json(detail::output_path(opts, cfg.outputs.json), report);
  if (!all_ok) {
    for (const auto& r : rows)
      if (!r.ok) err << "error: regime v/c = " << r.v_over_c << ": " << r.error << '\n';
    return kExitSimulation;
  }
  return kExitOk;
}

template <int N>
void validate_sections(const ScenarioConfig& cfg) {
  build_scenario<N>(cfg);
  if (cfg.steering)
    SteeringProblem<N>::create(detail::to_state<N>(cfg.steering->initial),
                               detail::to_state<N>(cfg.steering->target), cfg.steering->horizon,
                               cfg.consts(), cfg.tolerances);
  if (cfg.compare && cfg.controller.kind != ControllerKind::state_feedback)
    throw ConfigError("compare needs controller.kind: state_feedback");
}

namespace detail {

template <class Run>
int dispatch(const std::string& config_path, std::ostream& err, Run&& run) {
  ScenarioConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    return cfg.plant.dim == 1 ? run(std::integral_constant<int, 1>{}, cfg)
                              : run(std::integral_constant<int, 3>{}, cfg);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace detail

inline int cmd_simulate(const std::string& config_path, const CommandOptions& opts, std::ostream& err) {
  return detail::dispatch(config_path, err, [&](auto dim, const ScenarioConfig& cfg) {
    return run_simulate<decltype(dim)::value>(cfg, opts, err);
  });
}

inline int cmd_steer(const std::string& config_path, const CommandOptions& opts, std::ostream& err) {
  return detail::dispatch(config_path, err, [&](auto dim, const ScenarioConfig& cfg) {
    return run_steer<decltype(dim)::value>(cfg, opts, err);
  });
}

inline int cmd_compare(const std::string& config_path, const CommandOptions& opts, std::ostream& err) {
  return detail::dispatch(config_path, err, [&](auto dim, const ScenarioConfig& cfg) {
    return run_compare<decltype(dim)::value>(cfg, opts, err);
  });
}

inline int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return detail::dispatch(config_path, err, [&](auto dim, const ScenarioConfig& cfg) {
    try {
      validate_sections<decltype(dim)::value>(cfg);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return static_cast<int>(kExitValidation);
    }
    out << "ok: " << config_path << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace relkit::cli
