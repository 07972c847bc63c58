#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "relkit/control.hpp"
#include "relkit/core.hpp"
#include "relkit/dynamics.hpp"
#include "relkit/linearize.hpp"
#include "relkit/sim.hpp"

namespace relkit {

template <int N>
using SquareMat = Eigen::Matrix<double, 2 * N, 2 * N>;

template <int N>
using Stacked = Eigen::Matrix<double, 2 * N, 1>;

/// e^{A t} of the double integrator: [[I, t I], [0, I]].
template <int N>
SquareMat<N> double_integrator_transition(double t) {
  SquareMat<N> out = SquareMat<N>::Identity();
  out.template topRightCorner<N, N>() = t * Eigen::Matrix<double, N, N>::Identity();
  return out;
}

/// Controllability Gramian of the linearized plant over [0, T]:
/// b^2 [[T^3/3 I, T^2/2 I], [T^2/2 I, T I]] with b the input gain of B.
template <int N>
SquareMat<N> gramian(double horizon, const PhysConsts& consts) {
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  const double b = linearized_model<N>(consts).input_gain();
  const auto eye = Eigen::Matrix<double, N, N>::Identity();
  const double T = horizon;
  SquareMat<N> w;
  w.template topLeftCorner<N, N>() = (T * T * T / 3.0) * eye;
  w.template topRightCorner<N, N>() = (T * T / 2.0) * eye;
  w.template bottomLeftCorner<N, N>() = (T * T / 2.0) * eye;
  w.template bottomRightCorner<N, N>() = T * eye;
  return (b * b) * w;
}

template <int N>
struct SteeringProblem {
  State<N> x0;
  State<N> xT;
  double horizon = 1.0;

  /// Rejects endpoints at or beyond the speed of light: such states are not reachable.
  static SteeringProblem create(const State<N>& x0, const State<N>& xT, double horizon,
                                const PhysConsts& consts, const Tolerances& tol = {}) {
    for (const State<N>* x : {&x0, &xT}) {
      if (!x->p.allFinite() || !x->v.allFinite()) throw InvalidArgument("endpoints must be finite");
      if (!(x->v.norm() < consts.c * (1.0 - tol.eps_v))) throw UnreachableState();
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be positive");
    return SteeringProblem{x0, xT, horizon};
  }
};

/// Minimum-energy virtual input w(t) = B^T e^{A^T (T - t)} W(T)^{-1} (xT - e^{AT} x0).
template <int N>
struct MinEnergyLaw {
  double horizon = 0.0;
  double b = 1.0;
  Stacked<N> costate = Stacked<N>::Zero();
  State<N> x0;

  static MinEnergyLaw solve(const State<N>& x0, const State<N>& xT, double horizon,
                            const PhysConsts& consts) {
    MinEnergyLaw law;
    law.horizon = horizon;
    law.b = linearized_model<N>(consts).input_gain();
    law.x0 = x0;
    const Stacked<N> drift = double_integrator_transition<N>(horizon) * x0.stacked();
    const Stacked<N> gap = xT.stacked() - drift;
    // Closed-form W^{-1} = 12 / (b^2 T^4) [[T I, -T^2/2 I], [-T^2/2 I, T^3/3 I]].
    const double T = horizon;
    const double scale = 12.0 / (law.b * law.b * T * T * T * T);
    const Vec<N> gp = gap.template head<N>();
    const Vec<N> gv = gap.template tail<N>();
    law.costate.template head<N>() = scale * (T * gp - (0.5 * T * T) * gv);
    law.costate.template tail<N>() = scale * (-(0.5 * T * T) * gp + (T * T * T / 3.0) * gv);
    return law;
  }

  Vec<N> w(double t) const {
    const Vec<N> lp = costate.template head<N>();
    const Vec<N> lv = costate.template tail<N>();
    return b * ((horizon - t) * lp + lv);
  }

  /// State of the linear plant under this schedule (closed-form cubic in t).
  State<N> predicted(double t) const {
    const Vec<N> alpha = w(0.0);
    const Vec<N> beta = -b * costate.template head<N>();
    State<N> x;
    x.v = x0.v + b * (alpha * t + beta * (0.5 * t * t));
    x.p = x0.p + x0.v * t + b * (alpha * (0.5 * t * t) + beta * (t * t * t / 6.0));
    return x;
  }

  /// |w| is the norm of an affine function, so its maximum sits at an endpoint.
  double peak_w() const { return std::max(w(0.0).norm(), w(horizon).norm()); }

  double predicted_peak_speed(int points = 4096) const {
    double peak = 0.0;
    for (int i = 0; i <= points; ++i)
      peak = std::max(peak, predicted(horizon * i / points).v.norm());
    return peak;
  }
};

struct SteeringOptions {
  double speed_margin = 0.95;  // fraction of c that triggers horizon doubling
  int max_doublings = 20;
  std::size_t steps_per_horizon = 4000;
  double tolerance = 1e-6;  // endpoint error relative to 1 + |xT|
};

template <int N>
struct SteeringSolution {
  MinEnergyLaw<N> law;
  double horizon = 0.0;
  int doublings = 0;
  Trajectory<N> trajectory;  // realized relativistic run; u and w columns are the schedules
  State<N> achieved;
  double endpoint_error = 0.0;
  bool within_tolerance = false;
  double peak_speed = 0.0;
  double predicted_peak_speed = 0.0;
  std::vector<double> peak_w_by_horizon;
  bool horizon_relief_violated = false;  // a doubling increased the peak |w|
};

/// Designs w on the linearized plant, wraps it through u_from_w along the realized relativistic
/// trajectory, and doubles the horizon while the predicted speed reaches speed_margin * c.
template <int N>
SteeringSolution<N> min_energy_steer(const SteeringProblem<N>& prob, const PhysConsts& consts,
                                     const SteeringOptions& opts = {}, const Tolerances& tol = {}) {
  SteeringSolution<N> sol;
  double horizon = prob.horizon;
  bool feasible = false;
  for (int d = 0; d <= opts.max_doublings; ++d) {
    sol.law = MinEnergyLaw<N>::solve(prob.x0, prob.xT, horizon, consts);
    const double peak_w = sol.law.peak_w();
    if (!sol.peak_w_by_horizon.empty() && peak_w > sol.peak_w_by_horizon.back() * (1.0 + tol.eps_num))
      sol.horizon_relief_violated = true;
    sol.peak_w_by_horizon.push_back(peak_w);
    sol.predicted_peak_speed = sol.law.predicted_peak_speed();
    sol.doublings = d;
    if (sol.predicted_peak_speed < opts.speed_margin * consts.c) {
      feasible = true;
      break;
    }
    horizon *= 2.0;
  }
  if (!feasible)
    throw HorizonExhausted("steering needs speeds above " + std::to_string(opts.speed_margin) +
                           "c even after " + std::to_string(opts.max_doublings) + " doublings");
  sol.horizon = horizon;

  const PlantModel<N> plant{consts, Flavor::relativistic};
  ControlLaw<N> law{OpenLoopVirtual<N>{[w = sol.law](double t) { return w.w(t); }}};
  IntegratorCfg cfg;
  cfg.method = Method::rk4;
  cfg.t_end = horizon;
  cfg.dt = horizon / static_cast<double>(opts.steps_per_horizon);
  sol.trajectory = integrate_closed_loop<N>(plant, law, Reference<N>::constant(prob.xT.p), cfg, prob.x0, tol);
  sol.achieved = sol.trajectory.back().x;
  sol.endpoint_error = (sol.achieved.stacked() - prob.xT.stacked()).norm();
  sol.within_tolerance = sol.endpoint_error <= opts.tolerance * (1.0 + prob.xT.stacked().norm());
  for (const auto& s : sol.trajectory.samples) sol.peak_speed = std::max(sol.peak_speed, s.x.v.norm());
  return sol;
}

/// State of the linear loop x' = (A - B K) x from x0, by matrix exponential.
template <int N>
State<N> linear_closed_loop_state(const StateFeedbackGain<N>& gain, const PhysConsts& consts,
                                  const State<N>& x0, double t) {
  const LinearPlant<N> lin = linearized_model<N>(consts);
  const SquareMat<N> acl = lin.A - lin.B * gain.K;
  const SquareMat<N> phi = (acl * t).exp();
  return State<N>::from_stacked(phi * x0.stacked());
}

/// Largest deviation between a trajectory and a reference state history (indexed like the
/// trajectory samples), normalised per block by
/// the peak magnitude of the reference history: max(|dp|/max|p|, |dv|/max|v|).
template <int N, class RefState>
double relative_deviation(const Trajectory<N>& traj, RefState&& reference_state) {
  double dp = 0.0, dv = 0.0, pmax = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const Sample<N>& s = traj.samples[i];
    const State<N> r = reference_state(s, i);
    dp = std::max(dp, (s.x.p - r.p).norm());
    dv = std::max(dv, (s.x.v - r.v).norm());
    pmax = std::max(pmax, r.p.norm());
    vmax = std::max(vmax, r.v.norm());
  }
  const double rp = pmax > 0.0 ? dp / pmax : dp;
  const double rv = vmax > 0.0 ? dv / vmax : dv;
  return std::max(rp, rv);
}

/// First time after which |e| stays within band * max|e|; +inf if the final sample is outside.
template <int N>
double settling_time(const Trajectory<N>& traj, double band = 0.02) {
  double peak = 0.0;
  for (const auto& s : traj.samples) peak = std::max(peak, s.e.norm());
  if (peak == 0.0) return 0.0;
  const double limit = band * peak;
  const auto& samples = traj.samples;
  if (samples.back().e.norm() > limit) return std::numeric_limits<double>::infinity();
  for (std::size_t i = samples.size(); i-- > 0;)
    if (samples[i].e.norm() > limit) return samples[std::min(i + 1, samples.size() - 1)].t;
  return samples.front().t;
}

struct StudyOptions {
  double t_end = 10.0;
  IntegratorCfg integrator{};  // t_end is overwritten from the field above
  Vec3 direction = Vec3::UnitX();  // initial velocity direction in 3D
  unsigned threads = 1;
  double settle_band = 0.02;
};

struct MismatchRow {
  double v_over_c = 0.0;
  bool ok = false;
  std::string error;
  double mismatch = 0.0;  // unwrapped vs wrapped, relative
  double wrapped_fit_residual = 0.0;  // wrapped vs analytic design loop
  double unwrapped_fit_residual = 0.0;
  double wrapped_final_error = 0.0;
  double unwrapped_final_error = 0.0;
  double tracking_error_delta = 0.0;  // max_t | |e_unwrapped| - |e_wrapped| |
  double wrapped_settling_time = 0.0;
  double unwrapped_settling_time = 0.0;
  double settling_time_delta = 0.0;
  double wrapped_first_u = 0.0;
  double unwrapped_first_u = 0.0;
  double wrapped_peak_speed = 0.0;
  double unwrapped_peak_speed = 0.0;
};

/// For each speed scale s, starts the relativistic plant at rest position with speed s*c and
/// regulates it to the origin twice: with the Newtonian (unwrapped) law and with the wrapped
/// relativistic law. Rows come back in input order; failed cells carry ok == false.
template <int N>
std::vector<MismatchRow> newtonian_mismatch_study(const StateFeedbackGain<N>& gain,
                                                  std::span<const double> v_scales,
                                                  const PhysConsts& consts,
                                                  const StudyOptions& opts = {},
                                                  const Tolerances& tol = {}) {
  if (v_scales.empty()) throw InvalidArgument("mismatch study needs at least one speed regime");
  for (double s : v_scales)
    if (!(s > 0.0 && s < 1.0)) throw InvalidArgument("speed regimes must lie in (0, 1)");
  if (!(opts.t_end > 0.0)) throw InvalidArgument("study horizon must be positive");
  if (opts.integrator.method != Method::rk4)
    throw InvalidArgument("the comparison pairs samples by index and needs the fixed-step rk4 grid");

  Vec<N> dir;
  if constexpr (N == 1)
    dir = vec1(1.0);
  else
    dir = opts.direction.normalized();

  IntegratorCfg cfg = opts.integrator;
  cfg.t_end = opts.t_end;
  const PlantModel<N> plant{consts, Flavor::relativistic};

  const auto run_cell = [&](double scale) {
    MismatchRow row;
    row.v_over_c = scale;
    try {
      State<N> x0;
      x0.v = scale * consts.c * dir;
      ControlLaw<N> wrapped{StateFeedbackLaw<N>{gain}};
      ControlLaw<N> unwrapped = wrapped;
      unwrapped.wrapped = false;
      const auto tw = integrate_closed_loop<N>(plant, wrapped, Reference<N>{}, cfg, x0, tol);
      const auto tu = integrate_closed_loop<N>(plant, unwrapped, Reference<N>{}, cfg, x0, tol);
      const auto design = [&](const Sample<N>& s, std::size_t) {
        return linear_closed_loop_state<N>(gain, consts, x0, s.t);
      };
      // Both runs share the fixed-step grid, so samples pair up by index.
      row.mismatch = relative_deviation<N>(
          tu, [&](const Sample<N>&, std::size_t i) { return tw.samples[i].x; });
      row.wrapped_fit_residual = relative_deviation<N>(tw, design);
      row.unwrapped_fit_residual = relative_deviation<N>(tu, design);
      row.wrapped_final_error = tw.back().e.norm();
      row.unwrapped_final_error = tu.back().e.norm();
      for (std::size_t i = 0; i < tw.samples.size(); ++i)
        row.tracking_error_delta =
            std::max(row.tracking_error_delta,
                     std::abs(tu.samples[i].e.norm() - tw.samples[i].e.norm()));
      row.wrapped_settling_time = settling_time<N>(tw, opts.settle_band);
      row.unwrapped_settling_time = settling_time<N>(tu, opts.settle_band);
      row.settling_time_delta = row.unwrapped_settling_time - row.wrapped_settling_time;
      row.wrapped_first_u = tw.samples.front().u.norm();
      row.unwrapped_first_u = tu.samples.front().u.norm();
      for (const auto& s : tw.samples) row.wrapped_peak_speed = std::max(row.wrapped_peak_speed, s.x.v.norm() / consts.c);
      for (const auto& s : tu.samples) row.unwrapped_peak_speed = std::max(row.unwrapped_peak_speed, s.x.v.norm() / consts.c);
      row.ok = true;
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    return row;
  };

  std::vector<MismatchRow> rows(v_scales.size());
  const unsigned workers =
      std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(v_scales.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < v_scales.size(); ++i) rows[i] = run_cell(v_scales[i]);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < v_scales.size(); i = next++) rows[i] = run_cell(v_scales[i]);
    });
  for (auto& t : pool) t.join();
  return rows;
}

}  // namespace relkit
