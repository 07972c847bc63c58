#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "relkit/control.hpp"
#include "relkit/core.hpp"
#include "relkit/dynamics.hpp"
#include "relkit/linearize.hpp"

namespace relkit {

enum class Method { rk4, rk45 };

struct IntegratorCfg {
  Method method = Method::rk4;
  double dt = 1e-3;  // fixed step for rk4, initial step hint for rk45
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double t_end = 1.0;
  std::size_t max_steps = 50'000'000;  // step attempts, rejected ones included

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidArgument("t_end must be positive");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
    if (max_steps == 0) throw InvalidArgument("max_steps must be positive");
  }
};

template <int N>
struct Sample {
  double t = 0.0;
  State<N> x;
  Vec<N> u = Vec<N>::Zero();  // applied force
  Vec<N> w = Vec<N>::Zero();  // virtual input the linear model sees
  double gamma = 1.0;
  double energy = 0.0;
  Vec<N> e = Vec<N>::Zero();  // r - p
};

template <int N>
struct Trajectory {
  std::vector<Sample<N>> samples;
  std::size_t steps = 0;
  std::size_t rejected = 0;

  const Sample<N>& back() const { return samples.back(); }
};

/// Piecewise-constant reference in the controller frame. Segment i holds from its start time
/// until the next segment begins; times before the first start use the first value.
template <int N>
struct Reference {
  std::vector<std::pair<double, Vec<N>>> segments{{0.0, Vec<N>::Zero()}};

  static Reference constant(const Vec<N>& value) { return Reference{{{0.0, value}}}; }

  Vec<N> at(double t) const {
    const Vec<N>* value = &segments.front().second;
    for (const auto& [start, v] : segments) {
      if (start <= t)
        value = &v;
      else
        break;
    }
    return *value;
  }

  void validate() const {
    if (segments.empty()) throw InvalidArgument("reference needs at least one segment");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!std::isfinite(segments[i].first) || !segments[i].second.allFinite())
        throw InvalidArgument("reference must be finite");
      if (i > 0 && !(segments[i].first > segments[i - 1].first))
        throw InvalidArgument("reference segment times must be strictly increasing");
    }
  }
};

enum class FailureCause { speed_bound, step_count, non_finite };

inline const char* to_string(FailureCause cause) {
  switch (cause) {
    case FailureCause::speed_bound: return "SpeedBoundViolation";
    case FailureCause::step_count: return "StepCountExceeded";
    case FailureCause::non_finite: return "NonFiniteState";
  }
  return "unknown";
}

class SimulationError : public Error {
 public:
  SimulationError(FailureCause cause, const std::string& what)
      : Error(std::string(to_string(cause)) + ": " + what), cause_(cause) {}
  FailureCause cause() const noexcept { return cause_; }

 private:
  FailureCause cause_;
};

/// Aborted integration; carries every sample accepted before the failure.
template <int N>
class IntegrationFailure : public SimulationError {
 public:
  IntegrationFailure(FailureCause cause, const std::string& what, Trajectory<N> partial)
      : SimulationError(cause, what), partial_(std::move(partial)) {}
  const Trajectory<N>& partial() const noexcept { return partial_; }

 private:
  Trajectory<N> partial_;
};

namespace detail {

template <int M>
using Vector = Eigen::Matrix<double, M, 1>;

template <int M, class F>
Vector<M> rk4_step(F&& f, double t, const Vector<M>& z, double h) {
  const Vector<M> k1 = f(t, z);
  const Vector<M> k2 = f(t + 0.5 * h, Vector<M>(z + (0.5 * h) * k1));
  const Vector<M> k3 = f(t + 0.5 * h, Vector<M>(z + (0.5 * h) * k2));
  const Vector<M> k4 = f(t + h, Vector<M>(z + h * k3));
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Dormand-Prince 5(4): fifth-order solution plus the embedded error estimate.
template <int M, class F>
std::pair<Vector<M>, Vector<M>> dopri5_step(F&& f, double t, const Vector<M>& z, double h) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const Vector<M> k1 = f(t, z);
  const Vector<M> k2 = f(t + c2 * h, Vector<M>(z + h * (a21 * k1)));
  const Vector<M> k3 = f(t + c3 * h, Vector<M>(z + h * (a31 * k1 + a32 * k2)));
  const Vector<M> k4 = f(t + c4 * h, Vector<M>(z + h * (a41 * k1 + a42 * k2 + a43 * k3)));
  const Vector<M> k5 =
      f(t + c5 * h, Vector<M>(z + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
  const Vector<M> k6 =
      f(t + h, Vector<M>(z + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
  const Vector<M> next = z + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const Vector<M> k7 = f(t + h, next);
  const Vector<M> err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  return {next, err};
}

/// Steps state z from t0 to t1 with the configured method, calling accept(t, z) after every
/// accepted step. `valid(z)` rejects states outside the admissible set. Stage evaluations that
/// throw SpeedBoundViolation abort rk4 and shrink the step for rk45.
class Stepper {
 public:
  explicit Stepper(const IntegratorCfg& cfg) : cfg_(cfg), h_(cfg.dt) {}

  std::size_t attempts() const { return attempts_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t rejected() const { return attempts_ - accepted_; }

  template <int M, class F, class Valid, class Accept, class Fail>
  void advance(F&& f, double t0, double t1, Vector<M>& z, Valid&& valid, Accept&& accept,
               Fail&& fail) {
    if (cfg_.method == Method::rk4)
      advance_rk4<M>(f, t0, t1, z, valid, accept, fail);
    else
      advance_rk45<M>(f, t0, t1, z, valid, accept, fail);
  }

 private:
  bool count_attempt() { return ++attempts_ <= cfg_.max_steps; }

  template <int M, class F, class Valid, class Accept, class Fail>
  void advance_rk4(F& f, double t0, double t1, Vector<M>& z, Valid& valid, Accept& accept,
                   Fail& fail) {
    const double span = t1 - t0;
    const auto n = static_cast<std::size_t>(
        std::max(1.0, std::ceil(span / cfg_.dt * (1.0 - 1e-12))));
    const double h = span / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (!count_attempt()) fail(FailureCause::step_count, "max_steps exceeded");
      const double t = t0 + static_cast<double>(k) * h;
      const double t_next = (k + 1 == n) ? t1 : t0 + static_cast<double>(k + 1) * h;
      Vector<M> next;
      try {
        next = rk4_step<M>(f, t, z, t_next - t);
      } catch (const SpeedBoundViolation& e) {
        fail(FailureCause::speed_bound, e.what());
      }
      if (!next.allFinite()) fail(FailureCause::non_finite, "state became non-finite");
      if (!valid(next)) fail(FailureCause::speed_bound, "step crossed the speed guard");
      z = next;
      ++accepted_;
      accept(t_next, z);
    }
  }

  template <int M>
  double error_norm(const Vector<M>& z, const Vector<M>& next, const Vector<M>& err) const {
    const Vector<M> scale =
        (cfg_.abs_tol + cfg_.rel_tol * z.cwiseAbs().cwiseMax(next.cwiseAbs()).array()).matrix();
    return std::sqrt((err.cwiseQuotient(scale)).squaredNorm() / M);
  }

  template <int M, class F, class Valid, class Accept, class Fail>
  void advance_rk45(F& f, double t0, double t1, Vector<M>& z, Valid& valid, Accept& accept,
                    Fail& fail) {
    double t = t0;
    const double min_step = 1e-14 * std::max(1.0, std::abs(t1));
    while (t < t1) {
      double h = std::min(h_, t1 - t);
      const bool last = (h >= t1 - t);
      if (!count_attempt()) fail(FailureCause::step_count, "max_steps exceeded");
      bool ok = true;
      Vector<M> next, err;
      try {
        std::tie(next, err) = dopri5_step<M>(f, t, z, h);
        ok = next.allFinite() && err.allFinite() && valid(next);
      } catch (const SpeedBoundViolation&) {
        ok = false;
      }
      if (!ok) {
        h_ = 0.5 * h;
        if (h_ < min_step) fail(FailureCause::speed_bound, "step size underflow at the speed guard");
        continue;
      }
      const double norm = error_norm<M>(z, next, err);
      if (norm > 1.0) {
        h_ = h * std::max(0.2, 0.9 * std::pow(norm, -0.2));
        if (h_ < min_step) fail(FailureCause::non_finite, "step size underflow");
        continue;
      }
      t = last ? t1 : t + h;
      z = next;
      ++accepted_;
      accept(t, z);
      const double grow = norm == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(norm, -0.2));
      // Keep the unclipped step so short final segments do not shrink the next hold interval.
      h_ = std::max(h_, h) * std::max(0.2, grow);
      if (last) break;
    }
  }

  IntegratorCfg cfg_;
  double h_;
  std::size_t attempts_ = 0;
  std::size_t accepted_ = 0;
};

template <int N>
class ClosedLoop {
 public:
  static constexpr int M = 3 * N;  // [p; v; integral of e]
  using Z = Vector<M>;

  ClosedLoop(const PlantModel<N>& plant, const ControlLaw<N>& law, const Reference<N>& ref,
             const Tolerances& tol)
      : plant_(plant), law_(law), ref_(ref), tol_(tol) {}

  static State<N> state_of(const Z& z) {
    return State<N>{z.template head<N>(), z.template segment<N>(N)};
  }

  Vec<N> continuous_force(double t, const Z& z) const {
    const State<N> x = state_of(z);
    Measurement<N> m;
    m.t = t;
    m.y = x.p;
    m.y_dot = x.v;
    m.r = ref_.at(t);
    m.integral = z.template tail<N>();
    return saturate<N>(evaluate_law<N>(law_, m, plant_.consts, tol_), law_.force_limit);
  }

  Z derivative(double t, const Z& z, const Vec<N>& u) const {
    const State<N> x = state_of(z);
    const StateDot<N> dx = plant_.rhs(x, u, tol_);
    Z dz;
    dz.template head<N>() = dx.p;
    dz.template segment<N>(N) = dx.v;
    dz.template tail<N>().setZero();
    if (law_.is_pid()) {
      const auto& gains = std::get<PidLaw<N>>(law_.kind).gains;
      const Vec<N> e = ref_.at(t) - x.p;
      const Vec<N> integral = z.template tail<N>();
      for (int i = 0; i < N; ++i) {
        const bool held = gains.integral_limit && std::abs(integral(i)) >= *gains.integral_limit &&
                          e(i) * integral(i) > 0.0;
        dz(2 * N + i) = held ? 0.0 : e(i);
      }
    }
    return dz;
  }

  bool admissible(const Z& z) const {
    if (plant_.flavor == Flavor::newtonian) return true;
    return z.template segment<N>(N).norm() < plant_.consts.c * (1.0 - tol_.eps_v);
  }

  Sample<N> sample(double t, const Z& z, const Vec<N>& u) const {
    Sample<N> s;
    s.t = t;
    s.x = state_of(z);
    s.u = u;
    const PhysConsts& k = plant_.consts;
    if (plant_.flavor == Flavor::relativistic) {
      s.w = w_from_u<N>(s.x, u, k, tol_);
      s.gamma = lorentz_gamma<N>(s.x.v, k, tol_);
    } else {
      s.w = newtonian_w_from_u<N>(u, k);
      const double beta2 = s.x.v.squaredNorm() / (k.c * k.c);
      s.gamma = beta2 < 1.0 ? 1.0 / std::sqrt(1.0 - beta2)
                            : std::numeric_limits<double>::infinity();
    }
    s.energy = plant_.energy(s.x.v, tol_);
    s.e = ref_.at(t) - s.x.p;
    return s;
  }

  const PlantModel<N>& plant() const { return plant_; }
  const ControlLaw<N>& law() const { return law_; }
  const Reference<N>& reference() const { return ref_; }
  const Tolerances& tolerances() const { return tol_; }

 private:
  PlantModel<N> plant_;
  ControlLaw<N> law_;
  Reference<N> ref_;
  Tolerances tol_;
};

}  // namespace detail

/// Integrates plant + controller from x0 over [0, cfg.t_end]. The controller is evaluated at
/// every Runge-Kutta stage unless law.zoh_dt requests sample-and-hold control.
template <int N>
Trajectory<N> integrate_closed_loop(const PlantModel<N>& plant, const ControlLaw<N>& law,
                                    const Reference<N>& ref, const IntegratorCfg& cfg,
                                    const State<N>& x0, const Tolerances& tol = {}) {
  cfg.validate();
  ref.validate();
  if (law.zoh_dt && !(*law.zoh_dt > 0.0)) throw InvalidArgument("zoh_dt must be positive");
  if (law.derivative_source == DerivativeSource::backward_difference && !law.zoh_dt)
    throw InvalidArgument("backward-difference derivatives require sampled (zoh) control");
  if (law.force_limit && !(*law.force_limit > 0.0))
    throw InvalidArgument("force limit must be positive");
  if (!x0.p.allFinite() || !x0.v.allFinite()) throw InvalidArgument("initial state must be finite");
  if (plant.flavor == Flavor::relativistic) check_speed<N>(x0.v, plant.consts, tol);

  using Loop = detail::ClosedLoop<N>;
  using Z = typename Loop::Z;
  const Loop loop(plant, law, ref, tol);

  Trajectory<N> traj;
  detail::Stepper stepper(cfg);
  const auto fail = [&](FailureCause cause, const std::string& what) {
    traj.steps = stepper.accepted();
    traj.rejected = stepper.rejected();
    throw IntegrationFailure<N>(cause, what, traj);
  };
  const auto record = [&](double t, const Z& z, const Vec<N>& u) {
    Sample<N> s;
    try {
      s = loop.sample(t, z, u);
    } catch (const SpeedBoundViolation& e) {
      fail(FailureCause::speed_bound, e.what());
    }
    if (!s.u.allFinite() || !s.w.allFinite()) fail(FailureCause::non_finite, "control became non-finite");
    traj.samples.push_back(s);
  };
  const auto valid = [&](const Z& z) { return loop.admissible(z); };

  Z z;
  z << x0.p, x0.v, Vec<N>::Zero();

  if (!law.zoh_dt) {
    const auto f = [&](double t, const Z& s) { return loop.derivative(t, s, loop.continuous_force(t, s)); };
    const auto control_at = [&](double t, const Z& s) {
      try {
        return loop.continuous_force(t, s);
      } catch (const SpeedBoundViolation& e) {
        fail(FailureCause::speed_bound, e.what());
      }
      return Vec<N>(Vec<N>::Zero());
    };
    record(0.0, z, control_at(0.0, z));
    stepper.advance<Loop::M>(
        f, 0.0, cfg.t_end, z, valid, [&](double t, const Z& s) { record(t, s, control_at(t, s)); },
        fail);
  } else {
    // Sample-and-hold: u is computed at t_k = k * zoh_dt and held until t_{k+1}.
    const double hold = *law.zoh_dt;
    PidState<N> pid;
    Vec<N> prev_y = x0.p;
    Vec<N> u = Vec<N>::Zero();
    for (std::size_t k = 0;; ++k) {
      const double t_k = static_cast<double>(k) * hold;
      if (t_k >= cfg.t_end * (1.0 - 1e-12)) break;
      const double t_next = std::min(cfg.t_end, static_cast<double>(k + 1) * hold);
      const State<N> x = Loop::state_of(z);
      Vec<N> y_dot = x.v;
      if (law.derivative_source == DerivativeSource::backward_difference)
        y_dot = k == 0 ? Vec<N>(Vec<N>::Zero()) : Vec<N>((x.p - prev_y) / hold);
      prev_y = x.p;
      try {
        if (law.is_pid()) {
          const auto& gains = std::get<PidLaw<N>>(law.kind).gains;
          const Vec<N> e = ref.at(t_k) - x.p;
          if (law.wrapped) {
            const PidOutput<N> out = relativistic_pid_step<N>(e, -y_dot, gains, pid, hold, plant.consts, tol);
            pid = out.state;
            u = out.u;
          } else {
            pid = detail::advance_pid<N>(e, gains, pid, hold);
            u = newtonian_u_from_w<N>(pid_virtual_input<N>(e, pid.integral, -y_dot, gains), plant.consts);
          }
        } else {
          Measurement<N> m;
          m.t = t_k;
          m.y = x.p;
          m.y_dot = y_dot;
          m.r = ref.at(t_k);
          u = evaluate_law<N>(law, m, plant.consts, tol);
        }
      } catch (const SpeedBoundViolation& e) {
        fail(FailureCause::speed_bound, e.what());
      }
      u = saturate<N>(u, law.force_limit);
      if (k == 0) record(0.0, z, u);
      const auto f = [&](double t, const Z& s) { return loop.derivative(t, s, u); };
      stepper.advance<Loop::M>(f, t_k, t_next, z, valid,
                               [&](double t, const Z& s) { record(t, s, u); }, fail);
    }
  }
  traj.steps = stepper.accepted();
  traj.rejected = stepper.rejected();
  return traj;
}

/// Open-loop integration under a prescribed force schedule.
template <int N>
Trajectory<N> integrate_open_loop(const PlantModel<N>& plant,
                                  std::function<Vec<N>(double)> force_schedule,
                                  const IntegratorCfg& cfg, const State<N>& x0,
                                  const Tolerances& tol = {}) {
  ControlLaw<N> law{OpenLoopForce<N>{std::move(force_schedule)}};
  return integrate_closed_loop<N>(plant, law, Reference<N>{}, cfg, x0, tol);
}

/// Largest work-energy residual |dE - integral(F.v dt)| / max(1, |dE|) over the cumulative
/// checkpoints of the trajectory. The power integral is the Richardson-extrapolated trapezoidal
/// rule over consecutive step pairs (Simpson's rule for non-uniform pairs), so the residual
/// converges at fourth order together with RK4.
template <int N>
double energy_audit(const Trajectory<N>& traj) {
  const auto& s = traj.samples;
  if (s.size() < 2) throw InvalidArgument("energy audit needs at least two samples");
  const auto power = [&](std::size_t i) { return s[i].u.dot(s[i].x.v); };
  double work = 0.0;
  double worst = 0.0;
  const auto check = [&](std::size_t i) {
    const double delta_e = s[i].energy - s.front().energy;
    worst = std::max(worst, std::abs(delta_e - work) / std::max(1.0, std::abs(delta_e)));
  };
  std::size_t i = 0;
  for (; i + 2 < s.size(); i += 2) {
    const double h0 = s[i + 1].t - s[i].t;
    const double h1 = s[i + 2].t - s[i + 1].t;
    const double f0 = power(i), f1 = power(i + 1), f2 = power(i + 2);
    work += (h0 + h1) / 6.0 *
            ((2.0 - h1 / h0) * f0 + (h0 + h1) * (h0 + h1) / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2);
    check(i + 2);
  }
  if (i + 1 == s.size() - 1) {
    work += 0.5 * (s[i + 1].t - s[i].t) * (power(i) + power(i + 1));
    check(i + 1);
  }
  return worst;
}

}  // namespace relkit
