#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "relkit/core.hpp"
#include "relkit/linearize.hpp"

namespace relkit {

using Pole = std::complex<double>;

/// w = -K x on the linearized plant.
template <int N>
struct StateFeedbackGain {
  Eigen::Matrix<double, N, 2 * N> K = Eigen::Matrix<double, N, 2 * N>::Zero();

  Vec<N> virtual_input(const State<N>& x) const { return -(K * x.stacked()); }
};

namespace detail {

// Groups poles into per-axis pairs: a complex pole takes its conjugate, a real pole the next
// unused real pole.
inline std::vector<std::pair<Pole, Pole>> pair_poles(std::span<const Pole> poles, double eps) {
  std::vector<bool> used(poles.size(), false);
  std::vector<std::pair<Pole, Pole>> pairs;
  const auto is_real = [eps](Pole p) { return std::abs(p.imag()) <= eps * std::max(1.0, std::abs(p)); };
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    std::optional<std::size_t> mate;
    for (std::size_t j = i + 1; j < poles.size(); ++j) {
      if (used[j]) continue;
      const bool match = is_real(poles[i])
                             ? is_real(poles[j])
                             : std::abs(poles[j] - std::conj(poles[i])) <=
                                   eps * std::max(1.0, std::abs(poles[i]));
      if (match) {
        mate = j;
        break;
      }
    }
    if (!mate) throw InvalidPoleSet("pole set is not closed under conjugation");
    used[*mate] = true;
    pairs.emplace_back(poles[i], poles[*mate]);
  }
  return pairs;
}

}  // namespace detail

/// Gain placing the eigenvalues of A - B K of the linearized plant at the requested poles.
/// Poles are consumed pairwise per axis; each pair must be real or a conjugate pair.
template <int N>
StateFeedbackGain<N> design_pole_placement(std::span<const Pole> poles, const PhysConsts& consts,
                                           const Tolerances& tol = {}) {
  if (poles.size() != static_cast<std::size_t>(2 * N))
    throw InvalidPoleSet("expected " + std::to_string(2 * N) + " poles, got " +
                         std::to_string(poles.size()));
  for (const Pole& p : poles) {
    if (!std::isfinite(p.real()) || !std::isfinite(p.imag()))
      throw InvalidPoleSet("poles must be finite");
    if (!(p.real() < 0.0)) throw InvalidPoleSet("poles must have negative real parts");
  }
  const auto pairs = detail::pair_poles(poles, tol.eps_num);
  const double b = linearized_model<N>(consts).input_gain();

  StateFeedbackGain<N> gain;
  for (int axis = 0; axis < N; ++axis) {
    const auto [p1, p2] = pairs[static_cast<std::size_t>(axis)];
    // (s - p1)(s - p2) = s^2 + a1 s + a0 against s^2 + b k1 s + b k0.
    const double a1 = -(p1 + p2).real();
    const double a0 = (p1 * p2).real();
    gain.K(axis, axis) = a0 / b;
    gain.K(axis, N + axis) = a1 / b;
  }
  return gain;
}

/// u = -(1 - v^2/c^2)^(-3/2) K x.
inline Vec1 relativistic_state_feedback_1d(const State<1>& x, const StateFeedbackGain<1>& gain,
                                           const PhysConsts& consts, const Tolerances& tol = {}) {
  return -bracket_pow<1>(x.v, consts, kMinusThreeHalves, tol) * (gain.K * x.stacked());
}

/// u = m0 gamma^3 (v.(-K x)) v / c^2 - m0 gamma K x.
inline Vec3 relativistic_state_feedback_3d(const State<3>& x, const StateFeedbackGain<3>& gain,
                                           const PhysConsts& consts, const Tolerances& tol = {}) {
  const double gamma = lorentz_gamma<3>(x.v, consts, tol);
  const double c2 = consts.c * consts.c;
  const Vec3 kx = gain.K * x.stacked();
  return (consts.m0 * gamma * gamma * gamma * x.v.dot(-kx) / c2) * x.v -
         (consts.m0 * gamma) * kx;
}

template <int N>
Vec<N> relativistic_state_feedback(const State<N>& x, const StateFeedbackGain<N>& gain,
                                   const PhysConsts& consts, const Tolerances& tol = {}) {
  if constexpr (N == 1)
    return relativistic_state_feedback_1d(x, gain, consts, tol);
  else
    return relativistic_state_feedback_3d(x, gain, consts, tol);
}

/// verbatim: u = m0 gamma^3 (y'.l) y' / c^2 - m0 gamma l, the printed three-dimensional law.
/// composed: u = u_from_w_3d evaluated at velocity y' with w = l, the sign-consistent variant.
enum class OutputFeedback3dMode { verbatim, composed };

/// Output feedback wrap of w = l[y]; gamma is evaluated from the output derivative y'.
template <int N, class Map>
Vec<N> relativistic_output_feedback(const Vec<N>& y, const Vec<N>& y_dot, Map&& map_l,
                                    const PhysConsts& consts,
                                    OutputFeedback3dMode mode = OutputFeedback3dMode::verbatim,
                                    const Tolerances& tol = {}) {
  const Vec<N> l = map_l(y);
  if constexpr (N == 1) {
    return bracket_pow<1>(y_dot, consts, kMinusThreeHalves, tol) * l;
  } else {
    if (mode == OutputFeedback3dMode::composed) return u_from_w_3d(State<3>{y, y_dot}, l, consts, tol);
    const double gamma = lorentz_gamma<3>(y_dot, consts, tol);
    const double c2 = consts.c * consts.c;
    return (consts.m0 * gamma * gamma * gamma * y_dot.dot(l) / c2) * y_dot -
           (consts.m0 * gamma) * l;
  }
}

/// Diagonal PID gains; every entry non-negative and at least one positive.
template <int N>
struct PidGains {
  Vec<N> kp = Vec<N>::Zero();
  Vec<N> ki = Vec<N>::Zero();
  Vec<N> kd = Vec<N>::Zero();
  std::optional<double> integral_limit;  // anti-windup clamp, componentwise

  static PidGains uniform(double p, double i, double d) {
    PidGains g;
    g.kp.setConstant(p);
    g.ki.setConstant(i);
    g.kd.setConstant(d);
    g.validate();
    return g;
  }

  void validate() const {
    const bool finite = kp.allFinite() && ki.allFinite() && kd.allFinite();
    if (!finite || (kp.array() < 0).any() || (ki.array() < 0).any() || (kd.array() < 0).any())
      throw InvalidArgument("PID gains must be finite and non-negative");
    if (kp.isZero() && ki.isZero() && kd.isZero())
      throw InvalidArgument("at least one PID gain must be positive");
    if (integral_limit && !(*integral_limit > 0.0))
      throw InvalidArgument("integral limit must be positive");
  }
};

template <int N>
struct PidState {
  Vec<N> integral = Vec<N>::Zero();
  Vec<N> prev_error = Vec<N>::Zero();
  double t_prev = 0.0;
  bool primed = false;
};

template <int N>
Vec<N> clamp_integral(const Vec<N>& integral, const std::optional<double>& limit) {
  if (!limit) return integral;
  return integral.cwiseMax(-*limit).cwiseMin(*limit);
}

/// w = Kp e + Ki integral + Kd e'.
template <int N>
Vec<N> pid_virtual_input(const Vec<N>& e, const Vec<N>& integral, const Vec<N>& e_dot,
                         const PidGains<N>& gains) {
  return gains.kp.cwiseProduct(e) + gains.ki.cwiseProduct(integral) +
         gains.kd.cwiseProduct(e_dot);
}

/// Relativistic wrap of a PID virtual input given the output velocity y'.
/// 1D uses (1 - y'^2/c^2)^(-3/2); 3D applies the full inverse transform.
template <int N>
Vec<N> pid_wrap(const Vec<N>& w, const Vec<N>& y_dot, const PhysConsts& consts,
                const Tolerances& tol = {}) {
  if constexpr (N == 1)
    return bracket_pow<1>(y_dot, consts, kMinusThreeHalves, tol) * w;
  else
    return u_from_w_3d(State<3>{Vec3::Zero(), y_dot}, w, consts, tol);
}

template <int N>
struct PidOutput {
  Vec<N> u;
  Vec<N> w;
  PidState<N> state;
};

namespace detail {
template <int N>
PidState<N> advance_pid(const Vec<N>& e, const PidGains<N>& gains, PidState<N> state, double dt) {
  // Trapezoidal accumulation; the first sample only primes the history.
  if (state.primed) {
    state.integral += 0.5 * dt * (e + state.prev_error);
    state.t_prev += dt;
  }
  state.integral = clamp_integral<N>(state.integral, gains.integral_limit);
  state.prev_error = e;
  state.primed = true;
  return state;
}
}  // namespace detail

/// One sampled step of the relativistic PID law for a constant reference (y' = -e').
template <int N>
PidOutput<N> relativistic_pid_step(const Vec<N>& e, const Vec<N>& e_dot, const PidGains<N>& gains,
                                   const PidState<N>& state, double dt, const PhysConsts& consts,
                                   const Tolerances& tol = {}) {
  PidState<N> next = detail::advance_pid<N>(e, gains, state, dt);
  const Vec<N> w = pid_virtual_input<N>(e, next.integral, e_dot, gains);
  return {pid_wrap<N>(w, -e_dot, consts, tol), w, next};
}

/// PID step for a moving reference: the wrap uses y' = r' - e'.
template <int N>
PidOutput<N> pid_nonconstant_ref_step(const Vec<N>& e, const Vec<N>& e_dot, const Vec<N>& r_dot,
                                      const PidGains<N>& gains, const PidState<N>& state,
                                      double dt, const PhysConsts& consts,
                                      const Tolerances& tol = {}) {
  PidState<N> next = detail::advance_pid<N>(e, gains, state, dt);
  const Vec<N> w = pid_virtual_input<N>(e, next.integral, e_dot, gains);
  return {pid_wrap<N>(w, r_dot - e_dot, consts, tol), w, next};
}

// --- Control laws as used by the closed-loop simulator -------------------------------------

enum class DerivativeSource { state, backward_difference };

template <int N>
struct OpenLoopForce {
  std::function<Vec<N>(double)> force;
};

/// Open-loop virtual input schedule; the force is obtained by wrapping at the current state.
template <int N>
struct OpenLoopVirtual {
  std::function<Vec<N>(double)> w;
};

/// w = -K (x - [r; 0]).
template <int N>
struct StateFeedbackLaw {
  StateFeedbackGain<N> gain;
};

/// w = l[y] = -L (y - r).
template <int N>
struct OutputFeedbackLaw {
  Eigen::Matrix<double, N, N> gain = Eigen::Matrix<double, N, N>::Identity();
  OutputFeedback3dMode mode = OutputFeedback3dMode::verbatim;
};

template <int N>
struct PidLaw {
  PidGains<N> gains;
};

/// Controller description. With wrapped == false the linear law is applied as a Newtonian
/// force (the v = 0 limit of the transform), which is what an uncorrected design would do.
template <int N>
struct ControlLaw {
  std::variant<OpenLoopForce<N>, OpenLoopVirtual<N>, StateFeedbackLaw<N>, OutputFeedbackLaw<N>,
               PidLaw<N>>
      kind;
  bool wrapped = true;
  std::optional<double> force_limit;
  std::optional<double> zoh_dt;
  DerivativeSource derivative_source = DerivativeSource::state;

  bool is_pid() const { return std::holds_alternative<PidLaw<N>>(kind); }
};

/// What the controller sees at one evaluation instant.
template <int N>
struct Measurement {
  double t = 0.0;
  Vec<N> y = Vec<N>::Zero();
  Vec<N> y_dot = Vec<N>::Zero();
  Vec<N> r = Vec<N>::Zero();
  Vec<N> integral = Vec<N>::Zero();  // PID only
};

template <int N>
Vec<N> saturate(const Vec<N>& u, const std::optional<double>& limit) {
  if (!limit) return u;
  const double mag = u.norm();
  return mag > *limit ? Vec<N>((*limit / mag) * u) : u;
}

/// Force commanded by the law at one instant, before saturation.
template <int N>
Vec<N> evaluate_law(const ControlLaw<N>& law, const Measurement<N>& m, const PhysConsts& consts,
                    const Tolerances& tol = {}) {
  const auto unwrapped = [&](const Vec<N>& w) { return newtonian_u_from_w<N>(w, consts); };
  return std::visit(
      [&](const auto& k) -> Vec<N> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, OpenLoopForce<N>>) {
          return k.force(m.t);
        } else if constexpr (std::is_same_v<K, OpenLoopVirtual<N>>) {
          const Vec<N> w = k.w(m.t);
          return law.wrapped ? u_from_w<N>(State<N>{m.y, m.y_dot}, w, consts, tol) : unwrapped(w);
        } else if constexpr (std::is_same_v<K, StateFeedbackLaw<N>>) {
          const State<N> shifted{m.y - m.r, m.y_dot};
          return law.wrapped ? relativistic_state_feedback<N>(shifted, k.gain, consts, tol)
                             : unwrapped(k.gain.virtual_input(shifted));
        } else if constexpr (std::is_same_v<K, OutputFeedbackLaw<N>>) {
          const auto l = [&](const Vec<N>& y) -> Vec<N> { return -(k.gain * (y - m.r)); };
          return law.wrapped
                     ? relativistic_output_feedback<N>(m.y, m.y_dot, l, consts, k.mode, tol)
                     : unwrapped(l(m.y));
        } else {
          const Vec<N> e = m.r - m.y;
          const Vec<N> e_dot = -m.y_dot;
          const Vec<N> w = pid_virtual_input<N>(e, m.integral, e_dot, k.gains);
          return law.wrapped ? pid_wrap<N>(w, m.y_dot, consts, tol) : unwrapped(w);
        }
      },
      law.kind);
}

}  // namespace relkit
