#pragma once

#include <cmath>
#include <cstdlib>
#include <span>

#include <Eigen/Core>

#include "relkit/errors.hpp"

namespace relkit {

/// Spatial dimensions supported by every plant, transform and controller.
template <int N>
concept SupportedDim = (N == 1 || N == 3);

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

using Vec1 = Vec<1>;
using Vec3 = Vec<3>;

inline Vec1 vec1(double x) {
  Vec1 out;
  out(0) = x;
  return out;
}

inline constexpr double kSpeedOfLightSI = 299'792'458.0;

/// Speed of light and rest mass of the controlled body.
struct PhysConsts {
  double c = 1.0;
  double m0 = 1.0;

  PhysConsts() = default;
  PhysConsts(double speed_of_light, double rest_mass) : c(speed_of_light), m0(rest_mass) {
    if (!(c > 0.0) || !std::isfinite(c))
      throw InvalidArgument("speed of light must be positive and finite");
    if (!(m0 > 0.0) || !std::isfinite(m0))
      throw InvalidArgument("rest mass must be positive and finite");
  }

  static PhysConsts natural(double rest_mass = 1.0) { return {1.0, rest_mass}; }
  static PhysConsts si(double rest_mass = 1.0) { return {kSpeedOfLightSI, rest_mass}; }
};

/// eps_v guards the speed bound relative to c; eps_num is the default identity tolerance.
struct Tolerances {
  double eps_v = 1e-12;
  double eps_num = 1e-9;

  Tolerances() = default;
  Tolerances(double speed_guard, double numeric) : eps_v(speed_guard), eps_num(numeric) {
    if (!(eps_v > 0.0 && eps_v < 1.0)) throw InvalidArgument("eps_v must lie in (0, 1)");
    if (!(eps_num > 0.0 && eps_num < 1.0)) throw InvalidArgument("eps_num must lie in (0, 1)");
  }
};

/// Stacked position/velocity state x = [p; v].
template <int N>
  requires SupportedDim<N>
struct State {
  Vec<N> p = Vec<N>::Zero();
  Vec<N> v = Vec<N>::Zero();

  static constexpr int dim = N;

  friend bool operator==(const State& a, const State& b) { return a.p == b.p && a.v == b.v; }

  Eigen::Matrix<double, 2 * N, 1> stacked() const {
    Eigen::Matrix<double, 2 * N, 1> out;
    out << p, v;
    return out;
  }

  static State from_stacked(const Eigen::Matrix<double, 2 * N, 1>& x) {
    return State{x.template head<N>(), x.template tail<N>()};
  }
};

/// Copies a runtime-sized component list into a fixed-size vector.
template <int N>
Vec<N> to_vec(std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(N))
    throw DimensionMismatch(static_cast<std::size_t>(N), values.size());
  Vec<N> out;
  for (int i = 0; i < N; ++i) out(i) = values[static_cast<std::size_t>(i)];
  return out;
}

/// Throws SpeedBoundViolation unless |v| < c * (1 - eps_v). NaN speeds fail too.
template <int N>
void check_speed(const Vec<N>& v, const PhysConsts& consts, const Tolerances& tol = {}) {
  const double speed = v.norm();
  const double limit = consts.c * (1.0 - tol.eps_v);
  if (!(speed < limit)) throw SpeedBoundViolation(speed, limit);
}

/// 1 - |v|^2/c^2, evaluated as (1 - beta)(1 + beta) to keep precision near the bound.
template <int N>
double bracket(const Vec<N>& v, const PhysConsts& consts, const Tolerances& tol = {}) {
  check_speed<N>(v, consts, tol);
  const double beta = v.norm() / consts.c;
  return (1.0 - beta) * (1.0 + beta);
}

/// Half-integer exponent k/2 applied to the bracket.
struct HalfPower {
  int halves;
  constexpr double value() const { return 0.5 * halves; }
};

inline constexpr HalfPower kHalf{1};
inline constexpr HalfPower kThreeHalves{3};
inline constexpr HalfPower kMinusHalf{-1};
inline constexpr HalfPower kMinusThreeHalves{-3};

/// (1 - |v|^2/c^2)^(k/2) for any half-integer exponent.
template <int N>
double bracket_pow(const Vec<N>& v, const PhysConsts& consts, HalfPower exponent,
                   const Tolerances& tol = {}) {
  const double root = std::sqrt(bracket<N>(v, consts, tol));
  double out = 1.0;
  for (int i = 0; i < std::abs(exponent.halves); ++i) out *= root;
  return exponent.halves < 0 ? 1.0 / out : out;
}

template <int N>
double lorentz_gamma(const Vec<N>& v, const PhysConsts& consts, const Tolerances& tol = {}) {
  return 1.0 / std::sqrt(bracket<N>(v, consts, tol));
}

/// (gamma - 1) m0 c^2, using gamma - 1 = beta^2 gamma^2 / (gamma + 1) to avoid cancellation.
template <int N>
double kinetic_energy(const Vec<N>& v, const PhysConsts& consts, const Tolerances& tol = {}) {
  const double gamma = lorentz_gamma<N>(v, consts, tol);
  const double beta2 = v.squaredNorm() / (consts.c * consts.c);
  return consts.m0 * consts.c * consts.c * beta2 * gamma * gamma / (gamma + 1.0);
}

template <int N>
double newtonian_kinetic_energy(const Vec<N>& v, const PhysConsts& consts) {
  return 0.5 * consts.m0 * v.squaredNorm();
}

// Scalar conveniences for the one-dimensional case.
inline double lorentz_gamma(double v, const PhysConsts& consts, const Tolerances& tol = {}) {
  return lorentz_gamma<1>(vec1(v), consts, tol);
}
inline double bracket_pow(double v, const PhysConsts& consts, HalfPower exponent,
                          const Tolerances& tol = {}) {
  return bracket_pow<1>(vec1(v), consts, exponent, tol);
}
inline double kinetic_energy(double v, const PhysConsts& consts, const Tolerances& tol = {}) {
  return kinetic_energy<1>(vec1(v), consts, tol);
}

}  // namespace relkit
