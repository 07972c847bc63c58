#pragma once

#include <cmath>

#include <Eigen/Geometry>

#include "relkit/core.hpp"

namespace relkit {

enum class Flavor { newtonian, relativistic };

/// State derivative [dp/dt; dv/dt]. Shares the layout of State.
template <int N>
using StateDot = State<N>;

/// Newtonian baseline: dp/dt = v, dv/dt = F / m.
template <int N>
StateDot<N> newtonian_rhs(const State<N>& x, const Vec<N>& force, const PhysConsts& consts) {
  return {x.v, force / consts.m0};
}

/// One-dimensional relativistic law: dv/dt = (F / m0) (1 - v^2/c^2)^(3/2).
inline StateDot<1> relativistic_rhs_1d(const State<1>& x, const Vec1& force,
                                       const PhysConsts& consts, const Tolerances& tol = {}) {
  const double factor = bracket_pow<1>(x.v, consts, kThreeHalves, tol);
  return {x.v, force * (factor / consts.m0)};
}

/// Acceleration produced by force F at velocity v in three dimensions:
/// a = sqrt(1 - |v|^2/c^2) / m0 * (F - (v.F) v / c^2).
inline Vec3 relativistic_accel_3d(const Vec3& v, const Vec3& force, const PhysConsts& consts,
                                  const Tolerances& tol = {}) {
  const double root = bracket_pow<3>(v, consts, kHalf, tol);
  const double c2 = consts.c * consts.c;
  return (root / consts.m0) * (force - (v.dot(force) / c2) * v);
}

inline StateDot<3> relativistic_rhs_3d(const State<3>& x, const Vec3& force,
                                       const PhysConsts& consts, const Tolerances& tol = {}) {
  return {x.v, relativistic_accel_3d(x.v, force, consts, tol)};
}

template <int N>
StateDot<N> relativistic_rhs(const State<N>& x, const Vec<N>& force, const PhysConsts& consts,
                             const Tolerances& tol = {}) {
  if constexpr (N == 1)
    return relativistic_rhs_1d(x, force, consts, tol);
  else
    return relativistic_rhs_3d(x, force, consts, tol);
}

/// Force required to produce acceleration a at velocity v:
/// F = m0 gamma^3 (v.a) v / c^2 + m0 gamma a.
inline Vec3 force_from_accel_3d(const Vec3& v, const Vec3& accel, const PhysConsts& consts,
                                const Tolerances& tol = {}) {
  const double gamma = lorentz_gamma<3>(v, consts, tol);
  const double c2 = consts.c * consts.c;
  return (consts.m0 * gamma * gamma * gamma * v.dot(accel) / c2) * v +
         (consts.m0 * gamma) * accel;
}

template <int N>
struct Split {
  Vec<N> parallel;
  Vec<N> perpendicular;
};

/// Projects w onto v and its orthogonal complement. A zero v yields an empty parallel part.
template <int N>
Split<N> split_parallel_perp(const Vec<N>& w, const Vec<N>& v) {
  const double vv = v.squaredNorm();
  if (vv == 0.0) return {Vec<N>::Zero(), w};
  const Vec<N> par = (w.dot(v) / vv) * v;
  return {par, w - par};
}

/// Longitudinal and transverse force parts: F_par = m0 gamma^3 a_par, F_perp = m0 gamma a_perp.
inline Split<3> longitudinal_transverse_check(const Vec3& v, const Vec3& accel_par,
                                              const Vec3& accel_perp, const PhysConsts& consts,
                                              const Tolerances& tol = {}) {
  const double gamma = lorentz_gamma<3>(v, consts, tol);
  const double speed = v.norm();
  if (speed > 0.0) {
    if (accel_par.cross(v).norm() > tol.eps_num * accel_par.norm() * speed)
      throw NonOrthogonalInput("longitudinal acceleration is not parallel to v");
    if (std::abs(accel_perp.dot(v)) > tol.eps_num * accel_perp.norm() * speed)
      throw NonOrthogonalInput("transverse acceleration is not orthogonal to v");
  }
  return {consts.m0 * gamma * gamma * gamma * accel_par, consts.m0 * gamma * accel_perp};
}

/// Plant description: constants plus the dynamics flavor. The dimension is the template argument.
template <int N>
  requires SupportedDim<N>
struct PlantModel {
  PhysConsts consts;
  Flavor flavor = Flavor::relativistic;

  static constexpr int dim = N;

  StateDot<N> rhs(const State<N>& x, const Vec<N>& force, const Tolerances& tol = {}) const {
    if (flavor == Flavor::newtonian) return newtonian_rhs<N>(x, force, consts);
    return relativistic_rhs<N>(x, force, consts, tol);
  }

  /// Kinetic energy consistent with the flavor's force law.
  double energy(const Vec<N>& v, const Tolerances& tol = {}) const {
    if (flavor == Flavor::newtonian) return newtonian_kinetic_energy<N>(v, consts);
    return kinetic_energy<N>(v, consts, tol);
  }
};

}  // namespace relkit
