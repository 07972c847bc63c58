#pragma once

#include <Eigen/Core>

#include "relkit/core.hpp"
#include "relkit/dynamics.hpp"

// Exact feedback linearization between the physical force u and the virtual input w.
//
// Unit convention differs by dimension:
//   1D: w = (1 - v^2/c^2)^(3/2) u carries force units; the linear model is
//       dv/dt = w / m0 (B = [0; 1/m0]).
//   3D: w = sqrt(1 - |v|^2/c^2) / m0 (u - (v.u) v / c^2) is an acceleration;
//       the linear model is dv/dt = w (B = [0; I]).

namespace relkit {

inline Vec1 w_from_u_1d(const State<1>& x, const Vec1& u, const PhysConsts& consts,
                        const Tolerances& tol = {}) {
  return bracket_pow<1>(x.v, consts, kThreeHalves, tol) * u;
}

inline Vec1 u_from_w_1d(const State<1>& x, const Vec1& w, const PhysConsts& consts,
                        const Tolerances& tol = {}) {
  return bracket_pow<1>(x.v, consts, kMinusThreeHalves, tol) * w;
}

inline Vec3 w_from_u_3d(const State<3>& x, const Vec3& u, const PhysConsts& consts,
                        const Tolerances& tol = {}) {
  const double root = bracket_pow<3>(x.v, consts, kHalf, tol);
  const double c2 = consts.c * consts.c;
  return (root / consts.m0) * (u - (x.v.dot(u) / c2) * x.v);
}

inline Vec3 u_from_w_3d(const State<3>& x, const Vec3& w, const PhysConsts& consts,
                        const Tolerances& tol = {}) {
  const double inv_root = bracket_pow<3>(x.v, consts, kMinusHalf, tol);
  const double inv_root3 = inv_root * inv_root * inv_root;
  const double c2 = consts.c * consts.c;
  return (consts.m0 * inv_root3 * x.v.dot(w) / c2) * x.v + (consts.m0 * inv_root) * w;
}

template <int N>
Vec<N> w_from_u(const State<N>& x, const Vec<N>& u, const PhysConsts& consts,
                const Tolerances& tol = {}) {
  if constexpr (N == 1)
    return w_from_u_1d(x, u, consts, tol);
  else
    return w_from_u_3d(x, u, consts, tol);
}

template <int N>
Vec<N> u_from_w(const State<N>& x, const Vec<N>& w, const PhysConsts& consts,
                const Tolerances& tol = {}) {
  if constexpr (N == 1)
    return u_from_w_1d(x, w, consts, tol);
  else
    return u_from_w_3d(x, w, consts, tol);
}

/// The rest-frame (v = 0) limit of u_from_w: what a Newtonian design would apply as force.
template <int N>
Vec<N> newtonian_u_from_w(const Vec<N>& w, const PhysConsts& consts) {
  if constexpr (N == 1)
    return w;
  else
    return consts.m0 * w;
}

/// Virtual input seen by the linear model of a Newtonian plant driven by force u.
template <int N>
Vec<N> newtonian_w_from_u(const Vec<N>& u, const PhysConsts& consts) {
  if constexpr (N == 1)
    return u;
  else
    return u / consts.m0;
}

template <int N>
  requires SupportedDim<N>
struct LinearPlant {
  Eigen::Matrix<double, 2 * N, 2 * N> A;
  Eigen::Matrix<double, 2 * N, N> B;
  Eigen::Matrix<double, N, 2 * N> C;

  /// Scalar multiplying the identity in the lower block of B.
  double input_gain() const { return B(N, 0); }

  Eigen::Matrix<double, 2 * N, 1> rhs(const Eigen::Matrix<double, 2 * N, 1>& x,
                                      const Vec<N>& w) const {
    return A * x + B * w;
  }
};

namespace detail {
template <int N>
LinearPlant<N> double_integrator(double input_gain) {
  LinearPlant<N> out;
  const auto eye = Eigen::Matrix<double, N, N>::Identity();
  out.A.setZero();
  out.A.template topRightCorner<N, N>() = eye;
  out.B.setZero();
  out.B.template bottomRows<N>() = input_gain * eye;
  out.C.setZero();
  out.C.template leftCols<N>() = eye;
  return out;
}
}  // namespace detail

/// Double integrator reached from w after exact linearization.
template <int N>
LinearPlant<N> linearized_model(const PhysConsts& consts) {
  return detail::double_integrator<N>(N == 1 ? 1.0 / consts.m0 : 1.0);
}

/// Newtonian plant driven directly by force: B carries 1/m in every dimension.
template <int N>
LinearPlant<N> newtonian_model(const PhysConsts& consts) {
  return detail::double_integrator<N>(1.0 / consts.m0);
}

}  // namespace relkit
