#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "relkit/dynamics.hpp"

namespace relkit {
namespace {

const PhysConsts kUnit = PhysConsts::natural();

Vec3 random_velocity(std::mt19937_64& rng, double max_speed) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
  return max_speed * u(rng) * dir;
}

Vec3 random_force(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(-5.0, 5.0);
  return Vec3(f(rng), f(rng), f(rng));
}

TEST(NewtonianRhs, Examples) {
  auto d = newtonian_rhs<1>({vec1(0), vec1(0)}, vec1(1), kUnit);
  EXPECT_EQ(d.p(0), 0.0);
  EXPECT_EQ(d.v(0), 1.0);
  d = newtonian_rhs<1>({vec1(2), vec1(3)}, vec1(4), PhysConsts(1.0, 2.0));
  EXPECT_EQ(d.p(0), 3.0);
  EXPECT_EQ(d.v(0), 2.0);
  const auto d3 = newtonian_rhs<3>({Vec3::Zero(), Vec3(1, 0, 0)}, Vec3(0, 6, 0), PhysConsts(1.0, 2.0));
  EXPECT_EQ(d3.p, Vec3(1, 0, 0));
  EXPECT_EQ(d3.v, Vec3(0, 3, 0));
}

TEST(RelativisticRhs1d, Examples) {
  EXPECT_DOUBLE_EQ(relativistic_rhs_1d({vec1(0), vec1(0)}, vec1(1), kUnit).v(0), 1.0);
  EXPECT_NEAR(relativistic_rhs_1d({vec1(0), vec1(0.6)}, vec1(1), kUnit).v(0), 0.512, 1e-15);
  EXPECT_NEAR(relativistic_rhs_1d({vec1(0), vec1(0.6)}, vec1(2), PhysConsts(1.0, 4.0)).v(0), 0.256, 1e-15);
  EXPECT_DOUBLE_EQ(relativistic_rhs_1d({vec1(5), vec1(0.6)}, vec1(1), kUnit).p(0), 0.6);
  EXPECT_THROW(relativistic_rhs_1d({vec1(0), vec1(1.0)}, vec1(1), kUnit), SpeedBoundViolation);
}

TEST(RelativisticRhs3d, Examples) {
  const auto rest = relativistic_rhs_3d({Vec3::Zero(), Vec3::Zero()}, Vec3(1, 2, 3), kUnit);
  EXPECT_TRUE(rest.v.isApprox(Vec3(1, 2, 3)));
  const auto trans = relativistic_rhs_3d({Vec3::Zero(), Vec3(0.6, 0, 0)}, Vec3(0, 1, 0), kUnit);
  EXPECT_NEAR((trans.v - Vec3(0, 0.8, 0)).norm(), 0.0, 1e-15);
  const auto lon = relativistic_rhs_3d({Vec3::Zero(), Vec3(0.6, 0, 0)}, Vec3(1, 0, 0), kUnit);
  EXPECT_NEAR((lon.v - Vec3(0.512, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_THROW(relativistic_rhs_3d({Vec3::Zero(), Vec3(0.6, 0.8, 0)}, Vec3(1, 0, 0), kUnit),
               SpeedBoundViolation);
}

TEST(ForceFromAccel3d, Examples) {
  EXPECT_TRUE(force_from_accel_3d(Vec3::Zero(), Vec3(1, 1, 1), kUnit).isApprox(Vec3(1, 1, 1)));
  EXPECT_NEAR((force_from_accel_3d(Vec3(0.6, 0, 0), Vec3(0.512, 0, 0), kUnit) - Vec3(1, 0, 0)).norm(), 0.0, 1e-14);
  EXPECT_NEAR((force_from_accel_3d(Vec3(0.6, 0, 0), Vec3(0, 0.8, 0), kUnit) - Vec3(0, 1, 0)).norm(), 0.0, 1e-14);
}

TEST(SplitParallelPerp, Examples) {
  auto s = split_parallel_perp<3>(Vec3(1, 1, 0), Vec3(1, 0, 0));
  EXPECT_EQ(s.parallel, Vec3(1, 0, 0));
  EXPECT_EQ(s.perpendicular, Vec3(0, 1, 0));
  s = split_parallel_perp<3>(Vec3(3, 4, 0), Vec3(0, 0, 2));
  EXPECT_EQ(s.parallel, Vec3::Zero());
  EXPECT_EQ(s.perpendicular, Vec3(3, 4, 0));
  s = split_parallel_perp<3>(Vec3(2, 2, 2), Vec3(1, 1, 1));
  EXPECT_NEAR((s.parallel - Vec3(2, 2, 2)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(s.perpendicular.norm(), 0.0, 1e-15);
  s = split_parallel_perp<3>(Vec3(1, 2, 3), Vec3::Zero());
  EXPECT_EQ(s.parallel, Vec3::Zero());
  EXPECT_EQ(s.perpendicular, Vec3(1, 2, 3));
}

TEST(SplitParallelPerp, Properties) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const Vec3 w = random_force(rng);
    const Vec3 v = random_velocity(rng, 0.99);
    const auto s = split_parallel_perp<3>(w, v);
    EXPECT_NEAR((s.parallel + s.perpendicular - w).norm(), 0.0, 1e-12);
    EXPECT_NEAR(s.parallel.cross(v).norm(), 0.0, 1e-12);
    EXPECT_NEAR(s.perpendicular.dot(v), 0.0, 1e-12);
  }
}

TEST(LongitudinalTransverse, Examples) {
  const PhysConsts heavy(1.0, 3.0);
  const auto rest = longitudinal_transverse_check(Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 2, 0), heavy);
  EXPECT_TRUE(rest.parallel.isApprox(Vec3(3, 0, 0)));
  EXPECT_TRUE(rest.perpendicular.isApprox(Vec3(0, 6, 0)));
  const auto moving = longitudinal_transverse_check(Vec3(0.6, 0, 0), Vec3(0.512, 0, 0), Vec3(0, 0.8, 0), kUnit);
  EXPECT_NEAR((moving.parallel - Vec3(1, 0, 0)).norm(), 0.0, 1e-14);
  EXPECT_NEAR((moving.perpendicular - Vec3(0, 1, 0)).norm(), 0.0, 1e-14);
}

TEST(LongitudinalTransverse, RejectsMisalignedInputs) {
  EXPECT_THROW(longitudinal_transverse_check(Vec3(0.6, 0, 0), Vec3(0.5, 0.1, 0), Vec3(0, 1, 0), kUnit),
               NonOrthogonalInput);
  EXPECT_THROW(longitudinal_transverse_check(Vec3(0.6, 0, 0), Vec3(1, 0, 0), Vec3(0.1, 1, 0), kUnit),
               NonOrthogonalInput);
  EXPECT_THROW(longitudinal_transverse_check(Vec3(1.0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), kUnit),
               SpeedBoundViolation);
}

TEST(LongitudinalTransverse, SumMatchesForceFromAccel) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 v = random_velocity(rng, 0.99);
    const Vec3 a = random_force(rng);
    const auto parts = split_parallel_perp<3>(a, v);
    const auto f = longitudinal_transverse_check(v, parts.parallel, parts.perpendicular, kUnit);
    const Vec3 full = force_from_accel_3d(v, a, kUnit);
    EXPECT_LE((f.parallel + f.perpendicular - full).norm(), 1e-9 * std::max(1.0, full.norm()));
  }
}

TEST(DynamicsProperty, NewtonianLimit) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> beta(-1e-3, 1e-3);
  for (int i = 0; i < 500; ++i) {
    const double v = beta(rng);
    const double rel = relativistic_rhs_1d({vec1(0), vec1(v)}, vec1(2.0), kUnit).v(0);
    const double newt = newtonian_rhs<1>({vec1(0), vec1(v)}, vec1(2.0), kUnit).v(0);
    EXPECT_LE(std::abs(rel - newt) / std::abs(newt), 2.0 * v * v);

    const Vec3 v3 = random_velocity(rng, 1e-3);
    const Vec3 f = random_force(rng);
    const Vec3 a_rel = relativistic_rhs_3d({Vec3::Zero(), v3}, f, kUnit).v;
    const Vec3 a_newt = newtonian_rhs<3>({Vec3::Zero(), v3}, f, kUnit).v;
    EXPECT_LE((a_rel - a_newt).norm() / a_newt.norm(), 2.0 * v3.squaredNorm());
  }
}

TEST(DynamicsProperty, AccelerationCoplanarWithVelocityAndForce) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    const Vec3 v = random_velocity(rng, 0.99);
    const Vec3 f = random_force(rng);
    const Vec3 a = relativistic_accel_3d(v, f, kUnit);
    const double triple = v.cross(f).dot(a);
    EXPECT_LE(std::abs(triple), 1e-9 * std::max(1.0, v.norm() * f.norm() * a.norm()));
  }
}

TEST(DynamicsProperty, ForceRoundTrip) {
  std::mt19937_64 rng(19);
  const PhysConsts heavy(2.0, 1.7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = random_velocity(rng, 0.99 * heavy.c);
    const Vec3 f = random_force(rng);
    const Vec3 back = force_from_accel_3d(v, relativistic_accel_3d(v, f, heavy), heavy);
    EXPECT_LE((back - f).norm(), 1e-9 * std::max(1.0, f.norm()));
  }
}

TEST(DynamicsProperty, DecompositionConsistency) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = random_velocity(rng, 0.99);
    const Vec3 f = random_force(rng);
    const auto parts = split_parallel_perp<3>(f, v);
    const double g = lorentz_gamma<3>(v, kUnit);
    const Vec3 expected = parts.parallel / (g * g * g) + parts.perpendicular / g;
    const Vec3 a = relativistic_accel_3d(v, f, kUnit);
    EXPECT_LE((a - expected).norm(), 1e-9 * std::max(1.0, a.norm()));
  }
}

TEST(PlantModel, DispatchesOnFlavor) {
  const PlantModel<1> rel{kUnit, Flavor::relativistic};
  const PlantModel<1> newt{kUnit, Flavor::newtonian};
  const State<1> x{vec1(0), vec1(0.6)};
  EXPECT_NEAR(rel.rhs(x, vec1(1)).v(0), 0.512, 1e-15);
  EXPECT_DOUBLE_EQ(newt.rhs(x, vec1(1)).v(0), 1.0);
  EXPECT_NEAR(rel.energy(vec1(0.6)), 0.25, 1e-15);
  EXPECT_NEAR(newt.energy(vec1(0.6)), 0.18, 1e-15);
}

}  // namespace
}  // namespace relkit
