#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>
#include <gtest/gtest.h>

#include "relkit/sim.hpp"

namespace relkit {
namespace {

const PhysConsts kUnit = PhysConsts::natural();

IntegratorCfg rk4(double dt, double t_end) {
  IntegratorCfg cfg;
  cfg.dt = dt;
  cfg.t_end = t_end;
  return cfg;
}

Trajectory<1> push_const(Flavor flavor, double force, const IntegratorCfg& cfg,
                         const PhysConsts& k = kUnit) {
  return integrate_open_loop<1>({k, flavor}, [force](double) { return vec1(force); }, cfg, {});
}

TEST(Simulate, NewtonianConstantForce) {
  const auto traj = push_const(Flavor::newtonian, 1.0, rk4(1e-2, 2.0));
  EXPECT_NEAR(traj.back().t, 2.0, 0.0);
  EXPECT_NEAR(traj.back().x.p(0), 2.0, 1e-12);
  EXPECT_NEAR(traj.back().x.v(0), 2.0, 1e-12);
  EXPECT_EQ(traj.samples.size(), 201u);
}

TEST(Simulate, RelativisticConstantForceMatchesClosedForm) {
  const auto traj = push_const(Flavor::relativistic, 1.0, rk4(1e-3, 3.0));
  for (const auto& s : traj.samples) {
    const double v = s.t / std::sqrt(1.0 + s.t * s.t);
    const double p = std::sqrt(1.0 + s.t * s.t) - 1.0;
    EXPECT_NEAR(s.x.v(0), v, 1e-10);
    EXPECT_NEAR(s.x.p(0), p, 1e-10);
    EXPECT_LT(std::abs(s.x.v(0)), 1.0);
  }
}

TEST(Simulate, LinearizingVirtualInputGivesParabola) {
  ControlLaw<1> law{OpenLoopVirtual<1>{[](double) { return vec1(1.0); }}};
  const auto traj = integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, {}, rk4(1e-3, 0.9), {});
  EXPECT_NEAR(traj.back().x.p(0), 0.405, 1e-10);
  EXPECT_NEAR(traj.back().x.v(0), 0.9, 1e-10);
  EXPECT_NEAR(traj.back().w(0), 1.0, 1e-9);
}

TEST(Simulate, ZeroForceCoasts) {
  const State<3> x0{Vec3(1, 2, 3), Vec3(0.1, -0.2, 0.3)};
  const auto traj = integrate_open_loop<3>({kUnit, Flavor::relativistic}, [](double) { return Vec3::Zero().eval(); },
                                           rk4(1e-2, 1.0), x0);
  EXPECT_NEAR((traj.back().x.p - (x0.p + x0.v)).norm(), 0.0, 1e-13);
  EXPECT_EQ(traj.back().x.v, x0.v);
  EXPECT_NEAR(traj.back().energy, traj.samples.front().energy, 1e-15);
}

TEST(Simulate, TransverseForceInitialRate) {
  const State<3> x0{Vec3::Zero(), Vec3(0.6, 0, 0)};
  const auto traj = integrate_open_loop<3>({kUnit, Flavor::relativistic}, [](double) { return Vec3(0, 1, 0); },
                                           rk4(1e-5, 1e-4), x0);
  const double rate = traj.samples[1].x.v(1) / traj.samples[1].t;
  EXPECT_NEAR(rate, 0.8, 1e-4);
}

TEST(Simulate, RejectsBadInputs) {
  const PlantModel<1> plant{kUnit, Flavor::relativistic};
  ControlLaw<1> law{OpenLoopForce<1>{[](double) { return vec1(0); }}};
  EXPECT_THROW(integrate_closed_loop<1>(plant, law, {}, rk4(-1.0, 1.0), {}), InvalidArgument);
  EXPECT_THROW(integrate_closed_loop<1>(plant, law, {}, rk4(1e-2, 0.0), {}), InvalidArgument);
  EXPECT_THROW(integrate_closed_loop<1>(plant, law, {}, rk4(1e-2, 1.0), {vec1(0), vec1(1.0)}), SpeedBoundViolation);
  ControlLaw<1> bd = law;
  bd.derivative_source = DerivativeSource::backward_difference;
  EXPECT_THROW(integrate_closed_loop<1>(plant, bd, {}, rk4(1e-2, 1.0), {}), InvalidArgument);
}

TEST(EnergyAudit, Examples) {
  const auto rest = integrate_open_loop<1>({kUnit, Flavor::relativistic}, [](double) { return vec1(0); },
                                           rk4(1e-2, 1.0), {});
  EXPECT_EQ(energy_audit<1>(rest), 0.0);
  EXPECT_LE(energy_audit<1>(push_const(Flavor::relativistic, 1.0, rk4(1e-3, 1.0))), 1e-9);
  EXPECT_LE(energy_audit<1>(push_const(Flavor::newtonian, 1.0, rk4(1e-3, 1.0))), 1e-9);
  EXPECT_THROW(energy_audit<1>(Trajectory<1>{}), InvalidArgument);
}

TEST(EnergyAudit, FourthOrderResidualDecay) {
  const double coarse = energy_audit<1>(push_const(Flavor::relativistic, 1.0, rk4(4e-2, 4.0)));
  const double fine = energy_audit<1>(push_const(Flavor::relativistic, 1.0, rk4(2e-2, 4.0)));
  EXPECT_GT(coarse / fine, 10.0);
}

TEST(EnergyAudit, OddSampleCountUsesTrailingTrapezoid) {
  const auto traj = push_const(Flavor::newtonian, 1.0, rk4(0.25, 0.75));  // four samples
  ASSERT_EQ(traj.samples.size(), 4u);
  EXPECT_LE(energy_audit<1>(traj), 0.1);
}

TEST(Convergence, Rk4IsFourthOrder) {
  std::vector<double> err;
  for (double dt : {1e-1, 5e-2, 2.5e-2}) {
    const auto traj = push_const(Flavor::relativistic, 1.0, rk4(dt, 2.0));
    err.push_back(std::abs(traj.back().x.v(0) - 2.0 / std::sqrt(5.0)));
  }
  const double slope1 = std::log2(err[0] / err[1]);
  const double slope2 = std::log2(err[1] / err[2]);
  EXPECT_NEAR(slope1, 4.0, 0.3);
  EXPECT_NEAR(slope2, 4.0, 0.3);
}

TEST(Simulate, Rk45MeetsTolerance) {
  IntegratorCfg cfg;
  cfg.method = Method::rk45;
  cfg.dt = 0.1;
  cfg.t_end = 5.0;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  const auto traj = push_const(Flavor::relativistic, 1.0, cfg);
  EXPECT_DOUBLE_EQ(traj.back().t, 5.0);
  EXPECT_NEAR(traj.back().x.v(0), 5.0 / std::sqrt(26.0), 1e-8);
  EXPECT_LT(traj.samples.size(), 2000u);
}

TEST(Simulate, Rk45StaysBelowLightUnderHugeForce) {
  IntegratorCfg cfg;
  cfg.method = Method::rk45;
  cfg.dt = 1.0;
  cfg.t_end = 50.0;
  const auto traj = push_const(Flavor::relativistic, 1e3, cfg);
  double prev = 1.0;
  for (const auto& s : traj.samples) {
    EXPECT_LT(std::abs(s.x.v(0)), 1.0);
    EXPECT_GE(s.gamma, prev);
    prev = s.gamma;
  }
}

TEST(Simulate, StepCountExceededKeepsPartialTrajectory) {
  auto cfg = rk4(1e-3, 1.0);
  cfg.max_steps = 100;
  try {
    push_const(Flavor::relativistic, 1.0, cfg);
    FAIL() << "expected IntegrationFailure";
  } catch (const IntegrationFailure<1>& e) {
    EXPECT_EQ(e.cause(), FailureCause::step_count);
    EXPECT_EQ(e.partial().samples.size(), 101u);
    EXPECT_NEAR(e.partial().back().t, 0.1, 1e-12);
  }
}

TEST(Simulate, SpeedBoundFailureUnderRk4) {
  // A Newtonian-sized step from near c overshoots the guard.
  const State<1> x0{vec1(0), vec1(1.0 - 1e-6)};
  ControlLaw<1> law{OpenLoopVirtual<1>{[](double) { return vec1(1.0); }}};
  try {
    integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, {}, rk4(1e-2, 1.0), x0);
    FAIL() << "expected IntegrationFailure";
  } catch (const IntegrationFailure<1>& e) {
    EXPECT_EQ(e.cause(), FailureCause::speed_bound);
    EXPECT_GE(e.partial().samples.size(), 1u);
  }
}

TEST(Simulate, Deterministic) {
  StateFeedbackGain<3> g;
  g.K.leftCols<3>() = 2.0 * Eigen::Matrix3d::Identity();
  g.K.rightCols<3>() = 3.0 * Eigen::Matrix3d::Identity();
  ControlLaw<3> law{StateFeedbackLaw<3>{g}};
  const State<3> x0{Vec3(1, -0.5, 0.2), Vec3(0.3, 0.4, 0)};
  const auto a = integrate_closed_loop<3>({kUnit, Flavor::relativistic}, law, {}, rk4(1e-3, 2.0), x0);
  const auto b = integrate_closed_loop<3>({kUnit, Flavor::relativistic}, law, {}, rk4(1e-3, 2.0), x0);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].x, b.samples[i].x);
    EXPECT_EQ(a.samples[i].u, b.samples[i].u);
  }
}

TEST(Simulate, WrappedStateFeedbackFollowsLinearModel) {
  StateFeedbackGain<3> g;
  g.K.leftCols<3>() = 2.0 * Eigen::Matrix3d::Identity();
  g.K.rightCols<3>() = 3.0 * Eigen::Matrix3d::Identity();
  const PhysConsts k(1.0, 2.0);
  ControlLaw<3> law{StateFeedbackLaw<3>{g}};
  const State<3> x0{Vec3(0, 0, 0), Vec3(0.5, 0.3, -0.2)};
  const auto traj = integrate_closed_loop<3>({k, Flavor::relativistic}, law, {}, rk4(1e-3, 4.0), x0);
  const auto lin = linearized_model<3>(k);
  const Eigen::Matrix<double, 6, 6> acl = lin.A - lin.B * g.K;
  for (std::size_t i = 0; i < traj.samples.size(); i += 250) {
    const auto& s = traj.samples[i];
    const Eigen::Matrix<double, 6, 6> phi = (acl * s.t).exp();
    EXPECT_LE((s.x.stacked() - phi * x0.stacked()).norm(), 1e-9) << "t=" << s.t;
  }
}

TEST(Simulate, ReferenceStepTracked) {
  StateFeedbackGain<1> g;
  g.K << 4, 4;
  ControlLaw<1> law{StateFeedbackLaw<1>{g}};
  Reference<1> ref{{{0.0, vec1(0)}, {1.0, vec1(0.5)}}};
  const auto traj = integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, ref, rk4(1e-3, 12.0), {});
  EXPECT_NEAR(traj.samples[500].x.p(0), 0.0, 1e-15);
  EXPECT_NEAR(traj.back().x.p(0), 0.5, 1e-6);
  EXPECT_NEAR(traj.back().e(0), 0.0, 1e-6);
}

TEST(Simulate, ContinuousPidIntegratesError) {
  ControlLaw<1> law{PidLaw<1>{PidGains<1>::uniform(4, 1, 3)}};
  const auto traj = integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, Reference<1>::constant(vec1(1.0)),
                                             rk4(1e-3, 30.0), {});
  EXPECT_NEAR(traj.back().x.p(0), 1.0, 1e-4);
  for (const auto& s : traj.samples) EXPECT_LT(std::abs(s.x.v(0)), 1.0);
}

TEST(Simulate, ZeroOrderHoldKeepsForcePiecewiseConstant) {
  ControlLaw<1> law{PidLaw<1>{PidGains<1>::uniform(2, 0.5, 2)}};
  law.zoh_dt = 0.05;
  const auto traj =
      integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, Reference<1>::constant(vec1(1.0)), rk4(1e-2, 20.0), {});
  // Five rk4 steps per hold interval: u changes only on interval boundaries.
  for (std::size_t i = 1; i + 1 < traj.samples.size(); ++i) {
    if (i % 5 != 0) {
      EXPECT_EQ(traj.samples[i].u(0), traj.samples[i + 1].u(0)) << i;
    }
  }
  EXPECT_NEAR(traj.back().x.p(0), 1.0, 5e-3);
}

TEST(Simulate, BackwardDifferenceDerivative) {
  ControlLaw<1> law{PidLaw<1>{PidGains<1>::uniform(2, 0, 2)}};
  law.zoh_dt = 0.01;
  law.derivative_source = DerivativeSource::backward_difference;
  const auto traj =
      integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, Reference<1>::constant(vec1(0.5)), rk4(1e-3, 20.0), {});
  EXPECT_NEAR(traj.back().x.p(0), 0.5, 1e-3);
}

TEST(Simulate, ForceSaturation) {
  StateFeedbackGain<1> g;
  g.K << 100, 20;
  ControlLaw<1> law{StateFeedbackLaw<1>{g}};
  law.force_limit = 0.5;
  const auto traj =
      integrate_closed_loop<1>({kUnit, Flavor::relativistic}, law, Reference<1>::constant(vec1(1.0)), rk4(1e-3, 2.0), {});
  for (const auto& s : traj.samples) EXPECT_LE(std::abs(s.u(0)), 0.5 + 1e-15);
  EXPECT_DOUBLE_EQ(traj.samples.front().u(0), 0.5);
}

TEST(Simulate, UnwrappedLawOnNewtonianPlantIsLinear) {
  StateFeedbackGain<1> g;
  g.K << 2, 3;
  const PhysConsts k(1.0, 1.0);
  ControlLaw<1> law{StateFeedbackLaw<1>{g}};
  law.wrapped = false;
  const State<1> x0{vec1(1.0), vec1(0.0)};
  const auto traj = integrate_closed_loop<1>({k, Flavor::newtonian}, law, {}, rk4(1e-3, 3.0), x0);
  // Poles -1 and -2: p(t) = 2 e^{-t} - e^{-2t}.
  EXPECT_NEAR(traj.back().x.p(0), 2.0 * std::exp(-3.0) - std::exp(-6.0), 1e-11);
}

}  // namespace
}  // namespace relkit
