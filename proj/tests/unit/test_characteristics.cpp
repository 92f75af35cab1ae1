#include "vpcontrol/characteristics.hpp"
#include "vpcontrol/fields.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace vpc;

namespace {

double distance(const PhasePoint& a, const PhasePoint& b) {
  return std::sqrt((a.x - b.x).squaredNorm() + (a.v - b.v).squaredNorm());
}

AnalyticForces swirling_forces() {
  return {[](double s, const Vec3& x) { return Vec3(-x.x() + 0.3 * s, std::sin(x.z()), -0.5 * x.y() * x.y()); },
          [](double s, const Vec3& x) { return Vec3(0.5 + x.y(), std::cos(s) * x.z(), 1.2 - 0.4 * x.x()); }};
}

}  // namespace

TEST(Boris, PreservesSpeedWithoutElectricForce) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 500; ++t) {
    const Vec3 v(u(rng), u(rng), u(rng)), g(u(rng), u(rng), u(rng));
    const Vec3 w = boris_velocity(v, Vec3::Zero(), g, 0.37);
    EXPECT_NEAR(w.norm(), v.norm(), 1e-14 * (1.0 + v.norm()));
  }
}

TEST(Boris, ReducesToKickWithoutMagneticField) {
  const Vec3 v(1, 2, 3), f(0.5, -1, 2);
  EXPECT_NEAR((boris_velocity(v, f, Vec3::Zero(), 0.2) - (v + 0.2 * f)).norm(), 0.0, 1e-15);
}

TEST(Flow, FreeStreamingIsExact) {
  const PhasePoint z{Vec3(0.1, -0.2, 0.3), Vec3(1.0, 0.5, -2.0)};
  const auto out = integrate_flow(z, 1.3, 0.2, AnalyticForces{}, 0.07);
  EXPECT_NEAR((out.x - (z.x + 1.1 * z.v)).norm(), 0.0, 1e-14);
  EXPECT_EQ(out.v, z.v);
}

TEST(Flow, UniformAccelerationIsExact) {
  const Vec3 f(0.3, -1.0, 0.25);
  const PhasePoint z{Vec3(0, 1, 0), Vec3(0.5, 0, -0.5)};
  const auto out = integrate_flow(z, 0.8, 0.0, constant_forces(f, Vec3::Zero()), 0.1);
  EXPECT_NEAR((out.x - (z.x + 0.8 * z.v + 0.32 * f)).norm(), 0.0, 1e-14);
  EXPECT_NEAR((out.v - (z.v + 0.8 * f)).norm(), 0.0, 1e-14);
}

TEST(Flow, GyrationInUniformMagneticField) {
  // v' = v x B, B = b e_z: rotation of v at angular rate -b
  const double b = 2.0, t = 1.5;
  const PhasePoint z{Vec3::Zero(), Vec3(1, 0, 0.3)};
  const auto out = integrate_flow(z, t, 0.0, constant_forces(Vec3::Zero(), Vec3(0, 0, b)), 1e-3);
  const Vec3 v_exact(std::cos(b * t), -std::sin(b * t), 0.3);
  const Vec3 x_exact(std::sin(b * t) / b, (std::cos(b * t) - 1.0) / b, 0.3 * t);
  EXPECT_LT((out.v - v_exact).norm(), 1e-4);
  EXPECT_LT((out.x - x_exact).norm(), 1e-4);
  EXPECT_NEAR(out.v.norm(), z.v.norm(), 1e-13);
}

TEST(Flow, SecondOrderConvergence) {
  const auto forces = swirling_forces();
  const PhasePoint z{Vec3(0.2, 0.1, -0.3), Vec3(0.4, -0.2, 0.6)};
  const auto ref = integrate_flow(z, 1.0, 0.0, forces, 1e-4);
  const double e1 = distance(integrate_flow(z, 1.0, 0.0, forces, 0.02), ref);
  const double e2 = distance(integrate_flow(z, 1.0, 0.0, forces, 0.01), ref);
  EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(Flow, ReversibleToRoundoff) {
  const auto forces = swirling_forces();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const PhasePoint z{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    const auto fwd = integrate_flow(z, 1.0, 0.0, forces, 0.01);
    const auto back = integrate_flow(fwd, 0.0, 1.0, forces, 0.01);
    EXPECT_LT(distance(back, z), 1e-12);
  }
}

TEST(Flow, IdentityAtEqualTimes) {
  const PhasePoint z{Vec3(1, 2, 3), Vec3(4, 5, 6)};
  const auto out = integrate_flow(z, 0.4, 0.4, swirling_forces(), 0.01);
  EXPECT_EQ(out.x, z.x);
  EXPECT_EQ(out.v, z.v);
}

TEST(Flow, VolumePreserving) {
  const auto forces = swirling_forces();
  const PhasePoint z{Vec3(0.3, -0.1, 0.2), Vec3(-0.5, 0.2, 0.1)};
  EXPECT_NEAR(flow_jacobian_det(z, 1.0, 0.0, forces, 0.01, 1e-5), 1.0, 1e-8);
}

TEST(Flow, JacobianOfFreeStreaming) {
  const PhasePoint z{Vec3(0.3, -0.1, 0.2), Vec3(-0.5, 0.2, 0.1)};
  const Mat6 jac = flow_jacobian(z, 0.75, 0.0, AnalyticForces{}, 0.1, 1e-4);
  Mat6 expect = Mat6::Identity();
  expect.block<3, 3>(0, 3) = 0.75 * Mat3::Identity();
  EXPECT_LT((jac - expect).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(flow_jacobian(z, 1.0, 0.0, AnalyticForces{}, 0.1, 0.0), InvalidArgument);
}

TEST(Flow, ControlFieldPreservesSpeed) {
  FieldParams p;
  p.modes = {FieldMode{Vec3(0.3, 0, 0.1), Vec3(0, 1, 1).normalized(), 2.0, 0.4}};
  p.n_time_knots = 2;
  p.theta = {1.5, -2.0};
  const AnalyticForces forces{nullptr, [&](double s, const Vec3& x) { return eval_field(p, s, x); }};
  const PhasePoint z{Vec3(0.5, 0.5, 0), Vec3(1, -1, 0.5)};
  const auto out = integrate_flow(z, 1.0, 0.0, forces, 0.01);
  EXPECT_NEAR(out.v.norm(), z.v.norm(), 1e-13);
}

TEST(StepCount, CoversInterval) {
  EXPECT_EQ(step_count(1.0, 0.0, 0.01), 100);
  EXPECT_EQ(step_count(0.0, 1.0, 0.3), 4);
  EXPECT_EQ(step_count(0.5, 0.5, 0.1), 1);
  EXPECT_EQ(step_count(0.3, 0.0, 0.1), 3);
  EXPECT_THROW(step_count(0.0, 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(step_count(0.0, 1.0, NAN), InvalidArgument);
}

TEST(Trace, RecordsTaggedParticlesOnly) {
  TrajectoryTrace tr;
  tr.tags = {1, 5};
  std::vector<PhasePoint> pts(3, PhasePoint{Vec3(1, 2, 3), Vec3(4, 5, 6)});
  tr.record(0.5, pts);
  ASSERT_EQ(tr.rows.size(), 1u);
  EXPECT_EQ(tr.rows[0].particle, 1u);
  const auto path = (std::filesystem::temp_directory_path() / "vpc_trace_test.csv").string();
  tr.write_csv(path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "s,particle,x0,x1,x2,v0,v1,v2");
  EXPECT_EQ(row, "0.5,1,1,2,3,4,5,6");
  std::filesystem::remove(path);
}
