#include "vpcontrol/fields.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace vpc;

namespace {

// mpmath, 30 digits, unit sigma Gaussian g = exp(-|x|^2 / 2):
//   int g^2 + |grad g|^2 = 2.5 pi^{3/2},   int |grad g|^2 = 1.5 pi^{3/2}
//   sum_{|alpha| <= 2} int |d^alpha g|^6 = 3.142937863609616
constexpr double kH2Unit = 13.920819992079270;
constexpr double kDx2Unit = 8.352491995247562;
constexpr double kW6Unit = 3.1429378636096163;
// k = (0.5, 0, 0): int g^2 cos^2(k.x) and int |grad(g cos(k.x))|^2
constexpr double kWaveValue2 = 4.9524731005813346;
constexpr double kWaveGrad2 = 8.1247506504759654;

FieldParams unit_mode(double sigma = 1.0, std::vector<double> theta = {1.0, 1.0}) {
  FieldParams p;
  FieldMode m;
  m.sigma = sigma;
  p.modes = {m};
  p.theta = std::move(theta);
  return p;
}

}  // namespace

TEST(FieldParams, Validation) {
  auto p = unit_mode();
  EXPECT_NO_THROW(p.validate());
  auto bad = p;
  bad.beta = 3.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.K = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.theta.push_back(1.0);
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.modes[0].direction = Vec3::Zero();
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.theta[0] = INFINITY;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.n_time_knots = 1;
  bad.theta = {1.0};
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(FieldParams, PiecewiseLinearCoefficients) {
  FieldParams p = unit_mode(1.0, {0.0, 2.0, -1.0});
  p.n_time_knots = 3;
  p.T = 2.0;
  double c = 0.0;
  std::span<double> out(&c, 1);
  p.coefficients(0.0, out);
  EXPECT_EQ(c, 0.0);
  p.coefficients(0.5, out);
  EXPECT_DOUBLE_EQ(c, 1.0);
  p.coefficients(1.0, out);
  EXPECT_DOUBLE_EQ(c, 2.0);
  p.coefficients(1.5, out);
  EXPECT_DOUBLE_EQ(c, 0.5);
  p.coefficients(2.0, out);
  EXPECT_DOUBLE_EQ(c, -1.0);
  EXPECT_THROW(p.coefficients(-0.1, out), InvalidArgument);
  EXPECT_THROW(p.coefficients(2.1, out), InvalidArgument);
}

TEST(EvalField, ZeroAndEmpty) {
  FieldParams none;
  EXPECT_EQ(eval_field(none, 0.3, Vec3(1, 2, 3)), Vec3::Zero());
  auto z = FieldParams::zero_like(unit_mode());
  EXPECT_EQ(eval_field(z, 0.3, Vec3(0.1, 0.2, 0.3)), Vec3::Zero());
}

TEST(EvalField, GaussianEnvelope) {
  auto p = unit_mode(2.0, {0.5, 1.5});
  const Vec3 at0 = eval_field(p, 0.5, Vec3::Zero());
  EXPECT_DOUBLE_EQ(at0.z(), 1.0);
  EXPECT_EQ(at0.x(), 0.0);
  const Vec3 at_sigma = eval_field(p, 0.5, Vec3(0, 2.0, 0));
  EXPECT_NEAR(at_sigma.z(), std::exp(-0.5), 1e-15);
}

TEST(EvalField, WaveAndPhase) {
  FieldParams p;
  FieldMode m;
  m.k = Vec3(0.5, 0, 0);
  m.direction = Vec3(0, 1, 0);
  m.phase = 0.3;
  m.sigma = 1.5;
  p.modes = {m};
  p.theta = {2.0, 2.0};
  const Vec3 x(0.7, -0.2, 0.4);
  const double expect = 2.0 * std::exp(-x.squaredNorm() / (2 * 1.5 * 1.5)) * std::cos(0.5 * 0.7 + 0.3);
  EXPECT_NEAR(eval_field(p, 0.2, x).y(), expect, 1e-15);
}

TEST(EvalField, JacobianMatchesFiniteDifferences) {
  RandomFieldSpec spec;
  const auto p = random_admissible_field(spec, 11);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 x(u(rng), u(rng), u(rng));
    const double t = 0.5 * (1.0 + 0.5 * u(rng));
    const auto d = eval_field_jacobian(p, t, x);
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      const Vec3 fd = (eval_field(p, t, x + e) - eval_field(p, t, x - e)) / (2 * h);
      for (int i = 0; i < 3; ++i) EXPECT_NEAR(d.jacobian(i, a), fd[i], 1e-6);
      for (int b = 0; b < 3; ++b) {
        Vec3 f = Vec3::Zero();
        f[b] = h;
        const auto jp = eval_field_jacobian(p, t, x + f).jacobian;
        const auto jm = eval_field_jacobian(p, t, x - f).jacobian;
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(d.hessian[i](a, b), (jp(i, a) - jm(i, a)) / (2 * h), 1e-6);
      }
    }
  }
}

TEST(Norms, GaussianClosedForms) {
  // constant unit coefficient, T = 1
  const auto r = vnorm(unit_mode());
  EXPECT_NEAR(r.h_norm * r.h_norm, kH2Unit, 1e-9 * kH2Unit);
  EXPECT_NEAR(r.w_norm, std::pow(kW6Unit, 1.0 / 6.0), 1e-9);
  EXPECT_DOUBLE_EQ(r.v_norm, r.w_norm + r.h_norm);
  EXPECT_NEAR(dx_b_l2_sq(unit_mode()), kDx2Unit, 1e-9 * kDx2Unit);
}

TEST(Norms, LinearInTimeCoefficients) {
  // int_0^1 (a (1 - t) + b t)^2 dt = (a^2 + a b + b^2) / 3
  const double a = 0.3, b = -0.8;
  const double m2 = (a * a + a * b + b * b) / 3.0;
  const auto p = unit_mode(1.0, {a, b});
  const auto r = vnorm(p);
  EXPECT_NEAR(r.h_norm * r.h_norm, kH2Unit * m2, 1e-9);
  EXPECT_NEAR(dx_b_l2_sq(p), kDx2Unit * m2, 1e-9);
}

TEST(Norms, WaveModeClosedForm) {
  FieldParams p = unit_mode();
  p.modes[0].k = Vec3(0.5, 0, 0);
  const auto r = vnorm(p);
  EXPECT_NEAR(r.h_norm * r.h_norm, kWaveValue2 + kWaveGrad2, 1e-9);
  EXPECT_NEAR(dx_b_l2_sq(p), kWaveGrad2, 1e-9);
}

TEST(Norms, SigmaScaling) {
  // int g_sigma^2 = sigma^3 int g_1^2, int |grad g_sigma|^2 = sigma int |grad g_1|^2
  const auto r = vnorm(unit_mode(2.0));
  const double value2 = 8.0 * (kH2Unit - kDx2Unit);
  const double grad2 = 2.0 * kDx2Unit;
  EXPECT_NEAR(r.h_norm * r.h_norm, value2 + grad2, 1e-8);
}

TEST(Norms, Homogeneity) {
  RandomFieldSpec spec;
  const auto p = random_admissible_field(spec, 3);
  const NormQuadrature quad(p.modes, {});
  const auto r1 = vnorm(p, quad);
  const auto r2 = vnorm(scaled(p, -2.5), quad);
  EXPECT_NEAR(r2.v_norm, 2.5 * r1.v_norm, 1e-12 * r1.v_norm);
  EXPECT_NEAR(r2.w_norm, 2.5 * r1.w_norm, 1e-12 * r1.w_norm);
  EXPECT_NEAR(dx_b_l2_sq(scaled(p, 3.0), quad), 9.0 * dx_b_l2_sq(p, quad), 1e-12 * dx_b_l2_sq(p, quad) * 9);
}

TEST(Norms, TriangleInequality) {
  RandomFieldSpec spec;
  spec.modes = 2;
  auto b = random_admissible_field(spec, 21);
  auto h = random_admissible_field(spec, 22);
  h.modes = b.modes;
  const NormQuadrature quad(b.modes, {});
  FieldParams s = b;
  for (std::size_t i = 0; i < s.theta.size(); ++i) s.theta[i] += h.theta[i];
  EXPECT_LE(vnorm(s, quad).v_norm, vnorm(b, quad).v_norm + vnorm(h, quad).v_norm + 1e-12);
}

TEST(Norms, QuadratureRejectsAliasing) {
  FieldParams p = unit_mode();
  p.modes[0].k = Vec3(20.0, 0, 0);
  EXPECT_THROW(vnorm(p), InvalidArgument);
}

TEST(Norms, EmbeddingRatioFinite) {
  RandomFieldSpec spec;
  const auto p = random_admissible_field(spec, 8);
  const NormQuadrature quad(p.modes, {});
  const double r = embedding_ratio(p, quad);
  EXPECT_TRUE(std::isfinite(r));
  EXPECT_GT(r, 0.0);
}

TEST(Projection, IntoBall) {
  auto p = unit_mode(2.0, {3.0, 4.0});
  p.K = 1.0;
  const auto q = project_to_ball(p);
  EXPECT_LE(vnorm(q).v_norm, p.K * (1 + 1e-12));
  EXPECT_NEAR(vnorm(q).v_norm, p.K, 1e-12);
  EXPECT_NEAR(q.theta[1] / q.theta[0], 4.0 / 3.0, 1e-14);
  const auto inside = unit_mode(2.0, {0.01, 0.02});
  EXPECT_EQ(project_to_ball(inside).theta, inside.theta);
  // idempotent
  EXPECT_EQ(project_to_ball(q).theta, q.theta);
}

TEST(Difference, SameAndMixedStructure) {
  auto b = unit_mode(1.0, {1.0, 2.0});
  auto h = unit_mode(1.0, {0.5, 0.5});
  const auto d = field_difference(b, h);
  EXPECT_EQ(d.modes.size(), 1u);
  EXPECT_EQ(d.theta, (std::vector<double>{0.5, 1.5}));
  EXPECT_EQ(w_distance(b, b), 0.0);

  auto g = h;
  g.modes[0].k = Vec3(0.3, 0, 0);
  const auto mixed = field_difference(b, g);
  EXPECT_EQ(mixed.modes.size(), 2u);
  EXPECT_EQ(mixed.theta, (std::vector<double>{1.0, 2.0, -0.5, -0.5}));
  const Vec3 x(0.2, 0.1, -0.3);
  EXPECT_NEAR((eval_field(mixed, 0.4, x) - (eval_field(b, 0.4, x) - eval_field(g, 0.4, x))).norm(), 0.0, 1e-15);
}

TEST(RandomField, AdmissibleAndSeeded) {
  RandomFieldSpec spec;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = random_admissible_field(spec, seed);
    const double v = vnorm(p).v_norm;
    EXPECT_GE(v, spec.norm_low * spec.K * (1 - 1e-12));
    EXPECT_LE(v, spec.norm_high * spec.K * (1 + 1e-12));
  }
  EXPECT_EQ(random_admissible_field(spec, 9).theta, random_admissible_field(spec, 9).theta);
  EXPECT_NE(random_admissible_field(spec, 9).theta, random_admissible_field(spec, 10).theta);
}

TEST(FieldFile, RoundTrip) {
  RandomFieldSpec spec;
  const auto p = random_admissible_field(spec, 4);
  const auto path = (std::filesystem::temp_directory_path() / "vpc_field_roundtrip.json").string();
  write_field_file(path, p);
  const auto q = read_field_file(path);
  EXPECT_TRUE(p.same_structure(q));
  EXPECT_EQ(p.theta, q.theta);
  EXPECT_EQ(p.beta, q.beta);
  EXPECT_EQ(p.K, q.K);
  std::filesystem::remove(path);
}

TEST(FieldFile, Errors) {
  try {
    read_field_file("/nonexistent/field.json");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "config-reference");
  }
  nlohmann::json j = field_to_json(unit_mode());
  j["modes"][0]["coefficients"] = {1.0};
  EXPECT_THROW(field_from_json(j), InvalidArgument);
  j.erase("beta");
  EXPECT_THROW(field_from_json(j), InvalidArgument);
}
