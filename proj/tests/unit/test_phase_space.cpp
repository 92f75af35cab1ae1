#include "vpcontrol/phase_space.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace vpc;

namespace {

// mpmath, 30 digits: (4 pi int_0^1 r^2 (1 - r^2)^4 dr)^2 and the L2 analogue
constexpr double kBumpL1 = 0.21549301101046905;
constexpr double kBumpL2Sq = 0.03924799276648348;

}  // namespace

TEST(InitialDatum, ProfileValues) {
  InitialDatum d;
  EXPECT_EQ(d(PhasePoint{Vec3::Zero(), Vec3::Zero()}), 1.0);
  // (1 - 0.25)^4 (1 - 0)^4
  EXPECT_DOUBLE_EQ(d(PhasePoint{Vec3(0.5, 0, 0), Vec3::Zero()}), 0.31640625);
  EXPECT_DOUBLE_EQ(d(PhasePoint{Vec3(0, 0.5, 0), Vec3(0, 0, 0.5)}), 0.31640625 * 0.31640625);
  EXPECT_EQ(d(PhasePoint{Vec3(1.0, 0, 0), Vec3::Zero()}), 0.0);
  EXPECT_EQ(d(PhasePoint{Vec3::Zero(), Vec3(0, 2, 0)}), 0.0);
}

TEST(InitialDatum, ScalesWithAmplitudeAndRadii) {
  InitialDatum d{3.0, 2.0, 0.5};
  EXPECT_DOUBLE_EQ(d(PhasePoint{Vec3(1.0, 0, 0), Vec3(0, 0.25, 0)}), 3.0 * 0.31640625 * 0.31640625);
  EXPECT_DOUBLE_EQ(eval_initial_datum(d, PhasePoint{Vec3::Zero(), Vec3::Zero()}), 3.0);
}

TEST(InitialDatum, Validation) {
  EXPECT_THROW((InitialDatum{-1.0, 1.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((InitialDatum{1.0, 0.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((InitialDatum{1.0, 1.0, -2.0}.validate()), InvalidArgument);
  EXPECT_THROW((InitialDatum{NAN, 1.0, 1.0}.validate()), InvalidArgument);
  EXPECT_NO_THROW((InitialDatum{0.0, 1.0, 1.0}.validate()));
}

TEST(InitialDatum, NonnegativeEverywhere) {
  InitialDatum d{2.0, 1.0, 1.5};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const PhasePoint z{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    EXPECT_GE(d(z), 0.0);
    if (z.x.norm() >= 1.0 || z.v.norm() >= 1.5) EXPECT_EQ(d(z), 0.0);
  }
}

TEST(SampleEnsemble, LatticeStructure) {
  InitialDatum d;
  const auto ens = sample_ensemble(d, 0.5);
  // |m| * 0.5 < 1 per ball: 27 points each
  ASSERT_EQ(ens.size(), 27u * 27u);
  EXPECT_EQ(ens.weight, std::pow(0.5, 6));
  EXPECT_EQ(ens.spacing, 0.5);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    EXPECT_EQ(ens.values[i], d(ens.origins[i]));
    EXPECT_EQ(ens.points[i].x, ens.origins[i].x);
    EXPECT_LT(ens.origins[i].x.norm(), 1.0);
    EXPECT_LT(ens.origins[i].v.norm(), 1.0);
    for (int a = 0; a < 3; ++a) {
      EXPECT_EQ(std::fmod(ens.origins[i].x[a], 0.5), 0.0);
      EXPECT_EQ(std::fmod(ens.origins[i].v[a], 0.5), 0.0);
    }
  }
}

TEST(SampleEnsemble, RejectsCoarseSpacing) {
  EXPECT_THROW(sample_ensemble(InitialDatum{}, 1.0), InvalidArgument);
  EXPECT_THROW(sample_ensemble(InitialDatum{}, 0.0), InvalidArgument);
  EXPECT_THROW(sample_ensemble(InitialDatum{}, -0.1), InvalidArgument);
  EXPECT_NO_THROW(sample_ensemble(InitialDatum{}, 0.99));
}

TEST(SampleEnsemble, VacuumKeepsLattice) {
  const auto ens = sample_ensemble(InitialDatum{0.0, 1.0, 1.0}, 0.5);
  EXPECT_EQ(ens.size(), 27u * 27u);
  for (double f : ens.values) EXPECT_EQ(f, 0.0);
  EXPECT_EQ(lp_norm(ens, 1.0), 0.0);
  EXPECT_EQ(lp_norm(ens, kInfNorm), 0.0);
}

TEST(LpNorm, QuadratureMatchesOracle) {
  const auto ens = sample_ensemble(InitialDatum{}, 0.25);
  EXPECT_NEAR(lp_norm(ens, 1.0), kBumpL1, 1e-3 * kBumpL1);
  EXPECT_NEAR(lp_norm(ens, 2.0) * lp_norm(ens, 2.0), kBumpL2Sq, 1e-3 * kBumpL2Sq);
  EXPECT_EQ(lp_norm(ens, kInfNorm), 1.0);
}

TEST(LpNorm, Homogeneity) {
  const auto e1 = sample_ensemble(InitialDatum{1.0, 1.0, 1.0}, 0.5);
  const auto e3 = sample_ensemble(InitialDatum{3.0, 1.0, 1.0}, 0.5);
  for (double p : {1.0, 2.0, 3.5, kInfNorm}) EXPECT_NEAR(lp_norm(e3, p), 3.0 * lp_norm(e1, p), 1e-14);
}

TEST(LpNorm, DirectValues) {
  const std::vector<double> v{1.0, 2.0, 2.0};
  EXPECT_DOUBLE_EQ(lp_norm(v, 0.5, 1.0), 2.5);
  EXPECT_DOUBLE_EQ(lp_norm(v, 1.0, 2.0), 3.0);
  EXPECT_EQ(lp_norm(v, 1.0, kInfNorm), 2.0);
  EXPECT_THROW(lp_norm(v, 1.0, 0.5), InvalidArgument);
  EXPECT_THROW(lp_norm(v, 1.0, NAN), InvalidArgument);
  EXPECT_EQ(lp_norm(std::vector<double>{}, 1.0, 2.0), 0.0);
}

TEST(SupportRadii, CountsOnlyPositiveMarkers) {
  std::vector<PhasePoint> pts{{Vec3(3, 0, 0), Vec3(0, 4, 0)}, {Vec3(0, 1, 0), Vec3(0, 0, 2)}};
  std::vector<double> vals{0.0, 1.0};
  const auto r = support_radii(pts, vals);
  EXPECT_EQ(r.Q, 1.0);
  EXPECT_EQ(r.P, 2.0);
  EXPECT_DOUBLE_EQ(r.S, std::sqrt(5.0));
}

TEST(SupportRadii, HistoryIsRunningMaximum) {
  std::vector<PhasePoint> pts{{Vec3(0.5, 0, 0), Vec3(0, 0.5, 0)}};
  std::vector<double> vals{1.0};
  const SupportRadii hist{3.0, 0.1, 0.2};
  const auto r = support_radii(pts, vals, hist);
  EXPECT_EQ(r.P, 3.0);
  EXPECT_EQ(r.Q, 0.5);
  EXPECT_DOUBLE_EQ(r.S, std::sqrt(0.5));
}

TEST(SupportRadii, InitialEnsembleInsideSupport) {
  const auto ens = sample_ensemble(InitialDatum{1.0, 1.5, 0.7}, 0.25);
  const auto r = support_radii(ens);
  EXPECT_LT(r.Q, 1.5);
  EXPECT_LT(r.P, 0.7);
  EXPECT_LE(r.S, std::hypot(r.Q, r.P) + 1e-15);
}
