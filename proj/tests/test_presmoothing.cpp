#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "afpca/presmoothing.hpp"
#include "afpca/simulator.hpp"

using namespace afpca;

namespace {

Curve noisy_line(double sd, std::mt19937_64& rng, int m = 100) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, sd);
  std::vector<double> t(static_cast<std::size_t>(m));
  for (auto& x : t) x = u(rng);
  std::sort(t.begin(), t.end());
  std::vector<double> y(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) y[k] = t[k] + z(rng);
  return {0, t, y};
}

}  // namespace

TEST(PresmoothedCurve, InterpolatesAnchorsAndIsAffineBetween) {
  const PresmoothedCurve p({0.0, 0.3, 0.7, 1.0}, {1.0, -1.0, 2.0, 0.5});
  EXPECT_DOUBLE_EQ(p(0.3), -1.0);
  EXPECT_DOUBLE_EQ(p(0.7), 2.0);
  EXPECT_DOUBLE_EQ(p(0.5), 0.5);
  for (double a = 0.31; a < 0.68; a += 0.01) {
    const double d2 = p(a + 0.01) - 2.0 * p(a) + p(a - 0.01);
    EXPECT_NEAR(d2, 0.0, 1e-10);
  }
}

TEST(GeometricGrid, EndpointsAndRatio) {
  const auto g = geometric_grid(0.01, 0.5, 20);
  ASSERT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_DOUBLE_EQ(g.back(), 0.5);
  for (std::size_t k = 2; k < g.size(); ++k) EXPECT_NEAR(g[k] / g[k - 1], g[1] / g[0], 1e-12);
  const auto d = default_lscv_candidates(100.0);
  EXPECT_DOUBLE_EQ(d.front(), 0.02);
  EXPECT_DOUBLE_EQ(d.back(), 0.5);
}

TEST(Lscv, ConstantSignalPicksSmallestFeasible) {
  const Curve c(0, {0.1, 0.2, 0.3, 0.6, 0.9}, {2, 2, 2, 2, 2});
  const std::vector<double> cands{0.01, 0.05, 0.15, 0.4};
  // 0.01 and 0.05 leave every leave-one-out window empty; 0.15 is the smallest feasible candidate
  EXPECT_DOUBLE_EQ(lscv_bandwidth(c, cands), 0.15);
  bool feasible = true;
  (void)lscv_score(c, 0.01, Kernel{}, feasible);
  EXPECT_FALSE(feasible);
  (void)lscv_score(c, 0.15, Kernel{}, feasible);
  EXPECT_TRUE(feasible);
}

TEST(Lscv, ConstantSignalTiesResolveToSmallest) {
  const Curve c(0, {0.1, 0.15, 0.2, 0.25, 0.3}, {2, 2, 2, 2, 2});
  EXPECT_DOUBLE_EQ(lscv_bandwidth(c, std::vector<double>{0.4, 0.06, 0.2}), 0.06);
}

TEST(Lscv, RequiresThreeObservations) {
  EXPECT_THROW(lscv_bandwidth(Curve(0, {0.1, 0.2}, {1, 2}), std::vector<double>{0.1}), std::invalid_argument);
}

TEST(Lscv, AllCandidatesInfeasibleSignals) {
  const Curve c(0, {0.1, 0.5, 0.9}, {1, 2, 3});
  EXPECT_THROW(lscv_bandwidth(c, std::vector<double>{0.01, 0.02}), InfeasibleError);
}

TEST(Lscv, MoreNoiseSelectsLargerBandwidth) {
  std::mt19937_64 rng(21);
  const auto cands = default_lscv_candidates(100.0);
  int larger = 0;
  for (int r = 0; r < 50; ++r) {
    const double loud = lscv_bandwidth(noisy_line(0.5, rng), cands);
    const double quiet = lscv_bandwidth(noisy_line(0.05, rng), cands);
    larger += loud > quiet;
  }
  EXPECT_GE(larger, 40);
}

TEST(Lscv, PureNoisePrefersWideWindow) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  int wide = 0;
  for (int r = 0; r < 101; ++r) {
    std::vector<double> t(10), y(10);
    for (auto& x : t) x = u(rng);
    std::sort(t.begin(), t.end());
    for (auto& x : y) x = z(rng);
    wide += lscv_bandwidth(Curve(0, t, y), std::vector<double>{0.01, 0.5}) == 0.5;
  }
  EXPECT_GT(wide, 50);
}

TEST(LowerMedian, EvenCountTakesLower) {
  EXPECT_DOUBLE_EQ(lower_median({4.0, 1.0, 3.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(lower_median({5.0, 1.0, 3.0}), 3.0);
  EXPECT_THROW(lower_median({}), std::invalid_argument);
}

TEST(PresmoothCurve, AnchorsAtZeroObservationsAndOne) {
  const Curve c(0, {0.2, 0.4, 0.6}, {1.0, 2.0, 3.0});
  const auto p = presmooth_curve(c, 0.05);
  EXPECT_EQ(std::vector<double>(p.anchor_times().begin(), p.anchor_times().end()),
            (std::vector<double>{0.0, 0.2, 0.4, 0.6, 1.0}));
  // windows at 0 and 1 are empty, so the boundary anchors copy their neighbours
  EXPECT_DOUBLE_EQ(p(0.0), 1.0);
  EXPECT_DOUBLE_EQ(p(1.0), 3.0);
  EXPECT_DOUBLE_EQ(p(0.4), smooth_at(c, 0.4, 0.05).value());
}

TEST(PresmoothSample, SubsetIsWholeSampleWhenSizesMatch) {
  MfbmSpec spec;
  spec.sigma0 = 0.2;
  const auto s = simulate(spec, {DesignKind::IndependentUniformPoisson, 30.0, 20}, 3);
  const auto a = presmooth_sample(s, 20, Kernel{}, 1);
  const auto b = presmooth_sample(s, 20, Kernel{}, 999);
  EXPECT_EQ(a.bandwidth, b.bandwidth);
  auto sub = a.subset;
  std::sort(sub.begin(), sub.end());
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(sub[i], i);
}

TEST(PresmoothSample, IdenticalCurvesShareTheirChoice) {
  const Curve c(0, {0.05, 0.2, 0.3, 0.45, 0.5, 0.7, 0.8, 0.95}, {0.1, 0.5, -0.2, 0.3, 0.9, -0.4, 0.2, 0.0});
  std::vector<Curve> cs;
  for (int i = 0; i < 6; ++i) cs.emplace_back(i, std::vector<double>(c.times().begin(), c.times().end()),
                                              std::vector<double>(c.values().begin(), c.values().end()));
  const FunctionalSample s(cs, Design::Common);
  const auto r = presmooth_sample(s, 4, Kernel{}, 7);
  EXPECT_EQ(r.bandwidth, lscv_bandwidth(c, default_lscv_candidates(8.0)));
}

TEST(PresmoothSample, DeterministicForSeed) {
  MfbmSpec spec;
  spec.sigma0 = 0.3;
  const auto s = simulate(spec, {DesignKind::IndependentUniformPoisson, 40.0, 60}, 8);
  const auto a = presmooth_sample(s, 20, Kernel{}, 42);
  const auto b = presmooth_sample(s, 20, Kernel{}, 42);
  EXPECT_EQ(a.bandwidth, b.bandwidth);
  EXPECT_EQ(a.subset, b.subset);
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_TRUE(std::equal(a.curves[i].anchor_values().begin(), a.curves[i].anchor_values().end(),
                           b.curves[i].anchor_values().begin()));
}

TEST(PresmoothSample, ShortCurvesNotEligible) {
  std::vector<Curve> cs{Curve(0, {0.3, 0.6}, {1, 2}), Curve(1, {0.5}, {1.0}), Curve(2, {0.1, 0.4, 0.8}, {1, 0, 1})};
  const auto r = presmooth_sample(FunctionalSample(cs, Design::Independent), 20, Kernel{}, 0);
  EXPECT_EQ(r.subset, (std::vector<std::size_t>{2}));
  std::vector<Curve> tiny{Curve(0, {0.3, 0.6}, {1, 2}), Curve(1, {0.5}, {1.0})};
  EXPECT_THROW(presmooth_sample(FunctionalSample(tiny, Design::Independent), 20, Kernel{}, 0), InfeasibleError);
}
