#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "afpca/simulator.hpp"

using namespace afpca;

TEST(LogGamma, MatchesStandardLibrary) {
  for (int i = 1; i < 300; ++i) {
    const double x = i / 100.0;
    EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-12) << x;
  }
  for (double x : {1e-3, 3.7, 10.0, 50.0})
    EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-12 * std::max(1.0, std::abs(std::lgamma(x)))) << x;
  EXPECT_THROW((void)log_gamma(0.0), std::domain_error);
}

TEST(DFactor, Values) {
  EXPECT_DOUBLE_EQ(d_factor(0.5, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(d_factor(0.2, 0.2), 0.5);
  const double pi = std::numbers::pi, x = 0.3, y = 0.7;
  const double expected = std::sqrt(std::tgamma(2 * x + 1) * std::tgamma(2 * y + 1)) / std::tgamma(x + y + 1) *
                          std::sqrt(std::sin(pi * x) * std::sin(pi * y)) / (2 * std::sin(pi * (x + y) / 2));
  EXPECT_NEAR(d_factor(x, y), expected, 1e-10);
  EXPECT_DOUBLE_EQ(d_factor(x, y), d_factor(y, x));
  EXPECT_THROW((void)d_factor(0.0, 0.5), std::domain_error);
}

TEST(Deformation, IdentityWithoutTarget) {
  MfbmSpec spec;
  const Deformation d(spec);
  for (double t : {0.0, 0.123, 0.5, 1.0}) {
    EXPECT_NEAR(d.A(t), t, 1e-14);
    EXPECT_DOUBLE_EQ(d.tau(t), 1.0);
  }
}

TEST(Deformation, VarianceTargetExponential) {
  MfbmSpec spec;
  spec.m2_target = constant_function(1.0);
  spec.A0 = 1.0;
  const Deformation d(spec);
  for (double t : {0.0, 0.3, 0.77, 1.0}) {
    EXPECT_NEAR(d.A(t), std::exp(t), 1e-12);
    EXPECT_NEAR(d.tau(t), std::exp(-t / 2.0), 1e-12);
    EXPECT_NEAR(covariance_CA(spec, t, t), 1.0, 1e-12);
  }
  spec.A0 = 0.0;
  EXPECT_THROW(Deformation{spec}, std::invalid_argument);
}

TEST(Deformation, SimpsonOnNonlinearRate) {
  MfbmSpec spec;
  spec.L = [](double t) { return 1.0 + t; };
  spec.A0 = 0.25;
  // rate (1 + s)^2 integrates to ((1 + t)^3 - 1) / 3
  for (double t : {0.1, 0.6, 1.0}) EXPECT_NEAR(deformation_A(spec, t), 0.25 + (std::pow(1 + t, 3) - 1) / 3, 1e-13);
}

TEST(MfbmCovariance, BrownianIsMinimum) {
  MfbmSpec spec;
  for (double s : {0.0, 0.2, 0.5, 1.0})
    for (double t : {0.0, 0.3, 0.5, 0.9}) EXPECT_EQ(covariance_CA(spec, s, t), std::min(s, t));
}

TEST(MfbmCovariance, ReducesToFractionalBrownianMotion) {
  MfbmSpec spec;
  spec.H = constant_function(0.3);
  const MfbmCovariance c(spec);
  for (double s : {0.1, 0.4, 0.8})
    for (double t : {0.05, 0.4, 1.0}) {
      const double fbm = 0.5 * (std::pow(s, 0.6) + std::pow(t, 0.6) - std::pow(std::abs(s - t), 0.6));
      EXPECT_NEAR(c(s, t), fbm, 1e-12);
    }
}

TEST(MfbmCovariance, LocalIncrementVariance) {
  // E(X_u - X_v)^2 ~ L(t)^2 |u - v|^{2H} for u, v near t
  MfbmSpec spec;
  spec.H = [](double t) { return 0.3 + 0.4 * t; };
  spec.L = [](double t) { return 1.0 + t; };
  const MfbmCovariance c(spec);
  for (double t : {0.2, 0.5, 0.8}) {
    const double d = 1e-4, u = t - d / 2, v = t + d / 2;
    const double theta = c(u, u) + c(v, v) - 2 * c(u, v);
    const double local = std::pow(1.0 + t, 2) * std::pow(d, 2 * (0.3 + 0.4 * t));
    EXPECT_NEAR(theta / local, 1.0, 0.02) << t;
  }
}

TEST(JitteredCholesky, SingularAndIndefinite) {
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 1.0, 1.0, 1.0;
  const auto f = jittered_cholesky(c);
  EXPECT_LT((f * f.transpose() - c).cwiseAbs().maxCoeff(), 1e-8);
  c << 1.0, 2.0, 2.0, 1.0;
  try {
    (void)jittered_cholesky(c);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.stage(), Stage::Simulation);
  }
}

TEST(Design, CommonAndPoisson) {
  auto rng = make_rng(1, SeedStream::Simulation);
  const auto t = draw_times({DesignKind::CommonEquispaced, 5.0, 3}, rng);
  EXPECT_EQ(t, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  for (int r = 0; r < 200; ++r) {
    const auto p = draw_times({DesignKind::IndependentUniformPoisson, 2.0, 3}, rng);
    EXPECT_GE(p.size(), 2u);
    EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
  }
}

TEST(Simulate, DeterministicAcrossThreadCounts) {
  MfbmSpec spec;
  spec.sigma0 = 0.3;
  spec.mu = [](double t) { return std::sin(2 * std::numbers::pi * t); };
  const DesignSpec design{DesignKind::IndependentUniformPoisson, 30.0, 25};
  const auto a = simulate(spec, design, 99, 1);
  const auto b = simulate(spec, design, 99, 8);
  const auto c = simulate(spec, design, 100, 1);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::ranges::equal(a[i].times(), b[i].times()));
    EXPECT_TRUE(std::ranges::equal(a[i].values(), b[i].values()));
    differs |= !std::ranges::equal(a[i].times(), c[i].times());
  }
  EXPECT_TRUE(differs);
}

TEST(Simulate, MomentsMonteCarlo) {
  MfbmSpec spec;
  spec.mu = [](double t) { return std::sin(2 * std::numbers::pi * t); };
  const int n = 2000;
  std::vector<std::vector<double>> clean;
  const auto s = simulate(spec, {DesignKind::CommonEquispaced, 5.0, n}, 3, 4, &clean);
  EXPECT_EQ(s.design(), Design::Common);
  // t = 0.25: mean 1, variance 0.25; t = 1: mean 0, variance 1
  double m1 = 0, v1 = 0, m4 = 0, v4 = 0;
  for (const auto& x : clean) {
    m1 += x[1];
    m4 += x[4];
  }
  m1 /= n;
  m4 /= n;
  for (const auto& x : clean) {
    v1 += (x[1] - m1) * (x[1] - m1);
    v4 += (x[4] - m4) * (x[4] - m4);
  }
  v1 /= n - 1;
  v4 /= n - 1;
  EXPECT_NEAR(m1, 1.0, 4 * std::sqrt(0.25 / n));
  EXPECT_NEAR(m4, 0.0, 4 * std::sqrt(1.0 / n));
  EXPECT_NEAR(v1, 0.25, 4 * 0.25 * std::sqrt(2.0 / n));
  EXPECT_NEAR(v4, 1.0, 4 * std::sqrt(2.0 / n));
  // X_0 = 0 up to the Cholesky jitter
  EXPECT_NEAR(clean[7][0], 0.0, 1e-5);
}

TEST(Simulate, NoiseIsIndependentAndScaled) {
  MfbmSpec spec;
  spec.sigma0 = 0.5;
  spec.sigma = [](double t) { return 1.0 + t; };
  std::vector<std::vector<double>> clean;
  const auto s = simulate(spec, {DesignKind::IndependentUniformPoisson, 50.0, 400}, 21, 2, &clean);
  double sq = 0, cross = 0, xx = 0;
  long count = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t m = 0; m < s[i].size(); ++m) {
      const double e = (s[i].values()[m] - clean[i][m]) / (1.0 + s[i].times()[m]);
      sq += e * e;
      cross += e * clean[i][m];
      xx += clean[i][m] * clean[i][m];
      ++count;
    }
  EXPECT_NEAR(sq / count, 0.25, 4 * 0.25 * std::sqrt(2.0 / count));
  EXPECT_LT(std::abs(cross / std::sqrt(sq * xx)), 4.0 / std::sqrt(static_cast<double>(count)));
}

TEST(TrueEigenElements, BrownianAnalytic) {
  MfbmSpec spec;
  const auto r = true_eigen_elements(spec, 3, 1001);
  for (int j = 0; j < 3; ++j) {
    const double w = (j + 0.5) * std::numbers::pi;
    EXPECT_NEAR(r.eigenvalues[static_cast<std::size_t>(j)], 1 / (w * w), 1e-5);
  }
  EXPECT_THROW((void)true_eigen_elements(spec, 3, 200), std::invalid_argument);
}

TEST(Interpolate, LinearBetweenGridPoints) {
  const auto g = make_uniform_grid(3);
  const std::vector<double> v{0.0, 2.0, 0.0};
  const auto out = interpolate(g, v, std::vector<double>{0.25, 0.5, 0.9});
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 2.0);
  EXPECT_NEAR(out[2], 0.4, 1e-15);
}
