#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "afpca/data_model.hpp"
#include "afpca/eigen_decomposition.hpp"
#include "afpca/errors.hpp"
#include "afpca/parallel.hpp"
#include "afpca/presmoothing.hpp"

namespace afpca {

using ScalarFunction = std::function<double(double)>;

inline ScalarFunction constant_function(double c) {
  return [c](double) { return c; };
}

/// Piecewise-linear interpolation of (t, value) knots, constant beyond the ends.
inline ScalarFunction piecewise_linear(std::vector<double> t, std::vector<double> v) {
  if (t.empty() || t.size() != v.size()) throw std::invalid_argument("piecewise-linear table needs matching knots");
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw std::invalid_argument("piecewise-linear knots must increase");
  return [t = std::move(t), v = std::move(v)](double x) {
    if (x <= t.front()) return v.front();
    if (x >= t.back()) return v.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), x) - t.begin());
    const double a = (x - t[k - 1]) / (t[k] - t[k - 1]);
    return (1.0 - a) * v[k - 1] + a * v[k];
  };
}

/// log Gamma(x) for x > 0, Lanczos series with g = 607/128 and 14 terms (abs. error ~1e-15 on (0, 3)).
inline double log_gamma(double x) {
  static constexpr std::array<double, 14> c{
      57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,     -0.491913816097620199,
      .339946499848118887e-4,  .465236289270485756e-4,  -.983744753048795646e-4, .158088703224912494e-3,
      -.210264441724104883e-3, .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
      -.261908384015814087e-4, .368991826595316234e-5};
  if (!(x > 0.0)) throw std::domain_error("log_gamma needs a positive argument");
  const double t = x + 5.24218750000000000;
  double series = 0.999999999999997092;
  double y = x;
  for (double ck : c) series += ck / ++y;
  return (x + 0.5) * std::log(t) - t + std::log(2.5066282746310005 * series / x);
}

/// Normalizing factor of the multifractional Brownian motion covariance; D(x, x) = 1/2.
inline double d_factor(double x, double y) {
  if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) throw std::domain_error("d_factor needs x, y in (0, 1)");
  if (x == y) return 0.5;
  const double pi = std::numbers::pi;
  const double log_num = 0.5 * (log_gamma(2.0 * x + 1.0) + log_gamma(2.0 * y + 1.0));
  const double trig = std::sqrt(std::sin(pi * x) * std::sin(pi * y)) / (2.0 * std::sin(pi * (x + y) / 2.0));
  return std::exp(log_num - log_gamma(x + y + 1.0)) * trig;
}

/// Mean, regularity, variance and noise description of a deformed MfBm.
struct MfbmSpec {
  ScalarFunction H = constant_function(0.5);
  ScalarFunction L = constant_function(1.0);
  std::optional<ScalarFunction> m2_target;
  ScalarFunction mu = constant_function(0.0);
  double A0 = 0.0;
  ScalarFunction sigma = constant_function(1.0);
  double sigma0 = 0.0;
};

/// Time deformation A and scaling tau, tabulated once by composite Simpson.
class Deformation {
 public:
  static constexpr int panels = 2000;

  explicit Deformation(const MfbmSpec& spec) : spec_(spec) {
    if (spec_.m2_target && !(spec_.A0 > 0.0)) throw std::invalid_argument("A(0) must be positive with a variance target");
    if (spec_.A0 < 0.0) throw std::invalid_argument("A(0) must be nonnegative");
    cumulative_.assign(panels + 1, 0.0);
    for (int k = 0; k < panels; ++k) {
      const double a = static_cast<double>(k) / panels;
      const double b = static_cast<double>(k + 1) / panels;
      cumulative_[static_cast<std::size_t>(k + 1)] = cumulative_[static_cast<std::size_t>(k)] + simpson(a, b);
    }
  }

  /// Integrand L^{1/H}, or (L / sqrt(m2))^{1/H} with a variance target.
  double rate(double s) const {
    double l = spec_.L(s);
    if (spec_.m2_target) l /= std::sqrt((*spec_.m2_target)(s));
    return std::pow(l, 1.0 / spec_.H(s));
  }

  double integral(double t) const {
    t = std::clamp(t, 0.0, 1.0);
    const int k = std::min(static_cast<int>(std::floor(t * panels)), panels - 1);
    const double a = static_cast<double>(k) / panels;
    return cumulative_[static_cast<std::size_t>(k)] + (t > a ? simpson(a, t) : 0.0);
  }

  double A(double t) const {
    const double I = integral(t);
    return spec_.m2_target ? spec_.A0 * std::exp(I) : spec_.A0 + I;
  }

  double tau(double t) const {
    if (!spec_.m2_target) return 1.0;
    return std::sqrt((*spec_.m2_target)(t)) * std::pow(A(t), -spec_.H(t));
  }

 private:
  double simpson(double a, double b) const { return (b - a) / 6.0 * (rate(a) + 4.0 * rate(0.5 * (a + b)) + rate(b)); }

  MfbmSpec spec_;
  std::vector<double> cumulative_;
};

inline double deformation_A(const MfbmSpec& spec, double t) { return Deformation(spec).A(t); }

/// Covariance C_A of the deformed, scaled MfBm.
class MfbmCovariance {
 public:
  explicit MfbmCovariance(MfbmSpec spec) : spec_(std::move(spec)), deformation_(spec_) {}

  const MfbmSpec& spec() const noexcept { return spec_; }
  const Deformation& deformation() const noexcept { return deformation_; }

  double operator()(double s, double t) const {
    return from_parts(spec_.H(s), deformation_.A(s), deformation_.tau(s), spec_.H(t), deformation_.A(t),
                      deformation_.tau(t));
  }

  /// Covariance matrix at the given points.
  Eigen::MatrixXd matrix(std::span<const double> points) const {
    const auto n = static_cast<Eigen::Index>(points.size());
    std::vector<double> h(points.size()), a(points.size()), tau(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
      h[k] = spec_.H(points[k]);
      a[k] = deformation_.A(points[k]);
      tau[k] = deformation_.tau(points[k]);
    }
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      for (Eigen::Index j = i; j < n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        c(i, j) = c(j, i) = from_parts(h[ui], a[ui], tau[ui], h[uj], a[uj], tau[uj]);
      }
    }
    return c;
  }

  static double from_parts(double hs, double as, double taus, double ht, double at, double taut) {
    const double x = hs + ht;
    const double lo = std::min(as, at), hi = std::max(as, at);
    // x == 1 is the Brownian case, where the bracket is exactly 2 min(A(s), A(t))
    const double bracket = x == 1.0 ? 2.0 * lo : std::pow(lo, x) + std::pow(hi, x) - std::pow(hi - lo, x);
    return taus * taut * d_factor(hs, ht) * bracket;
  }

 private:
  MfbmSpec spec_;
  Deformation deformation_;
};

inline double covariance_CA(const MfbmSpec& spec, double s, double t) { return MfbmCovariance(spec)(s, t); }

enum class DesignKind { IndependentUniformPoisson, CommonEquispaced };

struct DesignSpec {
  DesignKind kind = DesignKind::IndependentUniformPoisson;
  double m = 50.0;  ///< Poisson mean, or number of common points
  int N = 100;
};

/// Lower-triangular factor of c, escalating diagonal jitter from 0 through 1e-12 .. 1e-8.
inline Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& c) {
  const std::array<double, 6> jitter{0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8};
  for (double j : jitter) {
    Eigen::MatrixXd m = c;
    m.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError(Stage::Simulation, "ill-conditioned covariance: Cholesky failed after jitter 1e-8");
}

inline std::vector<double> common_design_points(int m) {
  return make_uniform_grid(m).points;
}

/// Draws one curve's observation times.
inline std::vector<double> draw_times(const DesignSpec& design, std::mt19937_64& rng) {
  if (design.kind == DesignKind::CommonEquispaced) return common_design_points(static_cast<int>(design.m));
  std::poisson_distribution<int> count(design.m);
  int M = 0;
  do M = count(rng);
  while (M < 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> t;
  do {
    t.resize(static_cast<std::size_t>(M));
    for (auto& x : t) x = unif(rng);
    std::sort(t.begin(), t.end());
  } while (std::adjacent_find(t.begin(), t.end()) != t.end());
  return t;
}

/// Gaussian sample paths with additive heteroscedastic noise. Curve i draws from its own stream
/// (seed, i), so the output does not depend on `threads`.
inline FunctionalSample simulate(const MfbmSpec& spec, const DesignSpec& design, std::uint64_t seed,
                                 unsigned threads = 1, std::vector<std::vector<double>>* latent = nullptr) {
  if (design.N < 2) throw std::invalid_argument("simulation needs N >= 2");
  if (design.m < 2.0) throw std::invalid_argument("simulation needs m >= 2");
  const MfbmCovariance cov(spec);
  const auto n = static_cast<std::size_t>(design.N);
  std::vector<std::vector<double>> times(n), values(n), clean(n);

  parallel_for(n, threads, [&](std::size_t i) {
    auto rng = make_rng(seed, SeedStream::Simulation, i);
    times[i] = draw_times(design, rng);
    const auto& t = times[i];
    const Eigen::MatrixXd factor = jittered_cholesky(cov.matrix(t));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(t.size()));
    for (auto& v : z) v = normal(rng);
    const Eigen::VectorXd x = factor * z;
    clean[i].resize(t.size());
    values[i].resize(t.size());
    for (std::size_t m = 0; m < t.size(); ++m) {
      const double xm = spec.mu(t[m]) + x(static_cast<Eigen::Index>(m));
      clean[i][m] = xm;
      values[i][m] = xm + spec.sigma0 * spec.sigma(t[m]) * normal(rng);
    }
  });

  std::vector<Curve> curves;
  curves.reserve(n);
  for (std::size_t i = 0; i < n; ++i) curves.emplace_back(static_cast<long>(i), std::move(times[i]), std::move(values[i]));
  if (latent) *latent = std::move(clean);
  return FunctionalSample(std::move(curves),
                          design.kind == DesignKind::CommonEquispaced ? Design::Common : Design::Independent);
}

/// True eigen-elements: decomposition of C_A on a fine uniform grid (>= 501 points).
inline EigenResult true_eigen_elements(const MfbmSpec& spec, int J, int grid_points = 501) {
  if (grid_points < 501) throw std::invalid_argument("truth grid needs at least 501 points");
  const Grid grid = make_uniform_grid(grid_points);
  const MfbmCovariance cov(spec);
  return eigendecompose(cov.matrix(grid.points), grid, J);
}

/// Linear interpolation of a grid function onto other points.
inline std::vector<double> interpolate(const Grid& from, std::span<const double> values, std::span<const double> to) {
  return [&] {
    auto f = piecewise_linear(from.points, std::vector<double>(values.begin(), values.end()));
    std::vector<double> out(to.size());
    for (std::size_t k = 0; k < to.size(); ++k) out[k] = f(to[k]);
    return out;
  }();
}

}  // namespace afpca
