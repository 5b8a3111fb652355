#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <tuple>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "afpca/data_model.hpp"
#include "afpca/errors.hpp"
#include "afpca/presmoothing.hpp"

namespace afpca {

struct MomentEstimates {
  Grid grid;
  std::vector<double> m2;  ///< Var X_t
  Eigen::MatrixXd c2;      ///< Var X_s X_t
  std::vector<double> sigma2;
  double b_used = 0.0;
};

/// Plug-in m2(t) and c2(s, t) from the presmoothed curves, floored at zero.
inline std::pair<std::vector<double>, Eigen::MatrixXd> estimate_m2_c2(std::span<const PresmoothedCurve> pres,
                                                                     const Grid& grid) {
  if (pres.size() < 2) throw std::invalid_argument("moment estimation needs at least 2 curves");
  const auto n = static_cast<Eigen::Index>(pres.size());
  const auto g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd x(n, g);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto v = pres[static_cast<std::size_t>(i)].evaluate(grid.points);
    for (Eigen::Index k = 0; k < g; ++k) x(i, k) = v[static_cast<std::size_t>(k)];
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> m2(static_cast<std::size_t>(g));
  for (Eigen::Index k = 0; k < g; ++k) {
    const double mean = x.col(k).sum() * inv_n;
    const double sq = x.col(k).squaredNorm() * inv_n;
    m2[static_cast<std::size_t>(k)] = std::max(0.0, sq - mean * mean);
  }

  Eigen::MatrixXd c2(g, g);
  for (Eigen::Index a = 0; a < g; ++a) {
    for (Eigen::Index b = a; b < g; ++b) {
      double s1 = 0.0, s2 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = x(i, a) * x(i, b);
        s1 += p;
        s2 += p * p;
      }
      s1 *= inv_n;
      s2 *= inv_n;
      c2(a, b) = c2(b, a) = std::max(0.0, s2 - s1 * s1);
    }
  }
  return {std::move(m2), std::move(c2)};
}

/// Indices of the observation times closest and second closest to t; distance ties go to the smaller index.
inline std::pair<std::size_t, std::size_t> nearest_pair(std::span<const double> times, double t) {
  const auto split = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
  // left walks down from split-1, right walks up from split
  std::ptrdiff_t left = static_cast<std::ptrdiff_t>(split) - 1;
  std::size_t right = split;
  auto take = [&]() {
    const bool has_l = left >= 0;
    const bool has_r = right < times.size();
    if (has_l && (!has_r || t - times[static_cast<std::size_t>(left)] <= times[right] - t))
      return static_cast<std::size_t>(left--);
    return right++;
  };
  const std::size_t first = take();
  const std::size_t second = take();
  return {first, second};
}

/// Nearest-pair difference estimator of the noise variance at t. Empty when no curve has its
/// second-closest point within b of t. Curves with a single observation never contribute.
inline std::optional<double> sigma2_hat(const FunctionalSample& sample, double t, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("sigma2 window b must be positive");
  double sum = 0.0;
  long included = 0;
  for (const auto& c : sample) {
    if (c.size() < 2) continue;
    const auto [m1, m2] = nearest_pair(c.times(), t);
    if (std::abs(c.times()[m2] - t) > b) continue;
    const double d = c.values()[m1] - c.values()[m2];
    sum += d * d;
    ++included;
  }
  if (included == 0) return std::nullopt;
  return sum / (2.0 * static_cast<double>(included));
}

/// Number of curves whose nearest pair around t lies within b.
inline long sigma2_included(const FunctionalSample& sample, double t, double b) {
  long included = 0;
  for (const auto& c : sample) {
    if (c.size() < 2) continue;
    const auto [m1, m2] = nearest_pair(c.times(), t);
    (void)m1;
    included += std::abs(c.times()[m2] - t) <= b;
  }
  return included;
}

/// Default b: a tenth of the domain (independent design) or the largest spacing (common design).
inline double default_b(const FunctionalSample& sample) {
  if (sample.design() == Design::Independent) return sample.domain_length() / 10.0;
  const auto t = sample[0].times();
  double gap = 0.0;
  for (std::size_t m = 1; m < t.size(); ++m) gap = std::max(gap, t[m] - t[m - 1]);
  return gap > 0.0 ? gap : sample.domain_length() / 10.0;
}

struct NoiseProfile {
  std::vector<double> sigma2;
  double b_used = 0.0;
};

/// sigma2_hat on every grid point. b is widened by 1.5x until every point has an included curve.
inline NoiseProfile sigma2_on_grid(const FunctionalSample& sample, const Grid& grid, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("sigma2 window b must be positive");
  for (int attempt = 0; attempt < 64; ++attempt) {
    NoiseProfile out;
    out.b_used = b;
    out.sigma2.reserve(grid.size());
    bool ok = true;
    for (double t : grid.points) {
      const auto v = sigma2_hat(sample, t, b);
      if (!v) {
        ok = false;
        break;
      }
      out.sigma2.push_back(*v);
    }
    if (ok) return out;
    b *= 1.5;
  }
  throw InfeasibleError(Stage::Moments, "noise variance window stays empty; curves need at least 2 points");
}

inline MomentEstimates estimate_moments(std::span<const PresmoothedCurve> pres, const FunctionalSample& sample,
                                        const Grid& grid, double b) {
  MomentEstimates out;
  out.grid = grid;
  std::tie(out.m2, out.c2) = estimate_m2_c2(pres, grid);
  auto noise = sigma2_on_grid(sample, grid, b);
  out.sigma2 = std::move(noise.sigma2);
  out.b_used = noise.b_used;
  return out;
}

}  // namespace afpca
