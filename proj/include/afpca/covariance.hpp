#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "afpca/data_model.hpp"
#include "afpca/errors.hpp"
#include "afpca/kernel_smoother.hpp"

namespace afpca {

/// Noise-corrected covariance on grid x grid for one bandwidth.
struct CovarianceEstimate {
  Grid grid;
  Eigen::MatrixXd gamma_matrix;  ///< raw - correction
  Eigen::MatrixXd raw;
  Eigen::MatrixXd correction;
  double h_used = 0.0;
  double b_used = 0.0;
};

inline double mean_hat(const FunctionalSample& sample, double t, double h, const Kernel& kernel = {}) {
  double sum = 0.0;
  long count = 0;
  for (const auto& c : sample) {
    const auto e = smooth_at(c, t, h, kernel);
    if (!e.selected()) continue;
    sum += e.value();
    ++count;
  }
  if (count == 0) throw InfeasibleError(Stage::Covariance, "no curve selected for the mean at t");
  return sum / static_cast<double>(count);
}

/// Pair counts W_N(s, t; h) on the grid.
inline Eigen::MatrixXd pair_counts(const GridSmoothing& sm) { return sm.selected.transpose() * sm.selected; }

namespace detail {

inline void require_two_curves(const Eigen::MatrixXd& counts, double h) {
  if ((counts.array() < 1.5).any())
    throw InfeasibleError(Stage::Covariance, "bandwidth " + std::to_string(h) +
                                                 " leaves a grid pair with fewer than 2 selected curves");
}

}  // namespace detail

/// Weighted covariance of the smoothed curves over the curves selected at both s and t.
inline Eigen::MatrixXd covariance_raw(const GridSmoothing& sm) {
  const Eigen::MatrixXd counts = pair_counts(sm);
  detail::require_two_curves(counts, sm.h);
  const auto n = static_cast<Eigen::Index>(sm.n_curves());
  const auto g = static_cast<Eigen::Index>(sm.n_grid());
  Eigen::MatrixXd centred = sm.values;
  for (Eigen::Index k = 0; k < g; ++k) {
    const double mu = sm.values.col(k).sum() / sm.selected.col(k).sum();
    for (Eigen::Index i = 0; i < n; ++i) centred(i, k) = sm.selected(i, k) > 0.0 ? sm.values(i, k) - mu : 0.0;
  }
  Eigen::MatrixXd cov(g, g);
  for (Eigen::Index a = 0; a < g; ++a) {
    for (Eigen::Index b = a; b < g; ++b) {
      const double s = centred.col(a).dot(centred.col(b));
      cov(a, b) = cov(b, a) = s / counts(a, b);
    }
  }
  return cov;
}

inline Eigen::MatrixXd covariance_raw(const FunctionalSample& sample, const Grid& grid, double h,
                                      const Kernel& kernel = {}) {
  return covariance_raw(smooth_on_grid(sample, grid, h, kernel, false));
}

/// sigma(s) sigma(t) / W_N(s,t) sum_i sum_m W_m(s) W_m(t); exactly zero for |s - t| > 2h.
inline Eigen::MatrixXd diagonal_correction(const FunctionalSample& sample, const GridSmoothing& sm,
                                           const Grid& grid, std::span<const double> sigma) {
  if (sigma.size() != grid.size()) throw std::invalid_argument("sigma must be given on the grid");
  const Eigen::MatrixXd counts = pair_counts(sm);
  detail::require_two_curves(counts, sm.h);
  const auto g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g, g);

  struct Entry {
    Eigen::Index k;
    double w;
  };
  std::vector<std::vector<Entry>> by_point;
  for (std::size_t i = 0; i < sm.n_curves(); ++i) {
    by_point.assign(sample[i].size(), {});
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Window w = sm.windows[i][k];
      for (std::size_t m = w.first; m < w.last; ++m)
        by_point[m].push_back({static_cast<Eigen::Index>(k), sm.weights[i][k][m - w.first]});
    }
    for (const auto& list : by_point)
      for (const auto& e1 : list)
        for (const auto& e2 : list) acc(e1.k, e2.k) += e1.w * e2.w;
  }

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(g, g);
  for (Eigen::Index a = 0; a < g; ++a) {
    for (Eigen::Index b = a; b < g; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      if (std::abs(grid.points[ua] - grid.points[ub]) > 2.0 * sm.h) continue;
      d(a, b) = d(b, a) = sigma[ua] * sigma[ub] * acc(a, b) / counts(a, b);
    }
  }
  return d;
}

inline Eigen::MatrixXd diagonal_correction(const FunctionalSample& sample, const Grid& grid, double h,
                                           const std::function<double(double)>& sigma_fn,
                                           const Kernel& kernel = {}) {
  std::vector<double> sigma(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) sigma[k] = sigma_fn(grid.points[k]);
  return diagonal_correction(sample, smooth_on_grid(sample, grid, h, kernel, true), grid, sigma);
}

/// Raw covariance minus the diagonal noise correction. `sigma` holds sigma(t) (not squared) on the grid.
inline CovarianceEstimate covariance_corrected(const FunctionalSample& sample, const Grid& grid, double h,
                                               std::span<const double> sigma, double b_used,
                                               const Kernel& kernel = {}) {
  const GridSmoothing sm = smooth_on_grid(sample, grid, h, kernel, true);
  CovarianceEstimate out;
  out.grid = grid;
  out.h_used = h;
  out.b_used = b_used;
  out.raw = covariance_raw(sm);
  out.correction = diagonal_correction(sample, sm, grid, sigma);
  out.gamma_matrix = out.raw - out.correction;
  return out;
}

inline CovarianceEstimate covariance_corrected(const FunctionalSample& sample, const Grid& grid, double h,
                                               const std::function<double(double)>& sigma_fn, double b_used,
                                               const Kernel& kernel = {}) {
  std::vector<double> sigma(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) sigma[k] = sigma_fn(grid.points[k]);
  return covariance_corrected(sample, grid, h, std::span<const double>(sigma), b_used, kernel);
}

/// Quadrature of a squared grid x grid matrix.
inline double integrated_square(const Eigen::MatrixXd& m, const Grid& grid) {
  double s = 0.0;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = 0; b < grid.size(); ++b) {
      const double v = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      s += grid.weights[a] * grid.weights[b] * v * v;
    }
  return s;
}

/// Does the correction satisfy \iint d^2 <= 4 h^2 length^2 sup sigma^2 ?
inline bool correction_within_bound(const CovarianceEstimate& cov, std::span<const double> sigma,
                                    double domain_length) {
  double sup = 0.0;
  for (double s : sigma) sup = std::max(sup, s * s);
  return integrated_square(cov.correction, cov.grid) <= 4.0 * cov.h_used * cov.h_used * domain_length * domain_length * sup;
}

}  // namespace afpca
