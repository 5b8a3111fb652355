#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "afpca/data_model.hpp"
#include "afpca/errors.hpp"
#include "afpca/kernel_smoother.hpp"
#include "afpca/moments.hpp"
#include "afpca/presmoothing.hpp"
#include "afpca/regularity.hpp"

namespace afpca {

/// \int |u|^a K(u) du.
inline double kernel_moment(double a, const Kernel& kernel = {}) { return kernel.abs_moment(a); }

/// Plug-in quantities feeding the eigen-element risk bounds.
struct RiskBoundInputs {
  MomentEstimates moments;
  RegularityEstimate regularity;
  /// Preliminary eigenvalues, nonincreasing. Empty together with the eigenfunctions
  /// selects the constant-one proxy (first run).
  std::vector<double> proxy_eigenvalues;
  std::vector<std::vector<double>> proxy_eigenfunctions;
  int K0 = 9;
  Kernel kernel{};

  bool constant_proxy() const noexcept { return proxy_eigenfunctions.empty(); }

  void validate() const {
    if (K0 < 2) throw std::invalid_argument("K0 must be at least 2");
    if (moments.grid.size() != regularity.grid.size())
      throw std::invalid_argument("moment and regularity grids differ");
    if (constant_proxy()) return;
    if (proxy_eigenfunctions.size() < static_cast<std::size_t>(K0) ||
        proxy_eigenvalues.size() < static_cast<std::size_t>(K0))
      throw std::invalid_argument("fewer proxy eigen-elements than K0");
    for (std::size_t k = 1; k < static_cast<std::size_t>(K0); ++k)
      if (proxy_eigenvalues[k] > proxy_eigenvalues[k - 1])
        throw std::invalid_argument("proxy eigenvalues must be nonincreasing");
    for (const auto& psi : proxy_eigenfunctions)
      if (psi.size() != moments.grid.size()) throw std::invalid_argument("proxy eigenfunction off the grid");
  }
};

/// Geometric candidate bandwidths.
struct BandwidthGrid {
  std::vector<double> values;
};

/// Default range: from log(N) / (M sqrt(N)) to 0.1, 61 geometric points.
inline BandwidthGrid make_bandwidth_grid(std::size_t n_curves, double mean_obs, int count = 61, double h_max = 0.1,
                                         double h_min = -1.0) {
  const double n = static_cast<double>(n_curves);
  if (h_min <= 0.0) h_min = std::log(n) / (mean_obs * std::sqrt(n));
  if (!(h_min < h_max)) throw std::invalid_argument("bandwidth grid minimum must be below its maximum");
  return {geometric_grid(h_min, h_max, count)};
}

/// Squared-bias, variance and curve-dropping penalty terms of one bound at one h.
struct BoundTerms {
  double B1 = std::numeric_limits<double>::infinity();
  double B2 = std::numeric_limits<double>::infinity();
  double B3 = std::numeric_limits<double>::infinity();
  bool feasible = false;

  double total() const noexcept { return feasible ? B1 + B2 + B3 : std::numeric_limits<double>::infinity(); }
};

/// Log-factor inflation of a raw minimizer, clamped to [lower, 0.5].
inline double inflate_bandwidth(double raw, double lower) {
  return std::clamp(std::log(1.0 / raw) * raw, lower, 0.5);
}

namespace detail {

/// Everything about one bandwidth that does not depend on the eigen-element.
struct BandwidthKernelMatrices {
  bool feasible = false;
  std::vector<double> bias_profile;  ///< L_t^2 h^{2H_t} \int|u|^{2H_t}K
  Eigen::MatrixXd variance;          ///< w_s w_t {sigma2(s) m2(t)/N(t|s) + sigma2(t) m2(s)/N(s|t)}
  Eigen::MatrixXd penalty;           ///< w_s w_t c2(s,t) {1/W(s,t) - 1/N}
};

inline BandwidthKernelMatrices bandwidth_matrices(const RiskBoundInputs& in, const FunctionalSample& sample,
                                                  double h) {
  const Grid& grid = in.moments.grid;
  const auto g = static_cast<Eigen::Index>(grid.size());
  const GridSmoothing sm = smooth_on_grid(sample, grid, h, in.kernel, false);
  BandwidthKernelMatrices out;

  const Eigen::MatrixXd pair_count = sm.selected.transpose() * sm.selected;
  if ((pair_count.array() <= 0.5).any()) return out;
  out.feasible = true;
  // q(a, b) = sum_i w_i(a) w_i(b) max_m W_m(b)
  const Eigen::MatrixXd q = sm.selected.transpose() * sm.max_weight;

  const double inv_n = 1.0 / static_cast<double>(sample.size());
  out.bias_profile.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double H = in.regularity.H[k];
    const double L = in.regularity.L[k];
    out.bias_profile[k] = L * L * std::pow(h, 2.0 * H) * kernel_moment(2.0 * H, in.kernel);
  }
  out.variance.resize(g, g);
  out.penalty.resize(g, g);
  const auto& m2 = in.moments.m2;
  const auto& s2 = in.moments.sigma2;
  for (Eigen::Index a = 0; a < g; ++a) {
    for (Eigen::Index b = 0; b < g; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      const double w = pair_count(a, b);
      const double inv_n_t_given_s = q(a, b) / (w * w);
      const double inv_n_s_given_t = q(b, a) / (w * w);
      const double quad = grid.weights[ua] * grid.weights[ub];
      out.variance(a, b) = quad * (s2[ua] * m2[ub] * inv_n_t_given_s + s2[ub] * m2[ua] * inv_n_s_given_t);
      out.penalty(a, b) = quad * in.moments.c2(a, b) * (1.0 / w - inv_n);
    }
  }
  return out;
}

inline std::vector<double> squared(std::span<const double> f) {
  std::vector<double> out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k] * f[k];
  return out;
}

inline Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

/// Squared proxy eigenfunctions, one per column (all ones in constant-proxy mode).
inline Eigen::MatrixXd squared_proxies(const RiskBoundInputs& in) {
  const auto g = static_cast<Eigen::Index>(in.moments.grid.size());
  Eigen::MatrixXd f(g, in.K0);
  for (int k = 0; k < in.K0; ++k) {
    if (in.constant_proxy()) {
      f.col(k).setOnes();
    } else {
      const auto sq = squared(in.proxy_eigenfunctions[static_cast<std::size_t>(k)]);
      f.col(k) = as_vector(sq);
    }
  }
  return f;
}

struct ElementBounds {
  std::vector<BoundTerms> eigenvalue;     ///< index j
  std::vector<BoundTerms> eigenfunction;  ///< index j
};

/// Both bound families for j = 0 .. J-1 at one bandwidth.
inline ElementBounds element_bounds(const RiskBoundInputs& in, const BandwidthKernelMatrices& mats, int J) {
  ElementBounds out;
  out.eigenvalue.resize(static_cast<std::size_t>(J));
  out.eigenfunction.resize(static_cast<std::size_t>(J));
  if (!mats.feasible) return out;

  const Grid& grid = in.moments.grid;
  const Eigen::MatrixXd f = squared_proxies(in);
  Eigen::VectorXd wm2(static_cast<Eigen::Index>(grid.size())), wbias(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    wm2(static_cast<Eigen::Index>(k)) = grid.weights[k] * in.moments.m2[k];
    wbias(static_cast<Eigen::Index>(k)) = grid.weights[k] * mats.bias_profile[k];
  }
  const Eigen::VectorXd m2_int = f.transpose() * wm2;      // \int m2 psi_k^2
  const Eigen::VectorXd bias_int = f.transpose() * wbias;  // \int L^2 h^{2H} c(H) psi_k^2
  // row index: s-profile, column index: t-profile
  const Eigen::MatrixXd var_mix = f.transpose() * mats.variance * f;
  const Eigen::MatrixXd pen_mix = f.transpose() * mats.penalty * f;

  for (int j = 0; j < J; ++j) {
    BoundTerms lam;
    lam.feasible = true;
    const double p = m2_int(j) * bias_int(j);
    lam.B1 = 4.0 * p;
    lam.B2 = 2.0 * var_mix(j, j);
    lam.B3 = pen_mix(j, j);
    out.eigenvalue[static_cast<std::size_t>(j)] = lam;

    BoundTerms fun;
    fun.feasible = true;
    if (in.constant_proxy()) {
      // every k-term equals the eigenvalue term; unit gap weights
      const double c = static_cast<double>(in.K0 - 1);
      fun.B1 = c * lam.B1;
      fun.B2 = c * lam.B2;
      fun.B3 = c * lam.B3;
    } else {
      fun.B1 = fun.B2 = fun.B3 = 0.0;
      for (int k = 0; k < in.K0; ++k) {
        if (k == j) continue;
        const double gap = in.proxy_eigenvalues[static_cast<std::size_t>(j)] -
                           in.proxy_eigenvalues[static_cast<std::size_t>(k)];
        if (gap == 0.0)
          throw InfeasibleError(Stage::RiskBounds,
                                "degenerate spectrum: zero proxy eigenvalue gap for element " + std::to_string(j + 1));
        const double omega = 1.0 / (gap * gap);
        fun.B1 += omega * 2.0 * (m2_int(j) * bias_int(k) + m2_int(k) * bias_int(j));
        fun.B2 += omega * 2.0 * var_mix(k, j);
        fun.B3 += omega * pen_mix(k, j);
      }
    }
    out.eigenfunction[static_cast<std::size_t>(j)] = fun;
  }
  return out;
}

}  // namespace detail

/// Eigenvalue risk bound for element j (0-based) at bandwidth h. Infeasible h returns infinite terms.
inline BoundTerms eigenvalue_bound(const RiskBoundInputs& in, const FunctionalSample& sample, int j, double h) {
  in.validate();
  if (j < 0 || j >= in.K0) throw std::invalid_argument("element index outside 0..K0-1");
  const auto mats = detail::bandwidth_matrices(in, sample, h);
  return detail::element_bounds(in, mats, j + 1).eigenvalue[static_cast<std::size_t>(j)];
}

/// Eigenfunction risk bound for element j (0-based) at bandwidth h.
inline BoundTerms eigenfunction_bound(const RiskBoundInputs& in, const FunctionalSample& sample, int j, double h) {
  in.validate();
  if (j < 0 || j >= in.K0) throw std::invalid_argument("element index outside 0..K0-1");
  const auto mats = detail::bandwidth_matrices(in, sample, h);
  return detail::element_bounds(in, mats, j + 1).eigenfunction[static_cast<std::size_t>(j)];
}

struct BandwidthSelection {
  std::vector<double> grid;  ///< candidate bandwidths, increasing
  std::vector<std::size_t> lambda_index;
  std::vector<std::size_t> psi_index;
  std::vector<double> lambda_raw;
  std::vector<double> psi_raw;
  std::vector<double> lambda_inflated;
  std::vector<double> psi_inflated;
  /// trace[j][k]: terms of element j at grid[k]
  std::vector<std::vector<BoundTerms>> lambda_trace;
  std::vector<std::vector<BoundTerms>> psi_trace;
};

namespace detail {

inline std::size_t argmin_total(const std::vector<BoundTerms>& trace) {
  std::size_t best = trace.size();
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double v = trace[k].total();
    if (v < best_value) {
      best_value = v;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

/// Grid minimizers of both bound families for j < J, then log inflation.
inline BandwidthSelection select_bandwidths(const RiskBoundInputs& in, const FunctionalSample& sample,
                                            const BandwidthGrid& hgrid, int J) {
  in.validate();
  if (J < 1 || J > in.K0) throw std::invalid_argument("J must lie in 1..K0");
  if (hgrid.values.empty()) throw std::invalid_argument("empty bandwidth grid");
  BandwidthSelection sel;
  sel.grid = hgrid.values;
  std::sort(sel.grid.begin(), sel.grid.end());
  const auto uj = static_cast<std::size_t>(J);
  sel.lambda_trace.assign(uj, std::vector<BoundTerms>(sel.grid.size()));
  sel.psi_trace.assign(uj, std::vector<BoundTerms>(sel.grid.size()));

  for (std::size_t k = 0; k < sel.grid.size(); ++k) {
    const auto mats = detail::bandwidth_matrices(in, sample, sel.grid[k]);
    const auto bounds = detail::element_bounds(in, mats, J);
    for (std::size_t j = 0; j < uj; ++j) {
      sel.lambda_trace[j][k] = bounds.eigenvalue[j];
      sel.psi_trace[j][k] = bounds.eigenfunction[j];
    }
  }

  const double lower = sel.grid.front();
  for (std::size_t j = 0; j < uj; ++j) {
    const auto il = detail::argmin_total(sel.lambda_trace[j]);
    const auto ip = detail::argmin_total(sel.psi_trace[j]);
    if (il == sel.grid.size() || ip == sel.grid.size())
      throw InfeasibleError(Stage::RiskBounds,
                            "design too sparse: every candidate bandwidth leaves some grid pair without curves");
    sel.lambda_index.push_back(il);
    sel.psi_index.push_back(ip);
    sel.lambda_raw.push_back(sel.grid[il]);
    sel.psi_raw.push_back(sel.grid[ip]);
    sel.lambda_inflated.push_back(inflate_bandwidth(sel.grid[il], lower));
    sel.psi_inflated.push_back(inflate_bandwidth(sel.grid[ip], lower));
  }
  return sel;
}

}  // namespace afpca
