#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "afpca/bspline.hpp"
#include "afpca/data_model.hpp"
#include "afpca/presmoothing.hpp"

namespace afpca {

/// Local Hölder exponent H_t and constant L_t on the fine grid.
struct RegularityEstimate {
  Grid grid;
  std::vector<double> H;
  std::vector<double> L;
  double delta_star = 0.0;
  double gamma = 0.0;
  /// Coarse parameter grid and the clipped estimates on it, before spline smoothing.
  std::vector<double> param_points;
  std::vector<double> param_H;
  std::vector<double> param_L;
};

struct RegularityOptions {
  double gamma = 0.75;
  double h_min_clip = 0.05;
  double h_max_clip = 0.95;
  double l_min_clip = 1e-4;
  double theta_floor = 1e-12;
  int knots_override = -1;  ///< interior knots; negative means [M/4] + 1
};

struct TriplePoints {
  double t1, t2, t3;
};

/// (t1, t2, t3) around t with |t1 - t3| = 2 |t1 - t2|, folded inward at the domain ends.
inline TriplePoints triple_points(double t, double delta_star) {
  if (!(delta_star > 0.0 && delta_star < 0.5)) throw std::invalid_argument("delta_star must lie in (0, 0.5)");
  const double lo = std::max(0.0, t - delta_star);
  const double hi = std::min(t + delta_star, 1.0);
  TriplePoints p{};
  if (t <= 0.5) {
    p.t1 = lo;
    p.t3 = hi;
  } else {
    p.t1 = hi;
    p.t3 = lo;
  }
  p.t2 = 0.5 * (p.t1 + p.t3);
  return p;
}

/// Mean squared increment of the presmoothed curves between u and v.
inline double theta_hat(std::span<const PresmoothedCurve> pres, double u, double v) {
  if (pres.empty()) throw std::invalid_argument("theta_hat needs at least one curve");
  double s = 0.0;
  for (const auto& c : pres) {
    const double d = c(u) - c(v);
    s += d * d;
  }
  return s / static_cast<double>(pres.size());
}

/// exp(-log^gamma(m)).
inline double regularity_spacing(double mean_obs, double gamma) {
  return std::exp(-std::pow(std::log(mean_obs), gamma));
}

inline std::pair<double, double> hurst_and_constant(std::span<const PresmoothedCurve> pres, double t,
                                                    double delta_star, double theta_floor) {
  const auto p = triple_points(t, delta_star);
  const double th13 = std::max(theta_hat(pres, p.t1, p.t3), theta_floor);
  const double th12 = std::max(theta_hat(pres, p.t1, p.t2), theta_floor);
  const double H = (std::log(th13) - std::log(th12)) / (2.0 * std::log(2.0));
  const double L = std::sqrt(th13) / std::pow(std::abs(p.t1 - p.t3), H);
  return {H, L};
}

inline RegularityEstimate estimate_regularity(std::span<const PresmoothedCurve> pres, const FunctionalSample& sample,
                                              const Grid& fine_grid, const RegularityOptions& opt = {}) {
  if (!(opt.gamma > 0.0 && opt.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  const double mbar = mean_observations(sample);
  RegularityEstimate out;
  out.grid = fine_grid;
  out.gamma = opt.gamma;
  out.delta_star = std::min(regularity_spacing(mbar, opt.gamma), 0.49);

  const int n_param = std::max(4, static_cast<int>(std::floor(mbar / 3.0)));
  out.param_points = make_uniform_grid(n_param).points;
  for (double t : out.param_points) {
    auto [H, L] = hurst_and_constant(pres, t, out.delta_star, opt.theta_floor);
    out.param_H.push_back(std::clamp(H, opt.h_min_clip, opt.h_max_clip));
    out.param_L.push_back(std::max(L, opt.l_min_clip));
  }

  int knots = opt.knots_override >= 0 ? opt.knots_override : static_cast<int>(std::floor(mbar / 4.0)) + 1;
  knots = std::clamp(knots, 0, std::max(0, n_param - 5));
  out.H = bspline_smooth(out.param_points, out.param_H, knots, fine_grid.points);
  out.L = bspline_smooth(out.param_points, out.param_L, knots, fine_grid.points);
  for (auto& h : out.H) h = std::clamp(h, opt.h_min_clip, opt.h_max_clip);
  for (auto& l : out.L) l = std::max(l, opt.l_min_clip);
  return out;
}

}  // namespace afpca
