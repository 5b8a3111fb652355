#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "afpca/data_model.hpp"

namespace afpca {

enum class KernelType { Epanechnikov, Uniform, Triangular };

/// Symmetric probability density supported on [-1, 1].
struct Kernel {
  KernelType type = KernelType::Epanechnikov;

  double operator()(double u) const noexcept {
    const double a = std::abs(u);
    if (a > 1.0) return 0.0;
    switch (type) {
      case KernelType::Epanechnikov: return 0.75 * (1.0 - u * u);
      case KernelType::Uniform: return 0.5;
      case KernelType::Triangular: return 1.0 - a;
    }
    return 0.0;
  }

  /// \int_{-1}^{1} |u|^a K(u) du, closed form for the three kernels.
  double abs_moment(double a) const {
    if (a < 0.0) throw std::invalid_argument("kernel moment order must be nonnegative");
    switch (type) {
      case KernelType::Epanechnikov: return 3.0 / ((a + 1.0) * (a + 3.0));
      case KernelType::Uniform: return 1.0 / (a + 1.0);
      case KernelType::Triangular: return 2.0 / ((a + 1.0) * (a + 2.0));
    }
    return 0.0;
  }
};

inline std::string_view to_string(KernelType k) {
  switch (k) {
    case KernelType::Epanechnikov: return "epanechnikov";
    case KernelType::Uniform: return "uniform";
    case KernelType::Triangular: return "triangular";
  }
  return "unknown";
}

inline KernelType kernel_from_string(std::string_view name) {
  if (name == "epanechnikov") return KernelType::Epanechnikov;
  if (name == "uniform") return KernelType::Uniform;
  if (name == "triangular") return KernelType::Triangular;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

/// Index range [first, last) of the observation times with |T_m - t| <= h.
struct Window {
  std::size_t first = 0;
  std::size_t last = 0;
  bool empty() const noexcept { return first == last; }
  std::size_t size() const noexcept { return last - first; }
};

inline Window window_of(std::span<const double> times, double t, double h) {
  const auto lo = std::lower_bound(times.begin(), times.end(), t - h);
  auto hi = std::upper_bound(lo, times.end(), t + h);
  Window w{static_cast<std::size_t>(lo - times.begin()), static_cast<std::size_t>(hi - times.begin())};
  // t - h and t + h are rounded; trim/extend so the window matches |T - t| <= h exactly.
  while (w.first < w.last && std::abs(times[w.first] - t) > h) ++w.first;
  while (w.last > w.first && std::abs(times[w.last - 1] - t) > h) --w.last;
  while (w.first > 0 && std::abs(times[w.first - 1] - t) <= h) --w.first;
  while (w.last < times.size() && std::abs(times[w.last] - t) <= h) ++w.last;
  return w;
}

/// Nadaraya-Watson weights of the in-window points, written to `out` (size w.size()).
/// If every in-window point sits exactly on the kernel's zero boundary, the weights are
/// the limit from slightly larger h, i.e. equal weights.
inline void window_weights(std::span<const double> times, Window w, double t, double h, const Kernel& kernel,
                           std::span<double> out) {
  double total = 0.0;
  for (std::size_t m = w.first; m < w.last; ++m) {
    out[m - w.first] = kernel((times[m] - t) / h);
    total += out[m - w.first];
  }
  if (total > 0.0) {
    for (auto& x : out) x /= total;
  } else if (!w.empty()) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(w.size()));
  }
}

inline void check_bandwidth(double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
}

/// Full-length weight vector W_m(t; h); all zeros when the window is empty (0/0 = 0).
inline std::vector<double> nw_weights(const Curve& curve, double t, double h, const Kernel& kernel = {}) {
  check_bandwidth(h);
  std::vector<double> weights(curve.size(), 0.0);
  const Window w = window_of(curve.times(), t, h);
  window_weights(curve.times(), w, t, h, kernel, std::span<double>(weights).subspan(w.first, w.size()));
  return weights;
}

/// Smoothed curve value together with the selection flag w_i(t; h).
class SmoothedEvaluation {
 public:
  SmoothedEvaluation() = default;
  SmoothedEvaluation(double value, bool selected) : value_(value), selected_(selected) {}

  bool selected() const noexcept { return selected_; }
  double value() const {
    if (!selected_) throw std::logic_error("degenerate smoothed value consumed");
    return value_;
  }

 private:
  double value_ = 0.0;
  bool selected_ = false;
};

inline SmoothedEvaluation smooth_at(const Curve& curve, double t, double h, const Kernel& kernel = {}) {
  check_bandwidth(h);
  const Window w = window_of(curve.times(), t, h);
  if (w.empty()) return {0.0, false};
  std::vector<double> weights(w.size());
  window_weights(curve.times(), w, t, h, kernel, weights);
  const auto y = curve.values();
  double v = 0.0;
  for (std::size_t m = w.first; m < w.last; ++m) v += weights[m - w.first] * y[m];
  return {v, true};
}

struct SelectionCounts {
  long at_t = 0;     ///< W_N(t; h)
  long at_pair = 0;  ///< W_N(s, t; h)
};

inline SelectionCounts selection_counts(const FunctionalSample& sample, double s, double t, double h) {
  check_bandwidth(h);
  SelectionCounts c;
  for (const auto& curve : sample) {
    const bool wt = !window_of(curve.times(), t, h).empty();
    const bool ws = !window_of(curve.times(), s, h).empty();
    c.at_t += wt;
    c.at_pair += (wt && ws);
  }
  return c;
}

/// Harmonic-mean effective count N_Gamma(t | s; h). Empty when no curve is selected at both s and t.
inline std::optional<double> n_gamma(const FunctionalSample& sample, double s, double t, double h,
                                     const Kernel& kernel = {}) {
  check_bandwidth(h);
  double pair = 0.0;
  double max_sum = 0.0;
  std::vector<double> weights;
  for (const auto& curve : sample) {
    const Window ws = window_of(curve.times(), s, h);
    const Window wt = window_of(curve.times(), t, h);
    if (ws.empty() || wt.empty()) continue;
    pair += 1.0;
    weights.resize(wt.size());
    window_weights(curve.times(), wt, t, h, kernel, weights);
    max_sum += *std::max_element(weights.begin(), weights.end());
  }
  if (pair == 0.0) return std::nullopt;
  return pair * pair / max_sum;
}

/// Every curve smoothed at every grid point for one bandwidth. Shared read-only by the
/// risk-bound and covariance computations.
struct GridSmoothing {
  double h = 0.0;
  Eigen::MatrixXd selected;    ///< N x G, entries 0 or 1
  Eigen::MatrixXd values;      ///< N x G smoothed values, 0 where not selected
  Eigen::MatrixXd max_weight;  ///< N x G, max_m W_m(t; h), 0 where not selected
  /// Per curve and grid point: window start and the NW weights of the window.
  std::vector<std::vector<Window>> windows;
  std::vector<std::vector<std::vector<double>>> weights;

  std::size_t n_curves() const noexcept { return static_cast<std::size_t>(selected.rows()); }
  std::size_t n_grid() const noexcept { return static_cast<std::size_t>(selected.cols()); }
};

inline GridSmoothing smooth_on_grid(const FunctionalSample& sample, const Grid& grid, double h,
                                    const Kernel& kernel = {}, bool keep_weights = true) {
  check_bandwidth(h);
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto g = static_cast<Eigen::Index>(grid.size());
  GridSmoothing out;
  out.h = h;
  out.selected = Eigen::MatrixXd::Zero(n, g);
  out.values = Eigen::MatrixXd::Zero(n, g);
  out.max_weight = Eigen::MatrixXd::Zero(n, g);
  out.windows.resize(sample.size());
  if (keep_weights) out.weights.resize(sample.size());
  std::vector<double> buf;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Curve& curve = sample[static_cast<std::size_t>(i)];
    const auto times = curve.times();
    const auto y = curve.values();
    auto& wins = out.windows[static_cast<std::size_t>(i)];
    wins.resize(grid.size());
    if (keep_weights) out.weights[static_cast<std::size_t>(i)].resize(grid.size());
    for (Eigen::Index k = 0; k < g; ++k) {
      const double t = grid.points[static_cast<std::size_t>(k)];
      const Window w = window_of(times, t, h);
      wins[static_cast<std::size_t>(k)] = w;
      if (w.empty()) continue;
      buf.resize(w.size());
      window_weights(times, w, t, h, kernel, buf);
      double v = 0.0;
      for (std::size_t m = w.first; m < w.last; ++m) v += buf[m - w.first] * y[m];
      out.selected(i, k) = 1.0;
      out.values(i, k) = v;
      out.max_weight(i, k) = *std::max_element(buf.begin(), buf.end());
      if (keep_weights) out.weights[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = buf;
    }
  }
  return out;
}

}  // namespace afpca
