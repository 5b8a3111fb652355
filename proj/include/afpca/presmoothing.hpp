#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "afpca/data_model.hpp"
#include "afpca/errors.hpp"
#include "afpca/kernel_smoother.hpp"

namespace afpca {

/// Pilot reconstruction of one curve: NW values at {0, T_1, ..., T_M, 1}, linearly interpolated.
class PresmoothedCurve {
 public:
  PresmoothedCurve(std::vector<double> anchor_times, std::vector<double> anchor_values)
      : times_(std::move(anchor_times)), values_(std::move(anchor_values)) {
    if (times_.empty() || times_.size() != values_.size())
      throw std::invalid_argument("presmoothed curve needs matching, nonempty anchors");
  }

  std::span<const double> anchor_times() const noexcept { return times_; }
  std::span<const double> anchor_values() const noexcept { return values_; }

  double operator()(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto k = static_cast<std::size_t>(it - times_.begin());
    const double t0 = times_[k - 1], t1 = times_[k];
    const double a = (t - t0) / (t1 - t0);
    return (1.0 - a) * values_[k - 1] + a * values_[k];
  }

  std::vector<double> evaluate(std::span<const double> ts) const {
    std::vector<double> out(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) out[k] = (*this)(ts[k]);
    return out;
  }

  /// Multiplies every anchor value; handy for equivariance checks.
  PresmoothedCurve scaled(double c) const {
    auto v = values_;
    for (auto& x : v) x *= c;
    return {times_, std::move(v)};
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// `count` geometric points from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw std::invalid_argument("invalid geometric grid");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double ratio = std::log(hi / lo) / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k) g[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k);
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// Default pilot candidates: 20 geometric points from 2/M to 0.5.
inline std::vector<double> default_lscv_candidates(double mean_obs) {
  const double lo = std::min(2.0 / mean_obs, 0.5);
  return geometric_grid(lo, 0.5, 20);
}

/// Leave-one-out CV score of one bandwidth. `feasible` reports whether any
/// leave-one-out window was nonempty.
inline double lscv_score(const Curve& curve, double h, const Kernel& kernel, bool& feasible) {
  const auto t = curve.times();
  const auto y = curve.values();
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(y.size());

  feasible = false;
  double score = 0.0;
  std::vector<double> kv;
  for (std::size_t m = 0; m < t.size(); ++m) {
    const Window w = window_of(t, t[m], h);
    double fit = 0.0;
    if (w.size() > 1) {
      feasible = true;
      double total = 0.0;
      kv.assign(w.size(), 0.0);
      for (std::size_t j = w.first; j < w.last; ++j) {
        if (j == m) continue;
        kv[j - w.first] = kernel((t[j] - t[m]) / h);
        total += kv[j - w.first];
      }
      double num = 0.0;
      if (total > 0.0) {
        for (std::size_t j = w.first; j < w.last; ++j) num += kv[j - w.first] * y[j];
        fit = num / total;
      } else {
        for (std::size_t j = w.first; j < w.last; ++j)
          if (j != m) num += y[j];
        fit = num / static_cast<double>(w.size() - 1);
      }
    } else {
      fit = ybar;  // empty leave-one-out window: penalize with the curve mean
    }
    score += (y[m] - fit) * (y[m] - fit);
  }
  return score;
}

/// Least-squares cross-validated NW bandwidth. Ties resolve to the smallest candidate.
inline double lscv_bandwidth(const Curve& curve, std::span<const double> candidates, const Kernel& kernel = {}) {
  if (curve.size() < 3) throw std::invalid_argument("LS-CV needs at least 3 observations");
  if (candidates.empty()) throw std::invalid_argument("LS-CV needs candidate bandwidths");
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  for (double h : sorted) check_bandwidth(h);

  double best_h = 0.0;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double h : sorted) {
    bool feasible = false;
    const double s = lscv_score(curve, h, kernel, feasible);
    if (!feasible) continue;
    if (!any || s < best) {
      best = s;
      best_h = h;
      any = true;
    }
  }
  if (!any)
    throw InfeasibleError(Stage::Presmoothing,
                          "bandwidth grid too small: every LS-CV candidate leaves all windows empty (curve " +
                              std::to_string(curve.id()) + ")");
  return best_h;
}

/// NW pilot fit of one curve at its anchors with a fixed bandwidth.
inline PresmoothedCurve presmooth_curve(const Curve& curve, double h, const Kernel& kernel = {}) {
  check_bandwidth(h);
  const auto t = curve.times();
  std::vector<double> at;
  at.reserve(t.size() + 2);
  if (t.front() > 0.0) at.push_back(0.0);
  at.insert(at.end(), t.begin(), t.end());
  if (t.back() < 1.0) at.push_back(1.0);

  std::vector<double> av(at.size());
  std::vector<bool> ok(at.size());
  for (std::size_t k = 0; k < at.size(); ++k) {
    const auto e = smooth_at(curve, at[k], h, kernel);
    ok[k] = e.selected();
    av[k] = ok[k] ? e.value() : 0.0;
  }
  // boundary anchors with empty windows copy the nearest observed anchor
  if (!ok.front()) av.front() = av[1];
  if (!ok.back()) av.back() = av[av.size() - 2];
  return {std::move(at), std::move(av)};
}

struct PresmoothResult {
  double bandwidth = 0.0;
  std::vector<std::size_t> subset;  ///< sample indices used for LS-CV
  std::vector<PresmoothedCurve> curves;
};

/// Seed stream tags, so different seeded steps never share a generator sequence.
enum class SeedStream : std::uint64_t { SubsetDraw = 1, Simulation = 2, Bench = 3 };

inline std::mt19937_64 make_rng(std::uint64_t seed, SeedStream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Lower median.
inline double lower_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

/// Presmooths every curve with the median LS-CV bandwidth of a random subset of curves.
/// Curves with fewer than 3 observations are not eligible for the subset.
inline PresmoothResult presmooth_sample(const FunctionalSample& sample, int subset_size, const Kernel& kernel,
                                        std::uint64_t seed) {
  if (subset_size < 1) throw std::invalid_argument("presmoothing subset size must be >= 1");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (sample[i].size() >= 3) eligible.push_back(i);
  if (eligible.empty())
    throw InfeasibleError(Stage::Presmoothing, "no curve has the 3 observations LS-CV needs");

  PresmoothResult out;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(subset_size), eligible.size());
  auto rng = make_rng(seed, SeedStream::SubsetDraw);
  std::sample(eligible.begin(), eligible.end(), std::back_inserter(out.subset), k, rng);

  const auto candidates = default_lscv_candidates(mean_observations(sample));
  std::vector<double> chosen;
  chosen.reserve(out.subset.size());
  for (auto i : out.subset) chosen.push_back(lscv_bandwidth(sample[i], candidates, kernel));
  out.bandwidth = lower_median(std::move(chosen));

  out.curves.reserve(sample.size());
  for (const auto& c : sample) out.curves.push_back(presmooth_curve(c, out.bandwidth, kernel));
  return out;
}

}  // namespace afpca
