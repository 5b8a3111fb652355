#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace afpca {

/// One discretely observed, noisy curve: values Y_m at increasing times T_m in [0, 1].
class Curve {
 public:
  Curve(long id, std::vector<double> times, std::vector<double> values)
      : id_(id), times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size())
      throw std::invalid_argument("curve " + std::to_string(id_) + ": times and values differ in length");
    if (times_.empty())
      throw std::invalid_argument("curve " + std::to_string(id_) + ": no observations");
    for (std::size_t m = 0; m < times_.size(); ++m) {
      if (!(times_[m] >= 0.0 && times_[m] <= 1.0))
        throw std::invalid_argument("curve " + std::to_string(id_) + ": time outside [0, 1]");
      if (m > 0 && !(times_[m] > times_[m - 1]))
        throw std::invalid_argument("curve " + std::to_string(id_) + ": times not strictly increasing");
    }
  }

  long id() const noexcept { return id_; }
  std::size_t size() const noexcept { return times_.size(); }
  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  long id_;
  std::vector<double> times_;
  std::vector<double> values_;
};

enum class Design { Independent, Common };

/// N curves plus design metadata. Immutable once built.
class FunctionalSample {
 public:
  FunctionalSample(std::vector<Curve> curves, Design design, double domain_length = 1.0)
      : curves_(std::move(curves)), design_(design), domain_length_(domain_length) {
    if (curves_.size() < 2) throw std::invalid_argument("a functional sample needs at least 2 curves");
    if (!(domain_length_ > 0.0)) throw std::invalid_argument("domain length must be positive");
    if (design_ == Design::Common) {
      const auto ref = curves_.front().times();
      for (const auto& c : curves_) {
        const auto t = c.times();
        if (!std::equal(t.begin(), t.end(), ref.begin(), ref.end()))
          throw std::invalid_argument("common design requires identical time grids (curve " +
                                      std::to_string(c.id()) + ")");
      }
    }
  }

  std::size_t size() const noexcept { return curves_.size(); }
  const Curve& operator[](std::size_t i) const { return curves_[i]; }
  const std::vector<Curve>& curves() const noexcept { return curves_; }
  auto begin() const noexcept { return curves_.begin(); }
  auto end() const noexcept { return curves_.end(); }
  Design design() const noexcept { return design_; }
  double domain_length() const noexcept { return domain_length_; }

 private:
  std::vector<Curve> curves_;
  Design design_;
  double domain_length_;
};

/// Evaluation grid with trapezoid quadrature weights.
struct Grid {
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return points.size(); }
};

inline Grid make_uniform_grid(int n_points, double domain_length = 1.0) {
  if (n_points < 2) throw std::invalid_argument("uniform grid needs at least 2 points");
  if (!(domain_length > 0.0)) throw std::invalid_argument("domain length must be positive");
  Grid g;
  const auto n = static_cast<std::size_t>(n_points);
  g.points.resize(n);
  g.weights.assign(n, domain_length / static_cast<double>(n - 1));
  const double step = 1.0 / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) g.points[k] = static_cast<double>(k) * step;
  g.points.back() = 1.0;
  g.weights.front() *= 0.5;
  g.weights.back() *= 0.5;
  return g;
}

/// Quadrature of grid values.
inline double integrate(const Grid& grid, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) s += grid.weights[k] * f[k];
  return s;
}

/// Average number of observations per curve, the plug-in for the expected count.
inline double mean_observations(const FunctionalSample& sample) {
  double total = 0.0;
  for (const auto& c : sample) total += static_cast<double>(c.size());
  return total / static_cast<double>(sample.size());
}

}  // namespace afpca
