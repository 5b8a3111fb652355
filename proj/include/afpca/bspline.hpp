#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace afpca {

/// Cubic B-spline basis on [0, 1] with equally spaced interior knots.
class CubicBSplineBasis {
 public:
  static constexpr int degree = 3;

  explicit CubicBSplineBasis(int interior_knots) {
    if (interior_knots < 0) throw std::invalid_argument("negative knot count");
    for (int k = 0; k <= degree; ++k) knots_.push_back(0.0);
    for (int k = 1; k <= interior_knots; ++k) knots_.push_back(static_cast<double>(k) / (interior_knots + 1));
    for (int k = 0; k <= degree; ++k) knots_.push_back(1.0);
  }

  int size() const noexcept { return static_cast<int>(knots_.size()) - degree - 1; }

  /// All basis functions at x (Cox-de Boor).
  Eigen::VectorXd evaluate(double x) const {
    const int n = size();
    x = std::clamp(x, 0.0, 1.0);
    // span index: knots_[span] <= x < knots_[span+1], last span closed on the right
    int span = degree;
    while (span < n - 1 && x >= knots_[static_cast<std::size_t>(span + 1)]) ++span;

    double basis[degree + 1];
    double left[degree + 1];
    double right[degree + 1];
    basis[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
      right[j] = knots_[static_cast<std::size_t>(span + j)] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double tmp = basis[r] / (right[r + 1] + left[j - r]);
        basis[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      basis[j] = saved;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int r = 0; r <= degree; ++r) out(span - degree + r) = basis[r];
    return out;
  }

 private:
  std::vector<double> knots_;
};

/// Least-squares cubic B-spline fit of (x, y), evaluated at `at`.
inline std::vector<double> bspline_smooth(std::span<const double> x, std::span<const double> y, int interior_knots,
                                          std::span<const double> at) {
  if (x.size() != y.size()) throw std::invalid_argument("spline data length mismatch");
  const CubicBSplineBasis basis(interior_knots);
  if (static_cast<int>(x.size()) < basis.size())
    throw std::invalid_argument("fewer data points than spline coefficients");
  Eigen::MatrixXd design(static_cast<Eigen::Index>(x.size()), basis.size());
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) {
    design.row(static_cast<Eigen::Index>(k)) = basis.evaluate(x[k]).transpose();
    rhs(static_cast<Eigen::Index>(k)) = y[k];
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
  std::vector<double> out(at.size());
  for (std::size_t k = 0; k < at.size(); ++k) out[k] = basis.evaluate(at[k]).dot(coef);
  return out;
}

}  // namespace afpca
