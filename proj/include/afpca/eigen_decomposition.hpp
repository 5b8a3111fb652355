#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "afpca/covariance.hpp"
#include "afpca/data_model.hpp"
#include "afpca/errors.hpp"

namespace afpca {

struct EigenResult {
  Grid grid;
  std::vector<double> eigenvalues;      ///< nonincreasing, negatives reported as 0
  std::vector<double> raw_eigenvalues;  ///< as returned by the solver
  std::vector<std::vector<double>> eigenfunctions;
  std::vector<double> h_used;  ///< per element
};

/// Quadrature inner product of two grid functions.
inline double inner_product(const Grid& grid, std::span<const double> f, std::span<const double> g) {
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) s += grid.weights[k] * f[k] * g[k];
  return s;
}

/// sign(<psi, reference>) psi. A zero inner product falls back to psi(t_0) >= 0.
inline std::vector<double> sign_align(std::span<const double> psi, std::span<const double> reference,
                                      const Grid& grid) {
  const double ip = inner_product(grid, psi, reference);
  const bool flip = ip < 0.0 || (ip == 0.0 && psi.front() < 0.0);
  std::vector<double> out(psi.begin(), psi.end());
  if (flip)
    for (auto& x : out) x = -x;
  return out;
}

/// Without a reference: \int psi >= 0, tie broken by psi(t_0) >= 0.
inline void orient_positive(std::vector<double>& psi, const Grid& grid) {
  const double area = integrate(grid, psi);
  if (area < 0.0 || (area == 0.0 && psi.front() < 0.0))
    for (auto& x : psi) x = -x;
}

/// Eigen-decomposition of the integral operator with kernel cov.gamma_matrix, discretized with the
/// grid's quadrature weights through the symmetric form D^{1/2} Gamma D^{1/2}.
inline EigenResult eigendecompose(const Eigen::MatrixXd& gamma, const Grid& grid, int J, double h = 0.0) {
  const auto g = static_cast<Eigen::Index>(grid.size());
  if (J < 1 || J > g) throw std::invalid_argument("number of eigen-elements must lie in 1..grid size");
  if (gamma.rows() != g || gamma.cols() != g) throw std::invalid_argument("covariance does not match the grid");
  Eigen::VectorXd root(g);
  for (Eigen::Index k = 0; k < g; ++k) {
    const double w = grid.weights[static_cast<std::size_t>(k)];
    if (!(w > 0.0)) throw std::invalid_argument("grid has a nonpositive quadrature weight");
    root(k) = std::sqrt(w);
  }
  Eigen::MatrixXd sym = root.asDiagonal() * gamma * root.asDiagonal();
  sym = 0.5 * (sym + sym.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError(Stage::Eigen, "symmetric eigensolver did not converge");

  EigenResult out;
  out.grid = grid;
  for (int j = 0; j < J; ++j) {
    const Eigen::Index col = g - 1 - j;  // ascending order from the solver
    const double lambda = solver.eigenvalues()(col);
    out.raw_eigenvalues.push_back(lambda);
    out.eigenvalues.push_back(std::max(lambda, 0.0));
    std::vector<double> psi(static_cast<std::size_t>(g));
    for (Eigen::Index k = 0; k < g; ++k) psi[static_cast<std::size_t>(k)] = solver.eigenvectors()(k, col) / root(k);
    orient_positive(psi, grid);
    out.eigenfunctions.push_back(std::move(psi));
    out.h_used.push_back(h);
  }
  return out;
}

inline EigenResult eigendecompose(const CovarianceEstimate& cov, int J) {
  return eigendecompose(cov.gamma_matrix, cov.grid, J, cov.h_used);
}

/// L2 distance after aligning the estimate's sign with the truth.
inline double l2_error(std::span<const double> psi_hat, std::span<const double> psi_true, const Grid& grid) {
  if (psi_hat.size() != psi_true.size() || psi_hat.size() != grid.size())
    throw std::invalid_argument("l2_error: lengths differ");
  const auto aligned = sign_align(psi_hat, psi_true, grid);
  double s = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double d = aligned[k] - psi_true[k];
    s += grid.weights[k] * d * d;
  }
  return std::sqrt(s);
}

}  // namespace afpca
