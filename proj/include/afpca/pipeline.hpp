#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "afpca/covariance.hpp"
#include "afpca/data_model.hpp"
#include "afpca/eigen_decomposition.hpp"
#include "afpca/errors.hpp"
#include "afpca/kernel_smoother.hpp"
#include "afpca/moments.hpp"
#include "afpca/presmoothing.hpp"
#include "afpca/regularity.hpp"
#include "afpca/risk_bounds.hpp"

namespace afpca {

struct FitConfig {
  int J = 9;
  int K0 = 9;
  double gamma = 0.75;
  double h_clip_min = 0.05;
  double h_clip_max = 0.95;
  double l_clip_min = 1e-4;
  int knots_override = -1;  ///< negative: [M/4] + 1 interior knots
  double zeta = 0.1;
  double noise_b = -1.0;  ///< nonpositive: the design's default b
  int subset_size = 20;
  int fine_grid_size = 101;
  int h_grid_count = 61;
  double h_grid_max = 0.1;
  double h_grid_min = -1.0;  ///< nonpositive: log(N) / (M sqrt(N))
  Kernel kernel{};
  std::uint64_t seed = 0;
  std::vector<double> baseline_h{0.1};

  void validate() const {
    if (J < 1) throw std::invalid_argument("J must be >= 1");
    if (K0 < 2) throw std::invalid_argument("K0 must be >= 2");
    if (J > K0) throw std::invalid_argument("J must not exceed K0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(h_clip_min > 0.0 && h_clip_min <= h_clip_max && h_clip_max < 1.0))
      throw std::invalid_argument("H clip range must lie inside (0, 1)");
    if (!(l_clip_min > 0.0)) throw std::invalid_argument("L clip minimum must be positive");
    if (!(zeta >= 0.0 && zeta < 1.0)) throw std::invalid_argument("zeta must lie in [0, 1)");
    if (subset_size < 1) throw std::invalid_argument("subset_size must be >= 1");
    if (fine_grid_size < K0) throw std::invalid_argument("fine grid must have at least K0 points");
    if (h_grid_count < 2) throw std::invalid_argument("bandwidth grid needs at least 2 points");
    if (!(h_grid_max > 0.0)) throw std::invalid_argument("bandwidth grid maximum must be positive");
    for (double h : baseline_h)
      if (!(h > 0.0)) throw std::invalid_argument("baseline bandwidths must be positive");
  }
};

/// Noise window used with bandwidth h.
inline double noise_window(double h, double zeta) { return std::pow(h, 1.0 - zeta); }

/// Seconds spent per stage.
struct StageTiming {
  double presmoothing = 0, regularity = 0, moments = 0, first_bounds = 0, preliminary = 0, second_bounds = 0,
         final_estimates = 0, baselines = 0;
  double total() const {
    return presmoothing + regularity + moments + first_bounds + preliminary + second_bounds + final_estimates +
           baselines;
  }
};

/// Size check of one fitted diagonal correction: \iint d^2 against 4 h^2 length^2 sup sigma^2.
struct CorrectionCheck {
  double h = 0.0;
  double b = 0.0;
  double integrated_square = 0.0;
  double bound = 0.0;
  bool holds() const noexcept { return integrated_square <= bound; }
};

struct FitResult {
  Grid grid;
  double presmoothing_bandwidth = 0.0;
  RegularityEstimate regularity;
  MomentEstimates moments;
  BandwidthSelection first_run;
  double preliminary_h = 0.0;
  EigenResult preliminary;
  BandwidthSelection second_run;

  std::vector<double> eigenvalues;      ///< from each element's own covariance
  std::vector<double> raw_eigenvalues;
  std::vector<std::vector<double>> eigenfunctions;
  std::vector<double> h_lambda, h_psi;  ///< bandwidths actually used
  std::vector<double> b_lambda, b_psi;
  bool eigenvalues_monotone = true;

  std::vector<std::pair<double, EigenResult>> baselines;  ///< fixed-bandwidth decompositions
  std::vector<CorrectionCheck> correction_checks;
  StageTiming timing;
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct FittedCovariance {
  EigenResult eigen;
  CorrectionCheck check;
};

inline FittedCovariance fit_covariance(const FunctionalSample& sample, const Grid& grid, double h, double b,
                                       int n_elements, const Kernel& kernel) {
  const auto noise = sigma2_on_grid(sample, grid, b);
  std::vector<double> sigma(noise.sigma2.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) sigma[k] = std::sqrt(noise.sigma2[k]);
  const auto cov = covariance_corrected(sample, grid, h, std::span<const double>(sigma), noise.b_used, kernel);

  FittedCovariance out;
  out.eigen = eigendecompose(cov, n_elements);
  double sup = 0.0;
  for (double s : noise.sigma2) sup = std::max(sup, s);
  const double len = sample.domain_length();
  out.check = {h, noise.b_used, integrated_square(cov.correction, grid), 4.0 * h * h * len * len * sup};
  return out;
}

/// Bandwidth h, or the next larger candidate when h leaves some pair with fewer than 2 curves.
inline FittedCovariance fit_covariance_feasible(const FunctionalSample& sample, const Grid& grid, double h, double b,
                                                int n_elements, const FitConfig& cfg,
                                                const std::vector<double>& hgrid) {
  std::vector<double> tries{h};
  for (double g : hgrid)
    if (g > h) tries.push_back(g);
  for (std::size_t k = 0; k < tries.size(); ++k) {
    try {
      return fit_covariance(sample, grid, tries[k], b, n_elements, cfg.kernel);
    } catch (const InfeasibleError& e) {
      if (e.stage() != Stage::Covariance || k + 1 == tries.size()) throw;
    }
  }
  throw InfeasibleError(Stage::Covariance, "no feasible bandwidth for the covariance");
}

}  // namespace detail

/// Single corrected covariance at a fixed bandwidth, decomposed.
inline EigenResult fit_fixed_bandwidth(const FunctionalSample& sample, const Grid& grid, double h_fixed,
                                       const FitConfig& cfg) {
  return detail::fit_covariance(sample, grid, h_fixed, noise_window(h_fixed, cfg.zeta), cfg.J, cfg.kernel).eigen;
}

/// The adaptive algorithm run twice: constant proxies first, then the preliminary eigen-elements as proxies.
inline FitResult fit(const FunctionalSample& sample, const FitConfig& cfg = {}) {
  cfg.validate();
  FitResult r;
  detail::Stopwatch clock;
  r.grid = make_uniform_grid(cfg.fine_grid_size, sample.domain_length());

  const auto pres = presmooth_sample(sample, cfg.subset_size, cfg.kernel, cfg.seed);
  r.presmoothing_bandwidth = pres.bandwidth;
  r.timing.presmoothing = clock.lap();

  RegularityOptions ropt;
  ropt.gamma = cfg.gamma;
  ropt.h_min_clip = cfg.h_clip_min;
  ropt.h_max_clip = cfg.h_clip_max;
  ropt.l_min_clip = cfg.l_clip_min;
  ropt.knots_override = cfg.knots_override;
  r.regularity = estimate_regularity(pres.curves, sample, r.grid, ropt);
  r.timing.regularity = clock.lap();

  r.moments = estimate_moments(pres.curves, sample, r.grid, cfg.noise_b > 0.0 ? cfg.noise_b : default_b(sample));
  r.timing.moments = clock.lap();

  const auto hgrid = make_bandwidth_grid(sample.size(), mean_observations(sample), cfg.h_grid_count, cfg.h_grid_max,
                                         cfg.h_grid_min);
  RiskBoundInputs in;
  in.moments = r.moments;
  in.regularity = r.regularity;
  in.K0 = cfg.K0;
  in.kernel = cfg.kernel;
  r.first_run = select_bandwidths(in, sample, hgrid, cfg.J);
  r.timing.first_bounds = clock.lap();

  const double h0 = r.first_run.lambda_raw.front();
  auto prelim = detail::fit_covariance_feasible(sample, r.grid, h0, noise_window(h0, cfg.zeta), cfg.K0, cfg,
                                                r.first_run.grid);
  r.preliminary = std::move(prelim.eigen);
  r.preliminary_h = prelim.check.h;
  r.correction_checks.push_back(prelim.check);
  r.timing.preliminary = clock.lap();

  in.proxy_eigenvalues = r.preliminary.raw_eigenvalues;
  in.proxy_eigenfunctions = r.preliminary.eigenfunctions;
  r.second_run = select_bandwidths(in, sample, hgrid, cfg.J);
  r.timing.second_bounds = clock.lap();

  std::map<std::pair<double, double>, detail::FittedCovariance> cache;
  auto fitted = [&](double h, double raw) -> const detail::FittedCovariance& {
    const double b = noise_window(raw, cfg.zeta);
    const auto key = std::make_pair(h, b);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, detail::fit_covariance_feasible(sample, r.grid, h, b, cfg.J, cfg, r.second_run.grid))
               .first;
      r.correction_checks.push_back(it->second.check);
    }
    return it->second;
  };
  for (int j = 0; j < cfg.J; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const auto& lam = fitted(r.second_run.lambda_inflated[uj], r.second_run.lambda_raw[uj]);
    r.eigenvalues.push_back(lam.eigen.eigenvalues[uj]);
    r.raw_eigenvalues.push_back(lam.eigen.raw_eigenvalues[uj]);
    r.h_lambda.push_back(lam.check.h);
    r.b_lambda.push_back(lam.check.b);
    const auto& fun = fitted(r.second_run.psi_inflated[uj], r.second_run.psi_raw[uj]);
    r.eigenfunctions.push_back(fun.eigen.eigenfunctions[uj]);
    r.h_psi.push_back(fun.check.h);
    r.b_psi.push_back(fun.check.b);
  }
  for (std::size_t j = 1; j < r.eigenvalues.size(); ++j)
    if (r.eigenvalues[j] > r.eigenvalues[j - 1]) r.eigenvalues_monotone = false;
  r.timing.final_estimates = clock.lap();

  for (double h : cfg.baseline_h) {
    auto base = detail::fit_covariance(sample, r.grid, h, noise_window(h, cfg.zeta), cfg.J, cfg.kernel);
    r.correction_checks.push_back(base.check);
    r.baselines.emplace_back(h, std::move(base.eigen));
  }
  r.timing.baselines = clock.lap();
  return r;
}

}  // namespace afpca
