#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afpca/io.hpp"
#include "afpca/parallel.hpp"
#include "afpca/pipeline.hpp"
#include "afpca/simulator.hpp"

namespace afpca {

struct BenchOptions {
  int replications = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double baseline_h = 0.1;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string error;
  std::vector<io::ElementMetrics> metrics;
  std::vector<double> h_lambda, h_psi;
  long correction_checks = 0;
  long correction_violations = 0;
  StageTiming timing;
};

struct BenchResult {
  std::vector<ReplicationOutcome> replications;
  int truth_elements = 0;
};

/// Seed of replication r, shared by its simulation and its fit.
inline std::uint64_t replication_seed(std::uint64_t seed, int r) {
  auto rng = make_rng(seed, SeedStream::Bench, static_cast<std::uint64_t>(r));
  return rng();
}

/// simulate -> fit -> evaluate per replication; replications run in parallel into fixed slots.
inline BenchResult run_bench(const io::Scenario& sc, FitConfig cfg, const BenchOptions& opt) {
  if (opt.replications < 1) throw std::invalid_argument("bench needs at least one replication");
  bool has_baseline = false;
  for (double h : cfg.baseline_h) has_baseline |= h == opt.baseline_h;
  if (!has_baseline) cfg.baseline_h.push_back(opt.baseline_h);

  const auto truth_eig = true_eigen_elements(sc.spec, sc.truth_elements, sc.truth_grid);
  const io::EigenTable truth{truth_eig.grid, truth_eig.eigenvalues, truth_eig.eigenfunctions};

  BenchResult out;
  out.truth_elements = sc.truth_elements;
  out.replications.resize(static_cast<std::size_t>(opt.replications));
  parallel_for(out.replications.size(), opt.threads, [&](std::size_t r) {
    auto& rep = out.replications[r];
    const auto s = replication_seed(opt.seed, static_cast<int>(r));
    try {
      const auto sample = simulate(sc.spec, sc.design, s);
      FitConfig c = cfg;
      c.seed = s;
      const auto fitted = fit(sample, c);
      const auto base = std::find_if(fitted.baselines.begin(), fitted.baselines.end(),
                                     [&](const auto& kv) { return kv.first == opt.baseline_h; });
      const io::EigenTable baseline{base->second.grid, base->second.eigenvalues, base->second.eigenfunctions};
      rep.metrics = io::evaluate(fitted.grid, fitted.eigenvalues, fitted.eigenfunctions, baseline, truth);
      rep.h_lambda = fitted.h_lambda;
      rep.h_psi = fitted.h_psi;
      rep.correction_checks = static_cast<long>(fitted.correction_checks.size());
      for (const auto& chk : fitted.correction_checks) rep.correction_violations += chk.holds() ? 0 : 1;
      rep.timing = fitted.timing;
      rep.ok = true;
    } catch (const InfeasibleError& e) {
      rep.error = e.what();
    } catch (const NumericalError& e) {
      rep.error = e.what();
    }
  });
  return out;
}

namespace detail {

inline std::string csv_ratio(const std::optional<double>& r) { return r ? io::format_number(*r) : "NA"; }

struct MetricColumn {
  const char* name;
  std::optional<double> (*get)(const io::ElementMetrics&);
};

inline const std::vector<MetricColumn>& metric_columns() {
  static const std::vector<MetricColumn> cols{
      {"lambda_error", [](const io::ElementMetrics& m) -> std::optional<double> { return m.lambda_error; }},
      {"psi_error", [](const io::ElementMetrics& m) -> std::optional<double> { return m.psi_error; }},
      {"ratio_lambda", [](const io::ElementMetrics& m) { return m.ratio_lambda; }},
      {"ratio_psi", [](const io::ElementMetrics& m) { return m.ratio_psi; }},
  };
  return cols;
}

inline std::vector<double> column(const BenchResult& b, std::size_t j, const MetricColumn& col) {
  std::vector<double> v;
  for (const auto& rep : b.replications) {
    if (!rep.ok || j >= rep.metrics.size()) continue;
    if (auto x = col.get(rep.metrics[j])) v.push_back(*x);
  }
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

struct BenchFiles {
  std::string replications, quantiles, boxplot, summary, timing;
};

/// Aggregate tables (deterministic) plus a separate timing table.
inline BenchFiles format_bench(const BenchResult& b, const BenchOptions& opt) {
  using io::format_number;
  BenchFiles f;
  f.replications =
      "replication,j,lambda_error,lambda_error_baseline,ratio_lambda,psi_error,psi_error_baseline,ratio_psi,h_lambda,"
      "h_psi,correction_violations,status\n";
  f.timing = "replication,presmoothing,regularity,moments,first_bounds,preliminary,second_bounds,final_estimates,"
             "baselines,total\n";
  long failures = 0, violations = 0;
  for (std::size_t r = 0; r < b.replications.size(); ++r) {
    const auto& rep = b.replications[r];
    if (!rep.ok) {
      ++failures;
      f.replications += std::to_string(r) + ",NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,\"" + rep.error + "\"\n";
      continue;
    }
    violations += rep.correction_violations;
    for (std::size_t j = 0; j < rep.metrics.size(); ++j) {
      const auto& m = rep.metrics[j];
      f.replications += std::to_string(r) + "," + std::to_string(m.j) + "," + format_number(m.lambda_error) + "," +
                        format_number(m.lambda_error_baseline) + "," + detail::csv_ratio(m.ratio_lambda) + "," +
                        format_number(m.psi_error) + "," + format_number(m.psi_error_baseline) + "," +
                        detail::csv_ratio(m.ratio_psi) + "," + format_number(rep.h_lambda[j]) + "," +
                        format_number(rep.h_psi[j]) + "," + std::to_string(rep.correction_violations) + ",ok\n";
    }
    const auto& t = rep.timing;
    f.timing += std::to_string(r) + "," + format_number(t.presmoothing) + "," + format_number(t.regularity) + "," +
                format_number(t.moments) + "," + format_number(t.first_bounds) + "," + format_number(t.preliminary) +
                "," + format_number(t.second_bounds) + "," + format_number(t.final_estimates) + "," +
                format_number(t.baselines) + "," + format_number(t.total()) + "\n";
  }

  std::size_t J = 0;
  for (const auto& rep : b.replications) J = std::max(J, rep.metrics.size());
  const std::vector<double> probs{0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};
  f.quantiles = "j,metric,n,q00,q05,q25,q50,q75,q95,q100\n";
  f.boxplot = "j,metric,n_kept,min,q25,median,q75,max\n";
  io::json medians = io::json::array();
  for (std::size_t j = 0; j < J; ++j) {
    io::json med{{"j", j + 1}};
    for (const auto& col : detail::metric_columns()) {
      const auto v = detail::column(b, j, col);
      f.quantiles += std::to_string(j + 1) + "," + col.name + "," + std::to_string(v.size());
      for (double p : probs) f.quantiles += "," + format_number(io::quantile_sorted(v, p));
      f.quantiles += "\n";

      const double lo = io::quantile_sorted(v, 0.05), hi = io::quantile_sorted(v, 0.95);
      std::vector<double> kept;
      for (double x : v)
        if (x >= lo && x <= hi) kept.push_back(x);
      f.boxplot += std::to_string(j + 1) + "," + col.name + "," + std::to_string(kept.size());
      for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) f.boxplot += "," + format_number(io::quantile_sorted(kept, p));
      f.boxplot += "\n";
      med[col.name] = io::number(io::quantile_sorted(v, 0.5));
    }
    medians.push_back(med);
  }

  const io::json summary{{"schema_version", io::schema_version},
                         {"kind", "bench_summary"},
                         {"replications", b.replications.size()},
                         {"failed_replications", failures},
                         {"seed", opt.seed},
                         {"baseline_h", opt.baseline_h},
                         {"correction_bound_violations", violations},
                         {"medians", medians}};
  f.summary = summary.dump(2) + "\n";
  return f;
}

inline void write_bench(const BenchFiles& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_file((dir / "replications.csv").string(), f.replications);
  io::write_file((dir / "quantiles.csv").string(), f.quantiles);
  io::write_file((dir / "boxplot.csv").string(), f.boxplot);
  io::write_file((dir / "summary.json").string(), f.summary);
  io::write_file((dir / "timing.csv").string(), f.timing);
}

}  // namespace afpca
