#pragma once

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "afpca/bench.hpp"
#include "afpca/io.hpp"
#include "afpca/pipeline.hpp"
#include "afpca/simulator.hpp"

namespace afpca {

enum ExitCode : int { Success = 0, Failure = 1, ParseFailure = 2, Infeasible = 3, Numerical = 4 };

namespace detail {

inline int run_simulate(const std::string& scenario_path, const std::string& out, const std::string& truth_out,
                        std::uint64_t seed, unsigned threads) {
  const auto sc = io::parse_scenario(io::parse_json(io::read_file(scenario_path), "scenario"));
  const auto sample = simulate(sc.spec, sc.design, seed, threads);
  io::write_file(out, io::write_curves(sample));
  const auto truth = true_eigen_elements(sc.spec, sc.truth_elements, sc.truth_grid);
  io::write_file(truth_out.empty() ? out + ".truth.json" : truth_out, io::truth_to_json(truth).dump() + "\n");
  return Success;
}

inline FitConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return io::parse_config(io::parse_json(io::read_file(path), "config"));
}

inline int run_fit(const std::string& data, const std::string& config, const std::string& out,
                   const std::string& timing_out) {
  const auto cfg = load_config(config);
  const auto sample = io::read_curves(io::read_file(data));
  const auto result = fit(sample, cfg);
  io::write_file(out, io::fit_to_json(result, cfg).dump() + "\n");
  if (!timing_out.empty()) io::write_file(timing_out, io::timing_to_json(result.timing).dump(2) + "\n");
  return Success;
}

inline int run_eval(const std::string& fit_path, const std::string& truth_path, double baseline_h,
                    const std::string& out) {
  const auto fitted = io::fit_summary_from_json(io::parse_json(io::read_file(fit_path), "fit file"));
  const auto truth = io::truth_from_json(io::parse_json(io::read_file(truth_path), "truth file"));
  const auto metrics = io::evaluate(fitted, baseline_h, truth);
  io::write_file(out, io::metrics_to_json(metrics, baseline_h).dump(2) + "\n");
  return Success;
}

inline int run_bench_command(const std::string& scenario_path, const std::string& config, const std::string& out,
                             const BenchOptions& opt) {
  const auto sc = io::parse_scenario(io::parse_json(io::read_file(scenario_path), "scenario"));
  const auto cfg = load_config(config);
  const auto result = run_bench(sc, cfg, opt);
  write_bench(format_bench(result, opt), out);
  return Success;
}

}  // namespace detail

/// Subcommands simulate, fit, eval and bench. Returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Adaptive functional PCA with per-element bandwidths"};
  app.require_subcommand(1);

  std::string scenario, out, truth_out, data, config, fit_path, truth_path, timing_out;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double baseline_h = 0.1;
  int replications = 10;

  auto* sim = app.add_subcommand("simulate", "Draw a sample from a scenario file");
  sim->add_option("--scenario", scenario, "Scenario file")->required();
  sim->add_option("--out", out, "Output curve file")->required();
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--truth-out", truth_out, "True eigen-elements (default <out>.truth.json)");
  sim->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* fit_cmd = app.add_subcommand("fit", "Estimate eigen-elements with adaptive bandwidths");
  fit_cmd->add_option("--data", data, "Curve file")->required();
  fit_cmd->add_option("--config", config, "Config file (defaults when omitted)");
  fit_cmd->add_option("--out", out, "Fit report")->required();
  fit_cmd->add_option("--timing-out", timing_out, "Per-stage timing report");

  auto* eval = app.add_subcommand("eval", "Compare a fit with the truth and a fixed-bandwidth baseline");
  eval->add_option("--fit", fit_path, "Fit report")->required();
  eval->add_option("--truth", truth_path, "Truth file")->required();
  eval->add_option("--baseline-h", baseline_h, "Baseline bandwidth")->check(CLI::PositiveNumber);
  eval->add_option("--out", out, "Metrics report")->required();

  auto* bench = app.add_subcommand("bench", "Replicated simulate, fit and eval with aggregated tables");
  bench->add_option("--scenario", scenario, "Scenario file")->required();
  bench->add_option("--replications", replications, "Number of replications")->check(CLI::PositiveNumber);
  bench->add_option("--out", out, "Output directory")->required();
  bench->add_option("--config", config, "Config file (defaults when omitted)");
  bench->add_option("--seed", seed, "Random seed");
  bench->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  bench->add_option("--baseline-h", baseline_h, "Baseline bandwidth")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, std::cout, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, std::cout, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cout, err);
    return ParseFailure;
  }

  try {
    if (*sim) return detail::run_simulate(scenario, out, truth_out, seed, threads);
    if (*fit_cmd) return detail::run_fit(data, config, out, timing_out);
    if (*eval) return detail::run_eval(fit_path, truth_path, baseline_h, out);
    if (*bench) return detail::run_bench_command(scenario, config, out, {replications, seed, threads, baseline_h});
  } catch (const ParseError& e) {
    err << "error [input]: " << e.what() << "\n";
    return ParseFailure;
  } catch (const InfeasibleError& e) {
    err << "error " << e.what() << "\n";
    return Infeasible;
  } catch (const NumericalError& e) {
    err << "error " << e.what() << "\n";
    return Numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return Failure;
  }
  return Failure;
}

}  // namespace afpca
