#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afpca/data_model.hpp"
#include "afpca/eigen_decomposition.hpp"
#include "afpca/errors.hpp"
#include "afpca/pipeline.hpp"
#include "afpca/simulator.hpp"

namespace afpca::io {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------- curves

inline std::string design_name(Design d) { return d == Design::Common ? "common" : "independent"; }

inline Design parse_design(const std::string& s, long line) {
  if (s == "common") return Design::Common;
  if (s == "independent") return Design::Independent;
  throw ParseError("unknown design '" + s + "'", line);
}

/// Newline-delimited records {"id","t","y"}, optionally preceded by {"design","domain_length"}.
inline std::string write_curves(const FunctionalSample& sample) {
  std::string out = json{{"design", design_name(sample.design())}, {"domain_length", sample.domain_length()}}.dump();
  out += '\n';
  for (const auto& c : sample) {
    json rec;
    rec["id"] = c.id();
    rec["t"] = std::vector<double>(c.times().begin(), c.times().end());
    rec["y"] = std::vector<double>(c.values().begin(), c.values().end());
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline FunctionalSample read_curves(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  Design design = Design::Independent;
  double domain_length = 1.0;
  bool header_allowed = true;
  std::vector<Curve> curves;
  std::set<long> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    if (!rec.is_object()) throw ParseError("record is not an object", line_no);
    try {
      if (!rec.contains("t")) {
        if (!header_allowed) throw ParseError("header must precede the curve records", line_no);
        for (const auto& [k, v] : rec.items())
          if (k != "design" && k != "domain_length") throw ParseError("unknown header key '" + k + "'", line_no);
        if (rec.contains("design")) design = parse_design(rec.at("design").get<std::string>(), line_no);
        if (rec.contains("domain_length")) domain_length = rec.at("domain_length").get<double>();
        header_allowed = false;
        continue;
      }
      header_allowed = false;
      for (const auto& [k, v] : rec.items())
        if (k != "id" && k != "t" && k != "y") throw ParseError("unknown record key '" + k + "'", line_no);
      const long id = rec.at("id").get<long>();
      if (!ids.insert(id).second) throw ParseError("duplicate curve id " + std::to_string(id), line_no);
      curves.emplace_back(id, rec.at("t").get<std::vector<double>>(), rec.at("y").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad field: ") + e.what(), line_no);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  try {
    return FunctionalSample(std::move(curves), design, domain_length);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

// ---------------------------------------------------------------- config

inline Kernel parse_kernel(const std::string& name) {
  try {
    return Kernel{kernel_from_string(name)};
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

inline void require_schema(const json& j, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + " must be an object");
  if (!j.contains("schema_version")) throw ParseError(what + " lacks schema_version");
  if (j.at("schema_version") != schema_version)
    throw ParseError(what + ": unsupported schema_version " + j.at("schema_version").dump());
}

inline FitConfig parse_config(const json& j) {
  require_schema(j, "config");
  FitConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "schema_version") continue;
      else if (k == "J") c.J = v.get<int>();
      else if (k == "K0") c.K0 = v.get<int>();
      else if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "zeta") c.zeta = v.get<double>();
      else if (k == "h_clip_min") c.h_clip_min = v.get<double>();
      else if (k == "h_clip_max") c.h_clip_max = v.get<double>();
      else if (k == "l_clip_min") c.l_clip_min = v.get<double>();
      else if (k == "knots_override") c.knots_override = v.get<int>();
      else if (k == "noise_b") c.noise_b = v.get<double>();
      else if (k == "subset_size") c.subset_size = v.get<int>();
      else if (k == "fine_grid_size") c.fine_grid_size = v.get<int>();
      else if (k == "h_grid_count") c.h_grid_count = v.get<int>();
      else if (k == "h_grid_max") c.h_grid_max = v.get<double>();
      else if (k == "h_grid_min") c.h_grid_min = v.get<double>();
      else if (k == "kernel") c.kernel = parse_kernel(v.get<std::string>());
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "baseline_h") c.baseline_h = v.get<std::vector<double>>();
      else throw ParseError("config: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

inline json config_to_json(const FitConfig& c) {
  return {{"schema_version", schema_version},
          {"J", c.J},
          {"K0", c.K0},
          {"gamma", c.gamma},
          {"zeta", c.zeta},
          {"h_clip_min", c.h_clip_min},
          {"h_clip_max", c.h_clip_max},
          {"l_clip_min", c.l_clip_min},
          {"knots_override", c.knots_override},
          {"noise_b", c.noise_b},
          {"subset_size", c.subset_size},
          {"fine_grid_size", c.fine_grid_size},
          {"h_grid_count", c.h_grid_count},
          {"h_grid_max", c.h_grid_max},
          {"h_grid_min", c.h_grid_min},
          {"kernel", std::string(to_string(c.kernel.type))},
          {"seed", c.seed},
          {"baseline_h", c.baseline_h}};
}

// ---------------------------------------------------------------- scenario

/// A constant, a table [[t, v], ...] (piecewise linear), or a named function.
inline ScalarFunction parse_function(const json& v, const std::string& key) {
  if (v.is_number()) return constant_function(v.get<double>());
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (name == "zero") return constant_function(0.0);
    if (name == "one") return constant_function(1.0);
    if (name == "sin2pi") return [](double t) { return std::sin(2.0 * std::numbers::pi * t); };
    throw ParseError("scenario: unknown function name '" + name + "' for " + key);
  }
  if (v.is_array()) {
    std::vector<double> t, y;
    for (const auto& row : v) {
      if (!row.is_array() || row.size() != 2) throw ParseError("scenario: table rows of " + key + " must be [t, value]");
      t.push_back(row[0].get<double>());
      y.push_back(row[1].get<double>());
    }
    try {
      return piecewise_linear(std::move(t), std::move(y));
    } catch (const std::invalid_argument& e) {
      throw ParseError("scenario: " + key + ": " + e.what());
    }
  }
  throw ParseError("scenario: " + key + " must be a number, a name or a table");
}

struct Scenario {
  MfbmSpec spec;
  DesignSpec design;
  int truth_elements = 9;
  int truth_grid = 501;
};

/// Presets: "fbm" (constant H, identity deformation) and "power_like" (user tables for H, L, m2, mu).
inline Scenario parse_scenario(const json& j) {
  require_schema(j, "scenario");
  Scenario s;
  const std::string preset = j.value("preset", std::string("fbm"));
  if (preset != "fbm" && preset != "power_like") throw ParseError("scenario: unknown preset '" + preset + "'");
  if (preset == "power_like") {
    for (const char* key : {"H", "L", "m2", "mu"})
      if (!j.contains(key)) throw ParseError(std::string("scenario: preset power_like needs ") + key);
    s.spec.A0 = 1.0;
  }
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "schema_version" || k == "preset") continue;
      else if (k == "H") s.spec.H = parse_function(v, k);
      else if (k == "L") s.spec.L = parse_function(v, k);
      else if (k == "m2") {
        if (!v.is_null()) s.spec.m2_target = parse_function(v, k);
      } else if (k == "mu") s.spec.mu = parse_function(v, k);
      else if (k == "sigma") s.spec.sigma = parse_function(v, k);
      else if (k == "A0") s.spec.A0 = v.get<double>();
      else if (k == "sigma0") s.spec.sigma0 = v.get<double>();
      else if (k == "N") s.design.N = v.get<int>();
      else if (k == "m") s.design.m = v.get<double>();
      else if (k == "design") {
        const auto d = v.get<std::string>();
        if (d == "independent") s.design.kind = DesignKind::IndependentUniformPoisson;
        else if (d == "common") s.design.kind = DesignKind::CommonEquispaced;
        else throw ParseError("scenario: unknown design '" + d + "'");
      } else if (k == "truth_elements") s.truth_elements = v.get<int>();
      else if (k == "truth_grid") s.truth_grid = v.get<int>();
      else throw ParseError("scenario: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  if (s.design.N < 2 || s.design.m < 2.0) throw ParseError("scenario: N and m must be at least 2");
  if (s.truth_elements < 1) throw ParseError("scenario: truth_elements must be >= 1");
  if (s.truth_grid < 501) throw ParseError("scenario: truth_grid must be >= 501");
  if (s.spec.m2_target && !(s.spec.A0 > 0.0)) throw ParseError("scenario: A0 must be positive with an m2 target");
  return s;
}

// ---------------------------------------------------------------- results

/// Non-finite numbers are written as null.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline double to_number(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

inline json eigen_to_json(const EigenResult& e) {
  return {{"grid", e.grid.points},
          {"weights", e.grid.weights},
          {"eigenvalues", numbers(e.eigenvalues)},
          {"raw_eigenvalues", numbers(e.raw_eigenvalues)},
          {"eigenfunctions", e.eigenfunctions}};
}

inline json truth_to_json(const EigenResult& truth) {
  json j = eigen_to_json(truth);
  j["schema_version"] = schema_version;
  j["kind"] = "truth";
  return j;
}

struct EigenTable {
  Grid grid;
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> eigenfunctions;
};

inline EigenTable eigen_table_from_json(const json& j, const std::string& what) {
  try {
    EigenTable t;
    t.grid.points = j.at("grid").get<std::vector<double>>();
    t.grid.weights = j.at("weights").get<std::vector<double>>();
    t.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    t.eigenfunctions = j.at("eigenfunctions").get<std::vector<std::vector<double>>>();
    if (t.grid.points.size() != t.grid.weights.size()) throw ParseError(what + ": grid and weights differ in length");
    if (t.eigenfunctions.size() != t.eigenvalues.size())
      throw ParseError(what + ": eigenvalue and eigenfunction counts differ");
    for (const auto& f : t.eigenfunctions)
      if (f.size() != t.grid.points.size()) throw ParseError(what + ": eigenfunction off the grid");
    return t;
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline json terms_to_json(const std::vector<std::vector<BoundTerms>>& trace) {
  json out = json::array();
  for (const auto& row : trace) {
    std::vector<double> b1, b2, b3;
    std::vector<bool> feasible;
    for (const auto& t : row) {
      b1.push_back(t.B1);
      b2.push_back(t.B2);
      b3.push_back(t.B3);
      feasible.push_back(t.feasible);
    }
    out.push_back({{"B1", numbers(b1)}, {"B2", numbers(b2)}, {"B3", numbers(b3)}, {"feasible", feasible}});
  }
  return out;
}

inline json selection_to_json(const BandwidthSelection& s) {
  return {{"grid", s.grid},
          {"lambda_index", s.lambda_index},
          {"psi_index", s.psi_index},
          {"lambda_raw", s.lambda_raw},
          {"psi_raw", s.psi_raw},
          {"lambda_inflated", s.lambda_inflated},
          {"psi_inflated", s.psi_inflated},
          {"lambda_trace", terms_to_json(s.lambda_trace)},
          {"psi_trace", terms_to_json(s.psi_trace)}};
}

inline json timing_to_json(const StageTiming& t) {
  return {{"presmoothing", t.presmoothing},   {"regularity", t.regularity},
          {"moments", t.moments},             {"first_bounds", t.first_bounds},
          {"preliminary", t.preliminary},     {"second_bounds", t.second_bounds},
          {"final_estimates", t.final_estimates}, {"baselines", t.baselines},
          {"total", t.total()}};
}

/// Fit report. Timing is kept apart so the report itself is reproducible.
inline json fit_to_json(const FitResult& r, const FitConfig& cfg) {
  json j;
  j["schema_version"] = schema_version;
  j["kind"] = "fit";
  j["config"] = config_to_json(cfg);
  j["grid"] = r.grid.points;
  j["weights"] = r.grid.weights;
  j["eigenvalues"] = numbers(r.eigenvalues);
  j["raw_eigenvalues"] = numbers(r.raw_eigenvalues);
  j["eigenfunctions"] = r.eigenfunctions;
  j["h_lambda"] = r.h_lambda;
  j["h_psi"] = r.h_psi;
  j["b_lambda"] = r.b_lambda;
  j["b_psi"] = r.b_psi;
  j["eigenvalues_monotone"] = r.eigenvalues_monotone;
  j["presmoothing_bandwidth"] = r.presmoothing_bandwidth;
  j["regularity"] = {{"H", r.regularity.H},
                     {"L", r.regularity.L},
                     {"delta_star", r.regularity.delta_star},
                     {"gamma", r.regularity.gamma},
                     {"param_points", r.regularity.param_points},
                     {"param_H", r.regularity.param_H},
                     {"param_L", r.regularity.param_L}};
  j["moments"] = {{"m2", r.moments.m2}, {"sigma2", r.moments.sigma2}, {"b_used", r.moments.b_used}};
  j["first_run"] = selection_to_json(r.first_run);
  j["preliminary"] = {{"h", r.preliminary_h},
                      {"eigenvalues", numbers(r.preliminary.eigenvalues)},
                      {"raw_eigenvalues", numbers(r.preliminary.raw_eigenvalues)}};
  j["second_run"] = selection_to_json(r.second_run);
  json base = json::array();
  for (const auto& [h, e] : r.baselines) {
    base.push_back({{"h", h}, {"eigenvalues", numbers(e.eigenvalues)}, {"eigenfunctions", e.eigenfunctions}});
  }
  j["baselines"] = base;
  json checks = json::array();
  for (const auto& c : r.correction_checks)
    checks.push_back({{"h", c.h}, {"b", c.b}, {"integrated_square", c.integrated_square}, {"bound", c.bound},
                      {"holds", c.holds()}});
  j["correction_checks"] = checks;
  return j;
}

/// Pieces of a fit report that evaluation needs.
struct FitSummary {
  Grid grid;
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> eigenfunctions;
  std::map<double, EigenTable> baselines;
};

inline FitSummary fit_summary_from_json(const json& j) {
  if (!j.is_object() || j.value("kind", std::string()) != "fit") throw ParseError("fit file: kind must be 'fit'");
  require_schema(j, "fit file");
  FitSummary s;
  const auto main = eigen_table_from_json(j, "fit file");
  s.grid = main.grid;
  s.eigenvalues = main.eigenvalues;
  s.eigenfunctions = main.eigenfunctions;
  try {
    for (const auto& b : j.at("baselines")) {
      EigenTable t;
      t.grid = s.grid;
      t.eigenvalues = b.at("eigenvalues").get<std::vector<double>>();
      t.eigenfunctions = b.at("eigenfunctions").get<std::vector<std::vector<double>>>();
      for (const auto& f : t.eigenfunctions)
        if (f.size() != s.grid.size()) throw ParseError("fit file: baseline eigenfunction off the grid");
      s.baselines.emplace(b.at("h").get<double>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("fit file: ") + e.what());
  }
  return s;
}

inline EigenTable truth_from_json(const json& j) {
  if (!j.is_object() || j.value("kind", std::string()) != "truth") throw ParseError("truth file: kind must be 'truth'");
  require_schema(j, "truth file");
  return eigen_table_from_json(j, "truth file");
}

// ---------------------------------------------------------------- metrics

struct ElementMetrics {
  int j = 0;  ///< 1-based
  double lambda_error = 0, lambda_error_baseline = 0;
  double psi_error = 0, psi_error_baseline = 0;
  std::optional<double> ratio_lambda, ratio_psi;  ///< empty when the denominator is 0
};

inline std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

/// Errors of the adaptive estimates and of the baseline against the truth, on the fit grid.
inline std::vector<ElementMetrics> evaluate(const Grid& grid, const std::vector<double>& eigenvalues,
                                            const std::vector<std::vector<double>>& eigenfunctions,
                                            const EigenTable& baseline, const EigenTable& truth) {
  const std::size_t J = std::min({eigenvalues.size(), eigenfunctions.size(), baseline.eigenvalues.size(),
                                  truth.eigenvalues.size()});
  std::vector<ElementMetrics> out;
  for (std::size_t j = 0; j < J; ++j) {
    const auto psi_true = interpolate(truth.grid, truth.eigenfunctions[j], grid.points);
    ElementMetrics m;
    m.j = static_cast<int>(j + 1);
    m.lambda_error = std::abs(eigenvalues[j] - truth.eigenvalues[j]);
    m.lambda_error_baseline = std::abs(baseline.eigenvalues[j] - truth.eigenvalues[j]);
    m.psi_error = l2_error(eigenfunctions[j], psi_true, grid);
    m.psi_error_baseline = l2_error(baseline.eigenfunctions[j], psi_true, grid);
    m.ratio_lambda = ratio(m.lambda_error, m.lambda_error_baseline);
    m.ratio_psi = ratio(m.psi_error, m.psi_error_baseline);
    out.push_back(m);
  }
  return out;
}

inline std::vector<ElementMetrics> evaluate(const FitSummary& fit, double baseline_h, const EigenTable& truth) {
  const auto it = std::find_if(fit.baselines.begin(), fit.baselines.end(), [&](const auto& kv) {
    return std::abs(kv.first - baseline_h) <= 1e-12 * std::max(1.0, std::abs(baseline_h));
  });
  if (it == fit.baselines.end())
    throw InfeasibleError(Stage::Evaluation, "fit file has no baseline at h = " + std::to_string(baseline_h) +
                                                 "; add it to the config's baseline_h and refit");
  return evaluate(fit.grid, fit.eigenvalues, fit.eigenfunctions, it->second, truth);
}

inline json optional_ratio(const std::optional<double>& r) { return r ? json(*r) : json("NA"); }

inline json metrics_to_json(const std::vector<ElementMetrics>& ms, double baseline_h) {
  json elements = json::array();
  for (const auto& m : ms)
    elements.push_back({{"j", m.j},
                        {"lambda_error", m.lambda_error},
                        {"lambda_error_baseline", m.lambda_error_baseline},
                        {"ratio_lambda", optional_ratio(m.ratio_lambda)},
                        {"psi_error", m.psi_error},
                        {"psi_error_baseline", m.psi_error_baseline},
                        {"ratio_psi", optional_ratio(m.ratio_psi)}});
  return {{"schema_version", schema_version}, {"kind", "metrics"}, {"baseline_h", baseline_h}, {"elements", elements}};
}

// ---------------------------------------------------------------- tables

/// 17 significant digits, enough to read back the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Linear-interpolation quantile of sorted data (type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace afpca::io
