#pragma once

// JSON job descriptions for the batch front end. Every parser rejects unknown
// keys and throws ParseError with the offending key in the message. Relative
// file paths are resolved against `base_dir` (the config file's directory).
//
// Shared value forms:
//   strategy   "ols" | "identity" | "wls" | "inverse_variance" |
//              "adaptive_known" | "adaptive_grouped"  or an object
//              {"name": ..., "iterations": k} / {"name": "fixed_delta", "delta": d}
//   gamma      "trace" | "x<j>" (diagonal entry of coefficient j, 1-based)
//   grid       {"min_period", "max_period", "oversample"} or
//              {"min_period", "max_period", "step"} (step in rad/day)

#include "hetwls/estimators.hpp"
#include "hetwls/periodfit.hpp"
#include "hetwls/simulation.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hetwls {

WeightStrategy parse_strategy(std::string_view name);
GammaFunctional parse_gamma(std::string_view name);
CoverageEstimator parse_coverage_estimator(std::string_view name);
VarianceEstimator parse_variance_estimator(std::string_view name);

// {"data": "file.csv", "strategy": ..., "gamma": "trace",
//  "variance": "sandwich" | "plug_in" | "none"}
struct FitJob {
  std::filesystem::path data;
  WeightStrategy strategy = strategy::Identity{};
  GammaFunctional gamma = GammaFunctional::trace();
  VarianceEstimator variance = VarianceEstimator::Sandwich;
};
FitJob parse_fit_job(std::string_view json, const std::filesystem::path& base_dir = {});

// {"regression": "quadratic" | {"linear": {"intercept", "slope"}} |
//                {"table": {"x": [...], "f": [...]}},
//  "sigma_law": {"discrete": {"values": [...], "probs": [...]}} |
//               {"step": {"thresholds": [...], "values": [...]}},
//  "n", "replicates", "seed",
//  "strategies": [...], "estimators": ["nu1", "nu2", "nu_or"],
//  "gamma", "level", "threads"}
struct SimulateJob {
  DgpConfig dgp;
  SimOptions options;
};
SimulateJob parse_simulate_job(std::string_view json);

struct GridSpec {
  double min_period = 0.1;
  double max_period = 10.0;
  double oversample = 5.0;
  std::optional<double> step;

  // Frequencies for a curve observed over `time_span` days.
  std::vector<double> frequencies(double time_span) const;
};

// {"curves": ["a.csv", ...], "K": 1, "weighting": "identity", "grid": {...},
//  "gamma", "delta_iterations"}
struct PeriodogramJob {
  std::vector<std::filesystem::path> curves;
  int K = 1;
  PeriodWeighting weighting = PeriodWeighting::Identity;
  GridSpec grid;
  GammaFunctional gamma = GammaFunctional::trace();
  int delta_iterations = 2;
};
PeriodogramJob parse_periodogram_job(std::string_view json,
                                     const std::filesystem::path& base_dir = {});

// {"manifest": "catalog.csv"} or
// {"synthetic": {"shape": "sawtooth" | "sinusoid", "count", "n", "min_period",
//                "max_period", "amplitude", "mean_magnitude", "time_span",
//                "rise_fraction", "sigma_law": {"values", "probs"}, "seed"}},
// plus "n_values", "K_values", "weightings", "grid", "tolerance", "gamma",
// "seed", "threads".
struct SyntheticCatalogSpec {
  SyntheticCurveSpec curve;
  std::size_t count = 100;
  std::optional<std::uint64_t> seed;  // defaults to the job seed
};

struct ScoreJob {
  std::optional<std::filesystem::path> manifest;
  std::optional<SyntheticCatalogSpec> synthetic;
  PeriodStudyConfig study;
};
ScoreJob parse_score_job(std::string_view json, const std::filesystem::path& base_dir = {});

}  // namespace hetwls
