#pragma once

// Period estimation for irregularly sampled light curves with a K-harmonic
// sinusoidal model. At a fixed angular frequency the model is linear,
//   y = b0 + sum_k [b_k1 sin(k w t) + b_k2 cos(k w t)],
// so the periodogram is the weighted residual sum of squares of a weighted
// least squares fit at every grid frequency.

#include "hetwls/estimators.hpp"
#include "hetwls/simulation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hetwls {

struct LightCurve {
  Vector t;      // days, any order
  Vector y;      // magnitudes
  Vector sigma;  // magnitude uncertainties, > 0

  Eigen::Index size() const noexcept { return t.size(); }
  // Throws InvalidArgument on mismatched lengths or nonpositive sigma.
  void validate() const;
};

enum class PeriodWeighting { InverseVariance, Identity, DeltaRefit };

std::string weighting_name(PeriodWeighting w);
PeriodWeighting parse_weighting(const std::string& name);

struct PeriodogramConfig {
  int K = 1;
  std::vector<double> omega_grid;  // strictly increasing, positive (rad/day)
  PeriodWeighting weighting = PeriodWeighting::InverseVariance;
  GammaFunctional gamma = GammaFunctional::trace();
  int delta_iterations = 2;  // adaptive rounds used to estimate delta for DeltaRefit
};

struct PeriodogramResult {
  double omega_hat = 0.0;
  std::size_t best_index = 0;
  std::vector<double> rss_curve;  // +inf where the design was singular
  Vector beta_hat;
  Vector amplitudes;
  Vector phases;
  std::optional<double> delta;
  std::size_t singular_count = 0;

  double period() const;
};

// Columns 1, sin(w t), cos(w t), ..., sin(K w t), cos(K w t).
Matrix design_matrix(double omega, const Vector& t, int K);
// Same, written into `out` (resized as needed).
void design_matrix_into(double omega, const Vector& t, int K, Matrix& out);

struct FrequencyFit {
  Vector beta;
  double weighted_rss = 0.0;
};

FrequencyFit fit_at_frequency(const LightCurve& lc, double omega, int K, const Vector& weights);

// Weighted RSS at every grid frequency (singular designs give +inf) and the
// argmin, with ties within a relative 1e-15 going to the lower frequency.
struct Scan {
  std::vector<double> rss;
  std::size_t best_index = 0;
  std::size_t singular_count = 0;
};
Scan scan_frequencies(const LightCurve& lc, int K, std::span<const double> omega_grid,
                      const Vector& weights);

// Throws AllFrequenciesSingular if no grid frequency admits a fit.
PeriodogramResult periodogram(const LightCurve& lc, const PeriodogramConfig& config);

// Uniform frequency grid over periods [min_period, max_period] with spacing
// 2 pi * 0.1 / (time_span * oversample).
std::vector<double> default_frequency_grid(double time_span, double min_period = 0.1,
                                           double max_period = 10.0, double oversample = 5.0);
std::vector<double> uniform_grid(double omega_min, double omega_max, double step);

struct AmplitudesPhases {
  Vector amplitudes;  // a_k >= 0
  Vector phases;      // phi_k in (-pi, pi], zero when a_k == 0
};

// From beta = (b0, b11, b12, ..., bK1, bK2): a_k = hypot(b_k1, b_k2),
// phi_k = atan2(b_k2, b_k1).
AmplitudesPhases amplitudes_phases(const Vector& beta);
// Inverse map; b0 is carried through.
Vector beta_from_amplitudes(double b0, const Vector& amplitudes, const Vector& phases);

// Uniform subsample without replacement, keeping the input order. Throws
// InvalidTarget if n_target exceeds the curve length.
LightCurve downsample(const LightCurve& lc, std::size_t n_target, std::uint64_t seed);

struct PeriodScore {
  double fraction = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

// Fraction of estimates with |P_hat - P| / P <= tol. Empty input gives 0 with
// count 0.
PeriodScore score_periods(std::span<const double> estimated_periods,
                          std::span<const double> true_periods, double tol = 0.01);

// ---------------------------------------------------------------------------
// Synthetic light curves

enum class CurveShape {
  Sinusoid,
  // Sharp rise in brightness followed by a slow linear decline.
  Sawtooth,
};

struct SyntheticCurveSpec {
  CurveShape shape = CurveShape::Sinusoid;
  int n = 60;
  double min_period = 0.4;
  double max_period = 0.9;
  double amplitude = 1.0;
  double mean_magnitude = 17.0;
  double time_span = 100.0;
  double rise_fraction = 0.15;  // Sawtooth only
  dgp::DiscreteSigma sigma_law{{0.05}, {1.0}};
};

struct CatalogEntry {
  std::string name;
  LightCurve curve;
  double true_period = 0.0;
};

// Curve `index` of a synthetic catalog; period, phase, times and noise are
// drawn from a substream of `seed`.
CatalogEntry synthetic_light_curve(const SyntheticCurveSpec& spec, std::uint64_t seed,
                                   std::uint64_t index);

std::vector<CatalogEntry> synthetic_catalog(const SyntheticCurveSpec& spec, std::size_t count,
                                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Downsampling study: for every (n, K, weighting) cell, downsample each curve
// to n points, estimate the period and score it against the truth.

struct PeriodStudyConfig {
  std::vector<int> n_values{10, 20, 30, 40};
  std::vector<int> K_values{1, 2, 3};
  std::vector<PeriodWeighting> weightings{PeriodWeighting::InverseVariance,
                                          PeriodWeighting::Identity,
                                          PeriodWeighting::DeltaRefit};
  double min_period = 0.1;
  double max_period = 10.0;
  double oversample = 5.0;
  std::optional<double> omega_step;  // overrides the oversample rule
  double tolerance = 0.01;
  GammaFunctional gamma = GammaFunctional::trace();
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct PeriodStudyCell {
  int n = 0;
  int K = 0;
  PeriodWeighting weighting = PeriodWeighting::Identity;
  PeriodScore score;
  std::size_t failures = 0;  // curves skipped (too short or all frequencies singular)
};

struct PeriodStudyResult {
  PeriodStudyConfig config;
  std::vector<PeriodStudyCell> cells;  // n-major, then K, then weighting
  std::size_t catalog_size = 0;

  const PeriodStudyCell& cell(int n, int K, PeriodWeighting w) const;
};

PeriodStudyResult run_period_study(std::span<const CatalogEntry> catalog,
                                   const PeriodStudyConfig& config);

// "omega,rss"
std::string periodogram_csv(std::span<const double> omega_grid, const PeriodogramResult& result);
// Rows n, columns K<k>_<weighting> holding the fraction correct. An empty
// catalog gives the header only.
std::string period_study_csv(const PeriodStudyResult& result);

}  // namespace hetwls
