#include "hetwls/periodfit.hpp"

#include "format.hpp"
#include "parallel.hpp"

#include "hetwls/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace hetwls {

namespace {

constexpr std::uint16_t kDownsampleStream = 2;
constexpr std::uint16_t kCatalogStream = 3;
constexpr double kTieTolerance = 1e-15;

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, msg);
}

void check_harmonics(int K) { require(K >= 1, "number of harmonics must be at least 1"); }

Vector weights_for(const LightCurve& lc, PeriodWeighting w, double delta = 0.0) {
  switch (w) {
    case PeriodWeighting::Identity: return Vector::Ones(lc.size());
    case PeriodWeighting::InverseVariance: return lc.sigma.array().square().inverse();
    case PeriodWeighting::DeltaRefit: return (lc.sigma.array().square() + delta).inverse();
  }
  return Vector::Ones(lc.size());
}

double time_span(const LightCurve& lc) { return lc.t.maxCoeff() - lc.t.minCoeff(); }

}  // namespace

void LightCurve::validate() const {
  require(t.size() == y.size() && t.size() == sigma.size(),
          "LightCurve: t, mag and err must have equal lengths");
  require(t.allFinite() && y.allFinite(), "LightCurve: times and magnitudes must be finite");
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    require(std::isfinite(sigma[i]) && sigma[i] > 0.0, "LightCurve: errors must be positive");
}

std::string weighting_name(PeriodWeighting w) {
  switch (w) {
    case PeriodWeighting::InverseVariance: return "inverse_variance";
    case PeriodWeighting::Identity: return "identity";
    case PeriodWeighting::DeltaRefit: return "delta";
  }
  return "unknown";
}

PeriodWeighting parse_weighting(const std::string& name) {
  if (name == "inverse_variance" || name == "wls") return PeriodWeighting::InverseVariance;
  if (name == "identity" || name == "ols") return PeriodWeighting::Identity;
  if (name == "delta" || name == "delta_refit") return PeriodWeighting::DeltaRefit;
  throw Error(ErrorCode::InvalidArgument, "unknown period weighting '" + name + "'");
}

double PeriodogramResult::period() const { return 2.0 * std::numbers::pi / omega_hat; }

// ---------------------------------------------------------------------------

void design_matrix_into(double omega, const Vector& t, int K, Matrix& X) {
  check_harmonics(K);
  require(omega > 0.0, "design_matrix: omega must be positive");
  X.resize(t.size(), 2 * K + 1);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double arg = omega * t[i];
    const double s1 = std::sin(arg);
    const double c1 = std::cos(arg);
    X(i, 0) = 1.0;
    X(i, 1) = s1;
    X(i, 2) = c1;
    // Higher harmonics by angle addition.
    double sk = s1, ck = c1;
    for (int k = 2; k <= K; ++k) {
      const double s_next = sk * c1 + ck * s1;
      const double c_next = ck * c1 - sk * s1;
      sk = s_next;
      ck = c_next;
      X(i, 2 * k - 1) = sk;
      X(i, 2 * k) = ck;
    }
  }
}

Matrix design_matrix(double omega, const Vector& t, int K) {
  Matrix X;
  design_matrix_into(omega, t, K, X);
  return X;
}

FrequencyFit fit_at_frequency(const LightCurve& lc, double omega, int K, const Vector& weights) {
  const Matrix X = design_matrix(omega, lc.t, K);
  WeightedSolver solver(X.rows(), X.cols());
  FrequencyFit out;
  out.beta = solver.solve(X, lc.y, weights);
  out.weighted_rss = solver.weighted_rss();
  return out;
}

Scan scan_frequencies(const LightCurve& lc, int K, std::span<const double> omega_grid,
                      const Vector& weights) {
  require(!omega_grid.empty(), "frequency grid is empty");
  Scan s;
  s.rss.resize(omega_grid.size());
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  Matrix X(lc.size(), 2 * K + 1);
  WeightedSolver solver(lc.size(), 2 * K + 1);
  for (std::size_t j = 0; j < omega_grid.size(); ++j) {
    double rss = std::numeric_limits<double>::infinity();
    design_matrix_into(omega_grid[j], lc.t, K, X);
    try {
      solver.solve(X, lc.y, weights);
      rss = solver.weighted_rss();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularDesign) throw;
      ++s.singular_count;
    }
    s.rss[j] = rss;
    if (std::isfinite(rss) && (!found || rss < best - kTieTolerance * best)) {
      best = rss;
      s.best_index = j;
      found = true;
    }
  }
  if (!found)
    throw Error(ErrorCode::AllFrequenciesSingular, "design is singular at every grid frequency");
  return s;
}

PeriodogramResult periodogram(const LightCurve& lc, const PeriodogramConfig& config) {
  lc.validate();
  check_harmonics(config.K);
  const auto& grid = config.omega_grid;
  require(!grid.empty(), "periodogram: frequency grid is empty");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    require(grid[j] > 0.0, "periodogram: frequencies must be positive");
    if (j > 0) require(grid[j] > grid[j - 1], "periodogram: grid must be strictly increasing");
  }
  require(lc.size() >= 2 * config.K + 2, "periodogram: light curve needs at least 2K + 2 points");

  PeriodogramResult res;
  Vector weights;
  if (config.weighting == PeriodWeighting::DeltaRefit) {
    const Scan first = scan_frequencies(lc, config.K, grid, weights_for(lc, PeriodWeighting::Identity));
    const double omega0 = grid[first.best_index];
    const RegressionData data(design_matrix(omega0, lc.t, config.K), lc.y, lc.sigma);
    const FitResult adaptive =
        fit(data, strategy::AdaptiveKnown{config.delta_iterations}, config.gamma,
            VarianceEstimator::None);
    res.delta = adaptive.delta.value_or(0.0);
    weights = weights_for(lc, PeriodWeighting::DeltaRefit, *res.delta);
  } else {
    weights = weights_for(lc, config.weighting);
  }

  Scan scan = scan_frequencies(lc, config.K, grid, weights);
  res.best_index = scan.best_index;
  res.omega_hat = grid[scan.best_index];
  res.singular_count = scan.singular_count;
  res.rss_curve = std::move(scan.rss);
  res.beta_hat = fit_at_frequency(lc, res.omega_hat, config.K, weights).beta;
  auto ap = amplitudes_phases(res.beta_hat);
  res.amplitudes = std::move(ap.amplitudes);
  res.phases = std::move(ap.phases);
  return res;
}

std::vector<double> uniform_grid(double omega_min, double omega_max, double step) {
  require(omega_min > 0.0 && omega_max > omega_min && step > 0.0,
          "uniform_grid: need 0 < omega_min < omega_max and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((omega_max - omega_min) / step)) + 1;
  std::vector<double> grid(count);
  for (std::size_t j = 0; j < count; ++j) grid[j] = omega_min + static_cast<double>(j) * step;
  return grid;
}

std::vector<double> default_frequency_grid(double span, double min_period, double max_period,
                                           double oversample) {
  require(span > 0.0, "default_frequency_grid: time span must be positive");
  require(min_period > 0.0 && max_period > min_period && oversample > 0.0,
          "default_frequency_grid: invalid period range or oversampling");
  const double two_pi = 2.0 * std::numbers::pi;
  return uniform_grid(two_pi / max_period, two_pi / min_period, two_pi * 0.1 / (span * oversample));
}

// ---------------------------------------------------------------------------

AmplitudesPhases amplitudes_phases(const Vector& beta) {
  require(beta.size() >= 3 && beta.size() % 2 == 1,
          "amplitudes_phases: beta must have length 2K + 1");
  const Eigen::Index K = (beta.size() - 1) / 2;
  AmplitudesPhases out{Vector(K), Vector(K)};
  for (Eigen::Index k = 0; k < K; ++k) {
    const double s = beta[2 * k + 1];
    const double c = beta[2 * k + 2];
    out.amplitudes[k] = std::hypot(s, c);
    double phi = out.amplitudes[k] == 0.0 ? 0.0 : std::atan2(c, s);
    if (phi <= -std::numbers::pi) phi = std::numbers::pi;
    out.phases[k] = phi;
  }
  return out;
}

Vector beta_from_amplitudes(double b0, const Vector& amplitudes, const Vector& phases) {
  require(amplitudes.size() == phases.size(), "beta_from_amplitudes: length mismatch");
  Vector beta(2 * amplitudes.size() + 1);
  beta[0] = b0;
  for (Eigen::Index k = 0; k < amplitudes.size(); ++k) {
    beta[2 * k + 1] = amplitudes[k] * std::cos(phases[k]);
    beta[2 * k + 2] = amplitudes[k] * std::sin(phases[k]);
  }
  return beta;
}

LightCurve downsample(const LightCurve& lc, std::size_t n_target, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(lc.size());
  if (n_target > n)
    throw Error(ErrorCode::InvalidTarget, "downsample: target " + std::to_string(n_target) +
                                              " exceeds curve length " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first n_target slots hold the sample.
  Philox4x32 rng(seed, make_stream(kDownsampleStream, 0));
  for (std::size_t i = 0; i < n_target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n_target);
  std::sort(idx.begin(), idx.end());
  LightCurve out{Vector(n_target), Vector(n_target), Vector(n_target)};
  for (std::size_t k = 0; k < n_target; ++k) {
    const auto i = static_cast<Eigen::Index>(idx[k]);
    const auto o = static_cast<Eigen::Index>(k);
    out.t[o] = lc.t[i];
    out.y[o] = lc.y[i];
    out.sigma[o] = lc.sigma[i];
  }
  return out;
}

PeriodScore score_periods(std::span<const double> estimated, std::span<const double> truth,
                          double tol) {
  require(estimated.size() == truth.size(), "score_periods: length mismatch");
  PeriodScore s;
  s.count = estimated.size();
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    require(truth[i] > 0.0, "score_periods: true periods must be positive");
    if (std::abs(estimated[i] - truth[i]) / truth[i] <= tol) ++s.correct;
  }
  s.fraction = s.count ? static_cast<double>(s.correct) / static_cast<double>(s.count) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------

CatalogEntry synthetic_light_curve(const SyntheticCurveSpec& spec, std::uint64_t seed,
                                   std::uint64_t index) {
  require(spec.n >= 1 && spec.time_span > 0.0 && spec.min_period > 0.0 &&
              spec.max_period >= spec.min_period,
          "synthetic_light_curve: invalid spec");
  require(spec.rise_fraction > 0.0 && spec.rise_fraction < 1.0,
          "synthetic_light_curve: rise fraction must lie in (0, 1)");
  DgpConfig law_check;
  law_check.sigma_law = spec.sigma_law;
  law_check.validate();

  Philox4x32 rng(seed, make_stream(kCatalogStream, index));
  CatalogEntry e;
  e.name = "synthetic_" + std::to_string(index);
  e.true_period = spec.min_period + (spec.max_period - spec.min_period) * rng.uniform();
  const double phase0 = rng.uniform();

  std::vector<double> times(static_cast<std::size_t>(spec.n));
  for (auto& t : times) t = spec.time_span * rng.uniform();
  std::sort(times.begin(), times.end());

  LightCurve& lc = e.curve;
  lc.t.resize(spec.n);
  lc.y.resize(spec.n);
  lc.sigma.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double t = times[static_cast<std::size_t>(i)];
    const double phase = t / e.true_period + phase0;
    double shape = 0.0;
    if (spec.shape == CurveShape::Sinusoid) {
      shape = 0.5 * std::sin(2.0 * std::numbers::pi * phase);
    } else {
      // Magnitude: faint at phase 0, brightest at rise_fraction, then a linear
      // fade back. Lower magnitude is brighter.
      const double psi = phase - std::floor(phase);
      const double r = spec.rise_fraction;
      shape = psi < r ? 0.5 - psi / r : -0.5 + (psi - r) / (1.0 - r);
    }
    const double u = rng.uniform();
    double cum = 0.0;
    double s = spec.sigma_law.values.back();
    for (std::size_t k = 0; k < spec.sigma_law.probs.size(); ++k) {
      cum += spec.sigma_law.probs[k];
      if (u < cum) {
        s = spec.sigma_law.values[k];
        break;
      }
    }
    lc.t[i] = t;
    lc.sigma[i] = s;
    lc.y[i] = spec.mean_magnitude + spec.amplitude * shape + s * rng.normal();
  }
  return e;
}

std::vector<CatalogEntry> synthetic_catalog(const SyntheticCurveSpec& spec, std::size_t count,
                                            std::uint64_t seed) {
  std::vector<CatalogEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_light_curve(spec, seed, i));
  return out;
}

// ---------------------------------------------------------------------------

const PeriodStudyCell& PeriodStudyResult::cell(int n, int K, PeriodWeighting w) const {
  for (const auto& c : cells)
    if (c.n == n && c.K == K && c.weighting == w) return c;
  throw Error(ErrorCode::InvalidArgument, "PeriodStudyResult: no such cell");
}

PeriodStudyResult run_period_study(std::span<const CatalogEntry> catalog,
                                   const PeriodStudyConfig& config) {
  require(!config.n_values.empty() && !config.K_values.empty() && !config.weightings.empty(),
          "run_period_study: empty sweep");
  for (int K : config.K_values) check_harmonics(K);

  const std::size_t W = config.weightings.size();
  const std::size_t KW = config.K_values.size() * W;
  const std::size_t cells = config.n_values.size() * KW;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  // estimates[curve * cells + cell]; NaN marks a skipped curve.
  std::vector<double> estimates(catalog.size() * cells, nan);

  detail::parallel_for(catalog.size(), config.threads, [&](std::size_t c) {
    const auto& entry = catalog[c];
    for (std::size_t a = 0; a < config.n_values.size(); ++a) {
      const int n = config.n_values[a];
      if (n < 1 || static_cast<Eigen::Index>(n) > entry.curve.size()) continue;
      const LightCurve sub =
          downsample(entry.curve, static_cast<std::size_t>(n),
                     config.seed ^ (0x9E3779B97F4A7C15ull * (c + 1)) ^ (static_cast<std::uint64_t>(n) << 40));
      const double span = time_span(sub);
      if (!(span > 0.0)) continue;
      PeriodogramConfig pc;
      pc.gamma = config.gamma;
      if (config.omega_step) {
        const double two_pi = 2.0 * std::numbers::pi;
        pc.omega_grid =
            uniform_grid(two_pi / config.max_period, two_pi / config.min_period, *config.omega_step);
      } else {
        pc.omega_grid =
            default_frequency_grid(span, config.min_period, config.max_period, config.oversample);
      }
      for (std::size_t b = 0; b < config.K_values.size(); ++b) {
        pc.K = config.K_values[b];
        if (n < 2 * pc.K + 2) continue;
        for (std::size_t w = 0; w < W; ++w) {
          pc.weighting = config.weightings[w];
          try {
            const auto res = periodogram(sub, pc);
            estimates[c * cells + a * KW + b * W + w] = res.period();
          } catch (const Error& e) {
            if (e.code() != ErrorCode::AllFrequenciesSingular &&
                e.code() != ErrorCode::SingularDesign)
              throw;
          }
        }
      }
    }
  });

  PeriodStudyResult out;
  out.config = config;
  out.catalog_size = catalog.size();
  for (std::size_t a = 0; a < config.n_values.size(); ++a) {
    for (std::size_t b = 0; b < config.K_values.size(); ++b) {
      for (std::size_t w = 0; w < W; ++w) {
        PeriodStudyCell cell;
        cell.n = config.n_values[a];
        cell.K = config.K_values[b];
        cell.weighting = config.weightings[w];
        std::vector<double> est, truth;
        for (std::size_t c = 0; c < catalog.size(); ++c) {
          const double v = estimates[c * cells + a * KW + b * W + w];
          if (std::isnan(v)) {
            ++cell.failures;
            continue;
          }
          est.push_back(v);
          truth.push_back(catalog[c].true_period);
        }
        cell.score = score_periods(est, truth, config.tolerance);
        out.cells.push_back(cell);
      }
    }
  }
  return out;
}

std::string periodogram_csv(std::span<const double> omega_grid, const PeriodogramResult& result) {
  require(omega_grid.size() == result.rss_curve.size(), "periodogram_csv: grid/result mismatch");
  std::ostringstream os;
  os << "omega,rss\n";
  for (std::size_t j = 0; j < omega_grid.size(); ++j) {
    os << detail::format_double(omega_grid[j]) << ',';
    if (std::isfinite(result.rss_curve[j]))
      os << detail::format_double(result.rss_curve[j]);
    else
      os << "inf";
    os << '\n';
  }
  return os.str();
}

std::string period_study_csv(const PeriodStudyResult& result) {
  const auto& cfg = result.config;
  std::ostringstream os;
  os << "n";
  for (int K : cfg.K_values)
    for (auto w : cfg.weightings) os << ",K" << K << '_' << weighting_name(w);
  os << '\n';
  if (result.catalog_size == 0) return os.str();
  for (int n : cfg.n_values) {
    os << n;
    for (int K : cfg.K_values)
      for (auto w : cfg.weightings)
        os << ',' << detail::format_fixed(result.cell(n, K, w).score.fraction, 4);
    os << '\n';
  }
  return os.str();
}

}  // namespace hetwls
