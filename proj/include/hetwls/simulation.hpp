#pragma once

// Monte Carlo engine for misspecified linear regression with heteroskedastic
// errors: data-generating processes on x ~ Unif(0, 1) with an intercept-plus-
// slope design, quadrature oracles for the target quantities, and a replicate
// runner that records estimates and confidence-region coverage.

#include "hetwls/estimators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hetwls {

namespace dgp {
// f(x) = x^2
struct Quadratic {};
// f(x) = intercept + slope * x
struct Linear {
  double intercept = 0.0;
  double slope = 1.0;
};
// Piecewise-linear interpolation through (x, f) nodes covering [0, 1].
struct CustomTable {
  std::vector<double> x;
  std::vector<double> f;
};

// sigma drawn independently of x from a finite law.
struct DiscreteSigma {
  std::vector<double> values;
  std::vector<double> probs;
};
// sigma as a step function of x. With thresholds t_1 < ... < t_k and values
// v_0..v_k: x < t_1 gives v_0, t_j <= x < t_{j+1} gives v_j, and the last
// threshold is exclusive on the left, so t_{k-1} <= x <= t_k gives v_{k-1}
// and x > t_k gives v_k.
struct StepSigma {
  std::vector<double> thresholds;
  std::vector<double> values;
};
}  // namespace dgp

using RegressionFn = std::variant<dgp::Quadratic, dgp::Linear, dgp::CustomTable>;
using SigmaLaw = std::variant<dgp::DiscreteSigma, dgp::StepSigma>;

struct DgpConfig {
  RegressionFn regression_fn = dgp::Quadratic{};
  SigmaLaw sigma_law = dgp::DiscreteSigma{{0.01, 0.1, 1.0}, {0.05, 0.9, 0.05}};
  int n = 100;
  int replicates = 1000;
  std::uint64_t seed = 1;

  // Throws InvalidArgument on any violated invariant.
  void validate() const;
};

double evaluate(const RegressionFn& f, double x);
double sigma_at(const dgp::StepSigma& law, double x);
bool sigma_independent_of_x(const DgpConfig& config) noexcept;

// Design rows (1, x_i); labels number the distinct sigma levels present in the
// sample (compactly, in increasing sigma order). Deterministic in
// (config.seed, replicate_index).
RegressionData generate_dataset(const DgpConfig& config, std::uint64_t replicate_index);

struct OracleQuantities {
  Vector beta_true;
  Matrix A_true;
  Matrix B_true;
  double delta_true = 0.0;
  double mean_g2 = 0.0;  // E[g(x)^2]
  // a.s. limit of standard WLS, E[x x^T w]^{-1} E[w x f(x)] with w = sigma^-2.
  Vector wls_limit;
  // OLS sandwich B E[(g^2 + sigma^2) x x^T] B, valid with or without x/sigma
  // independence.
  Matrix ols_nu;
};

// Throws QuadratureFailure if any integral misses the 1e-10 tolerance.
OracleQuantities oracle_quantities(const DgpConfig& config,
                                   const GammaFunctional& gamma = GammaFunctional::trace());

// Asymptotic covariance nu(w) for the weighting a strategy converges to, when
// the theory covers it (independent discrete sigma law; the OLS sandwich for
// any law). Adaptive strategies map to w_min with the oracle delta.
std::optional<Matrix> theoretical_nu_for(const DgpConfig& config, const OracleQuantities& oracle,
                                         const WeightStrategy& strategy);

enum class CoverageEstimator { PlugIn, Sandwich, Oracle };

std::string coverage_estimator_name(CoverageEstimator e);

struct SimOptions {
  std::vector<WeightStrategy> strategies;
  std::vector<CoverageEstimator> estimators = {CoverageEstimator::PlugIn,
                                               CoverageEstimator::Sandwich,
                                               CoverageEstimator::Oracle};
  GammaFunctional gamma = GammaFunctional::trace();
  double level = 0.95;
  unsigned threads = 1;  // 0 = hardware concurrency
};

// Coverage outcome of one replicate: 1 covered, 0 not covered, -1 when the
// estimator does not apply to the strategy.
using CoverageFlags = std::vector<int>;

struct StrategyReport {
  std::string name;
  WeightStrategy strategy;
  std::vector<std::uint64_t> replicate_ids;  // successful replicates only
  std::vector<Vector> betas;
  std::vector<CoverageFlags> covered;  // parallel to betas, one flag per estimator
  Vector mean;
  Matrix covariance;  // sample covariance of beta_hat (N - 1 denominator)
  std::vector<std::optional<double>> coverage;  // per estimator
  std::size_t failures = 0;
  double fit_seconds = 0.0;
};

struct SimReport {
  DgpConfig config;
  OracleQuantities oracle;
  std::vector<CoverageEstimator> estimators;
  double level = 0.95;
  std::vector<StrategyReport> strategies;
};

// Replicates whose fit fails with SingularDesign, EmptyGroup,
// DegenerateGroupVariance or InvalidGamma are excluded and counted. The result
// does not depend on the thread count.
SimReport run_monte_carlo(const DgpConfig& config, const SimOptions& options);

struct Ellipse {
  Vector semi_axes;  // descending
  Matrix axes;       // columns are unit directions matching semi_axes
};

// Axes of {b : n b^T nu^{-1} b <= chi2_p(level)}. Throws SingularCovariance if
// nu is not positive definite.
Ellipse asymptotic_ellipse(const Matrix& nu, double level, double n);

// CSV renderings. Estimates are printed with 17 significant digits and
// coverage fractions with 6 decimals; identical reports give identical bytes.
std::string replicates_csv(const SimReport& report);
std::string summary_csv(const SimReport& report);
std::string ellipse_csv(const SimReport& report);

}  // namespace hetwls
