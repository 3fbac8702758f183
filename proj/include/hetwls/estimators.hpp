#pragma once

// Weighted least squares for misspecified linear models with heteroskedastic
// errors: the generic solve, plug-in estimates of the misspecification
// matrices A and B, adaptive weightings, and asymptotic-variance estimators.
//
// Conventions: X is n x p with rows x_i^T, y has length n, sigma holds the
// per-observation error standard deviations. Weights are the diagonal of a
// positive definite diagonal weight matrix. Every p x p matrix returned here
// is symmetrized as (C + C^T) / 2.

#include "hetwls/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hetwls {

class RegressionData {
 public:
  // Group labels, when given, take values in 1..group_count. If group_count
  // is zero it is taken as the largest label. Every group must be nonempty.
  RegressionData(Matrix X, Vector y, std::optional<Vector> sigma = std::nullopt,
                 std::optional<std::vector<int>> groups = std::nullopt,
                 int group_count = 0);

  const Matrix& X() const noexcept { return X_; }
  const Vector& y() const noexcept { return y_; }
  Eigen::Index n() const noexcept { return X_.rows(); }
  Eigen::Index p() const noexcept { return X_.cols(); }

  bool has_sigma() const noexcept { return sigma_.has_value(); }
  // Throws MissingColumn("sigma") when the data carries no error SDs.
  const Vector& sigma() const;

  bool has_groups() const noexcept { return groups_.has_value(); }
  // Throws MissingColumn("group") when the data carries no group labels.
  const std::vector<int>& groups() const;
  int group_count() const noexcept { return group_count_; }

 private:
  Matrix X_;
  Vector y_;
  std::optional<Vector> sigma_;
  std::optional<std::vector<int>> groups_;
  int group_count_ = 0;
};

namespace strategy {
struct Identity {};
struct InverseVariance {};
struct AdaptiveKnown {
  int iterations = 2;
};
struct AdaptiveGrouped {
  int iterations = 2;
};
struct FixedWeights {
  Vector w;
};
struct FixedDelta {
  double delta = 0.0;
};
}  // namespace strategy

using WeightStrategy =
    std::variant<strategy::Identity, strategy::InverseVariance, strategy::AdaptiveKnown,
                 strategy::AdaptiveGrouped, strategy::FixedWeights, strategy::FixedDelta>;

// Short stable name: ols, wls, adaptive_known, adaptive_grouped, fixed_weights,
// fixed_delta.
std::string strategy_name(const WeightStrategy& s);

// Linear functional on p x p matrices that is positive on positive definite
// matrices: the trace or a single diagonal entry.
class GammaFunctional {
 public:
  enum class Kind { Trace, Coordinate };

  static GammaFunctional trace() noexcept { return GammaFunctional(Kind::Trace, 0); }
  // Zero-based diagonal index.
  static GammaFunctional coordinate(Eigen::Index j) noexcept {
    return GammaFunctional(Kind::Coordinate, j);
  }

  Kind kind() const noexcept { return kind_; }
  Eigen::Index index() const noexcept { return index_; }

  double operator()(const Matrix& c) const;

  std::string name() const;

 private:
  GammaFunctional(Kind k, Eigen::Index j) noexcept : kind_(k), index_(j) {}

  Kind kind_;
  Eigen::Index index_;
};

struct MisspecEstimates {
  Matrix B_hat;
  Matrix A_hat;  // empty when sigma is unknown
  double delta_hat = 0.0;
  std::optional<std::vector<Matrix>> C_hat;
};

enum class VarianceEstimator { None, PlugIn, Sandwich };

struct FitResult {
  Vector beta;
  Vector weights;
  std::optional<double> delta;
  std::optional<Matrix> nu_hat;
  // Misspecification estimate behind the final delta (AdaptiveKnown only).
  std::optional<Matrix> A_hat;
  WeightStrategy strategy;
  GammaFunctional gamma = GammaFunctional::trace();
};

// Minimizer of sum_i w_i (y_i - x_i^T beta)^2, via a column-pivoted QR of the
// sqrt(w)-scaled system. Throws SingularDesign when the estimated reciprocal
// condition number of the scaled design falls below 1e-12.
Vector solve_weighted(const Matrix& X, const Vector& y, const Vector& w);

// solve_weighted with buffers kept between calls, for repeated solves of the
// same shape (frequency scans). Not thread-safe; use one per thread.
class WeightedSolver {
 public:
  WeightedSolver() = default;
  WeightedSolver(Eigen::Index n, Eigen::Index p);

  // Returns the coefficients; weighted_rss() then holds
  // sum_i w_i (y_i - x_i^T beta)^2.
  const Vector& solve(const Matrix& X, const Vector& y, const Vector& w);
  double weighted_rss() const noexcept { return rss_; }

 private:
  Matrix Xs_;
  Vector ys_;
  Vector sw_;
  Vector beta_;
  Vector resid_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
  double rss_ = 0.0;
};
Vector solve_weighted(const RegressionData& data, const Vector& w);

// (X^T X / n)^{-1}
Matrix estimate_B(const Matrix& X);
Matrix estimate_B(const RegressionData& data);

// (y_i - x_i^T beta)^2 - sigma_i^2, unclamped.
Vector estimate_g_squared(const RegressionData& data, const Vector& beta);

// B^T (sum sigma^-4)^{-1} (sum x x^T g^2 sigma^-4) B. May be indefinite.
Matrix estimate_A(const RegressionData& data, const Vector& beta, const Matrix& B_hat);

// max(Gamma(A) / Gamma(B), 0). Throws InvalidGamma if Gamma(B) <= 0.
double estimate_delta(const Matrix& A_hat, const Matrix& B_hat, const GammaFunctional& gamma);

// w_i = 1 / (sigma_i^2 + delta)
Vector optimal_weights_known(const RegressionData& data, double delta);

// Per-group mean of r_i^2 x_i x_i^T, indexed by label - 1.
std::vector<Matrix> estimate_Cm(const RegressionData& data, const Vector& beta);

// w_i = Gamma(B) / Gamma(B^T C_{m_i} B). Throws DegenerateGroupVariance when a
// denominator is at or below 1e-12.
Vector optimal_weights_grouped(std::span<const Matrix> C_hat, const Matrix& B_hat,
                               std::span<const int> groups, const GammaFunctional& gamma);

// B_hat, and A_hat/delta_hat when sigma is known, C_hat when groups are known.
MisspecEstimates estimate_misspecification(const RegressionData& data, const Vector& beta,
                                           const GammaFunctional& gamma);

// Identity and InverseVariance solve directly. AdaptiveKnown(k) starts from
// OLS and runs k rounds of {A_hat, delta_hat, reweight, resolve};
// AdaptiveGrouped(k) runs k rounds of {C_hat, reweight, resolve}.
//
// With VarianceEstimator::PlugIn the A used in nu_hat_1 is the estimate from
// the known-variance adaptive procedure (plug_in_A), whatever the strategy.
FitResult fit(const RegressionData& data, const WeightStrategy& strategy,
              const GammaFunctional& gamma = GammaFunctional::trace(),
              VarianceEstimator variance = VarianceEstimator::Sandwich);

// A_hat from the final round of AdaptiveKnown(iterations): estimated at the
// residuals of the previous round's fit, the same matrix that set delta_hat.
Matrix plug_in_A(const RegressionData& data, const GammaFunctional& gamma = GammaFunctional::trace(),
                 int iterations = 2);

// [n (1^T W^2 1) A + n (1^T W Sigma W 1) B] / (1^T W 1)^2
Matrix nu_hat_1(const RegressionData& data, const Matrix& A_hat, const Matrix& B_hat,
                const Vector& weights);

// n B (sum r_i^2 W_ii^2 x_i x_i^T) B / (1^T W 1)^2
Matrix nu_hat_2(const RegressionData& data, const Matrix& B_hat, const Vector& weights,
                const Vector& beta);

// nu_hat_1 evaluated at the true A and B.
Matrix nu_oracle(const RegressionData& data, const Matrix& A, const Matrix& B,
                 const Vector& weights);

struct WeightMoments {
  double mean_w = 0.0;         // E[w]
  double mean_w2 = 0.0;        // E[w^2]
  double mean_sigma2_w2 = 0.0; // E[sigma^2 w^2]
};

// Moments of w(sigma) under a discrete sigma law.
WeightMoments weight_moments(std::span<const double> sigma_values, std::span<const double> probs,
                             const std::function<double(double)>& w);

// (E[w^2] A + E[sigma^2 w^2] B) / E[w]^2. Throws InvalidMoments if E[w] <= 0.
Matrix theoretical_nu(const Matrix& A, const Matrix& B, const WeightMoments& m);

// n (beta_hat - beta0)^T nu^{-1} (beta_hat - beta0). Throws SingularCovariance
// if nu is numerically singular.
double region_statistic(const Vector& beta_hat, const Matrix& nu_hat, const Vector& beta0,
                        double n);

bool confidence_region_contains(const Vector& beta_hat, const Matrix& nu_hat,
                                const Vector& beta0, double n, double level = 0.95);

}  // namespace hetwls
