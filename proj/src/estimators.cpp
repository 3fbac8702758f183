#include "hetwls/estimators.hpp"

#include "hetwls/chi2.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hetwls {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::InvalidGamma: return "InvalidGamma";
    case ErrorCode::InvalidMoments: return "InvalidMoments";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::DegenerateGroupVariance: return "DegenerateGroupVariance";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::AllFrequenciesSingular: return "AllFrequenciesSingular";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
  }
  return "Unknown";
}

namespace {

constexpr double kRcondTolerance = 1e-12;
constexpr double kGroupVarianceTolerance = 1e-12;

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

void check_weights(const Vector& w, Eigen::Index n, const char* where) {
  require(w.size() == n, ErrorCode::InvalidArgument,
          std::string(where) + ": weight vector length " + std::to_string(w.size()) +
              " does not match n = " + std::to_string(n));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    require(std::isfinite(w[i]) && w[i] > 0.0, ErrorCode::InvalidArgument,
            std::string(where) + ": weights must be finite and strictly positive");
}

void check_beta(const Vector& beta, Eigen::Index p, const char* where) {
  require(beta.size() == p, ErrorCode::InvalidArgument,
          std::string(where) + ": beta has length " + std::to_string(beta.size()) +
              ", expected " + std::to_string(p));
}

void check_square(const Matrix& m, Eigen::Index p, const char* what) {
  require(m.rows() == p && m.cols() == p, ErrorCode::InvalidArgument,
          std::string(what) + " must be " + std::to_string(p) + "x" + std::to_string(p));
}

// Shared body of nu_hat_1 and nu_oracle.
Matrix plug_in_nu(const RegressionData& data, const Matrix& A, const Matrix& B,
                  const Vector& w) {
  const auto n = data.n();
  check_weights(w, n, "nu_hat_1");
  check_square(A, data.p(), "A");
  check_square(B, data.p(), "B");
  const Vector& s = data.sigma();
  const double sum_w = w.sum();
  const double sum_w2 = w.squaredNorm();
  const double sum_w_sigma_w = (w.array().square() * s.array().square()).sum();
  const double nn = static_cast<double>(n);
  return symmetrize((nn * sum_w2 * A + nn * sum_w_sigma_w * B) / (sum_w * sum_w));
}

}  // namespace

// ---------------------------------------------------------------------------
// RegressionData

RegressionData::RegressionData(Matrix X, Vector y, std::optional<Vector> sigma,
                               std::optional<std::vector<int>> groups, int group_count)
    : X_(std::move(X)), y_(std::move(y)), sigma_(std::move(sigma)), groups_(std::move(groups)) {
  const auto n = X_.rows();
  const auto p = X_.cols();
  require(p >= 1, ErrorCode::InvalidArgument, "RegressionData: need at least one column");
  require(n >= p, ErrorCode::InvalidArgument,
          "RegressionData: n = " + std::to_string(n) + " is smaller than p = " +
              std::to_string(p));
  require(y_.size() == n, ErrorCode::InvalidArgument, "RegressionData: y length mismatch");
  require(X_.allFinite() && y_.allFinite(), ErrorCode::InvalidArgument,
          "RegressionData: X and y must be finite");
  if (sigma_) {
    require(sigma_->size() == n, ErrorCode::InvalidArgument,
            "RegressionData: sigma length mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
      require(std::isfinite((*sigma_)[i]) && (*sigma_)[i] > 0.0, ErrorCode::InvalidArgument,
              "RegressionData: sigma[" + std::to_string(i) + "] must be positive");
  }
  if (groups_) {
    require(static_cast<Eigen::Index>(groups_->size()) == n, ErrorCode::InvalidArgument,
            "RegressionData: group length mismatch");
    int max_label = 0;
    for (int g : *groups_) {
      require(g >= 1, ErrorCode::InvalidArgument, "RegressionData: group labels start at 1");
      max_label = std::max(max_label, g);
    }
    group_count_ = group_count > 0 ? group_count : max_label;
    require(max_label <= group_count_, ErrorCode::InvalidArgument,
            "RegressionData: group label exceeds group count");
    std::vector<int> counts(static_cast<std::size_t>(group_count_), 0);
    for (int g : *groups_) ++counts[static_cast<std::size_t>(g - 1)];
    for (int m = 0; m < group_count_; ++m)
      require(counts[static_cast<std::size_t>(m)] > 0, ErrorCode::EmptyGroup,
              "group " + std::to_string(m + 1) + " has no observations");
  }
}

const Vector& RegressionData::sigma() const {
  if (!sigma_) throw Error(ErrorCode::MissingColumn, "data has no 'sigma' column");
  return *sigma_;
}

const std::vector<int>& RegressionData::groups() const {
  if (!groups_) throw Error(ErrorCode::MissingColumn, "data has no 'group' column");
  return *groups_;
}

// ---------------------------------------------------------------------------

std::string strategy_name(const WeightStrategy& s) {
  struct Visitor {
    std::string operator()(const strategy::Identity&) const { return "ols"; }
    std::string operator()(const strategy::InverseVariance&) const { return "wls"; }
    std::string operator()(const strategy::AdaptiveKnown&) const { return "adaptive_known"; }
    std::string operator()(const strategy::AdaptiveGrouped&) const { return "adaptive_grouped"; }
    std::string operator()(const strategy::FixedWeights&) const { return "fixed_weights"; }
    std::string operator()(const strategy::FixedDelta&) const { return "fixed_delta"; }
  };
  return std::visit(Visitor{}, s);
}

double GammaFunctional::operator()(const Matrix& c) const {
  require(c.rows() == c.cols(), ErrorCode::InvalidArgument, "Gamma: matrix must be square");
  if (kind_ == Kind::Trace) return c.trace();
  require(index_ >= 0 && index_ < c.rows(), ErrorCode::InvalidGamma,
          "Gamma: coordinate " + std::to_string(index_ + 1) + " out of range for p = " +
              std::to_string(c.rows()));
  return c(index_, index_);
}

std::string GammaFunctional::name() const {
  if (kind_ == Kind::Trace) return "trace";
  return "coordinate(" + std::to_string(index_ + 1) + ")";
}

// ---------------------------------------------------------------------------

WeightedSolver::WeightedSolver(Eigen::Index n, Eigen::Index p)
    : Xs_(n, p), ys_(n), sw_(n), beta_(p), resid_(n), qr_(n, p) {}

const Vector& WeightedSolver::solve(const Matrix& X, const Vector& y, const Vector& w) {
  const auto n = X.rows();
  const auto p = X.cols();
  require(y.size() == n, ErrorCode::InvalidArgument, "solve_weighted: y length mismatch");
  check_weights(w, n, "solve_weighted");
  if (n < p) throw Error(ErrorCode::SingularDesign, "solve_weighted: fewer rows than columns");

  sw_ = w.cwiseSqrt();
  Xs_.noalias() = sw_.asDiagonal() * X;
  ys_ = sw_.cwiseProduct(y);

  qr_.compute(Xs_);
  const auto diag = qr_.matrixQR().diagonal().cwiseAbs();
  const double rmax = diag.size() ? diag.maxCoeff() : 0.0;
  const double rmin = diag.size() ? diag.minCoeff() : 0.0;
  if (!(rmax > 0.0) || rmin / rmax < kRcondTolerance)
    throw Error(ErrorCode::SingularDesign, "weighted design is rank deficient");
  beta_ = qr_.solve(ys_);
  resid_ = ys_;
  resid_.noalias() -= Xs_ * beta_;
  rss_ = resid_.squaredNorm();
  return beta_;
}

Vector solve_weighted(const Matrix& X, const Vector& y, const Vector& w) {
  WeightedSolver solver(X.rows(), X.cols());
  return solver.solve(X, y, w);
}

Vector solve_weighted(const RegressionData& data, const Vector& w) {
  return solve_weighted(data.X(), data.y(), w);
}

Matrix estimate_B(const Matrix& X) {
  const double n = static_cast<double>(X.rows());
  const Matrix gram = symmetrize(X.transpose() * X / n);
  Eigen::LDLT<Matrix> ldlt(gram);
  const auto d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || d.minCoeff() <= 0.0 ||
      d.minCoeff() / d.maxCoeff() < kRcondTolerance)
    throw Error(ErrorCode::SingularDesign, "estimate_B: X^T X is singular");
  return symmetrize(ldlt.solve(Matrix::Identity(X.cols(), X.cols())));
}

Matrix estimate_B(const RegressionData& data) { return estimate_B(data.X()); }

Vector estimate_g_squared(const RegressionData& data, const Vector& beta) {
  check_beta(beta, data.p(), "estimate_g_squared");
  const Vector r = data.y() - data.X() * beta;
  return r.array().square() - data.sigma().array().square();
}

Matrix estimate_A(const RegressionData& data, const Vector& beta, const Matrix& B_hat) {
  check_square(B_hat, data.p(), "B_hat");
  const Vector g2 = estimate_g_squared(data, beta);
  const Vector inv_s4 = data.sigma().array().pow(-4.0);
  const Vector coef = g2.cwiseProduct(inv_s4) / inv_s4.sum();
  const Matrix middle = data.X().transpose() * coef.asDiagonal() * data.X();
  return symmetrize(B_hat.transpose() * middle * B_hat);
}

double estimate_delta(const Matrix& A_hat, const Matrix& B_hat, const GammaFunctional& gamma) {
  const double gb = gamma(B_hat);
  if (!(gb > 0.0))
    throw Error(ErrorCode::InvalidGamma, "estimate_delta: Gamma(B_hat) is not positive");
  return std::max(gamma(A_hat) / gb, 0.0);
}

Vector optimal_weights_known(const RegressionData& data, double delta) {
  require(std::isfinite(delta) && delta >= 0.0, ErrorCode::InvalidArgument,
          "optimal_weights_known: delta must be finite and nonnegative");
  return (data.sigma().array().square() + delta).inverse();
}

std::vector<Matrix> estimate_Cm(const RegressionData& data, const Vector& beta) {
  check_beta(beta, data.p(), "estimate_Cm");
  const auto& groups = data.groups();
  const int M = data.group_count();
  const auto p = data.p();
  std::vector<Matrix> C(static_cast<std::size_t>(M), Matrix::Zero(p, p));
  std::vector<int> counts(static_cast<std::size_t>(M), 0);
  const Vector r = data.y() - data.X() * beta;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto m = static_cast<std::size_t>(groups[static_cast<std::size_t>(i)] - 1);
    const auto x = data.X().row(i).transpose();
    C[m].noalias() += (r[i] * r[i]) * (x * x.transpose());
    ++counts[m];
  }
  for (std::size_t m = 0; m < C.size(); ++m) {
    if (counts[m] == 0)
      throw Error(ErrorCode::EmptyGroup, "group " + std::to_string(m + 1) + " has no observations");
    C[m] = symmetrize(C[m] / counts[m]);
  }
  return C;
}

Vector optimal_weights_grouped(std::span<const Matrix> C_hat, const Matrix& B_hat,
                               std::span<const int> groups, const GammaFunctional& gamma) {
  const double gb = gamma(B_hat);
  if (!(gb > 0.0))
    throw Error(ErrorCode::InvalidGamma, "optimal_weights_grouped: Gamma(B_hat) is not positive");
  std::vector<double> per_group(C_hat.size());
  for (std::size_t m = 0; m < C_hat.size(); ++m) {
    check_square(C_hat[m], B_hat.rows(), "C_hat");
    const double denom = gamma(symmetrize(B_hat.transpose() * C_hat[m] * B_hat));
    if (!(denom > kGroupVarianceTolerance))
      throw Error(ErrorCode::DegenerateGroupVariance,
                  "group " + std::to_string(m + 1) + " has degenerate residual variance");
    per_group[m] = gb / denom;
  }
  Vector w(static_cast<Eigen::Index>(groups.size()));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const int g = groups[i];
    require(g >= 1 && static_cast<std::size_t>(g) <= C_hat.size(), ErrorCode::InvalidArgument,
            "optimal_weights_grouped: group label out of range");
    w[static_cast<Eigen::Index>(i)] = per_group[static_cast<std::size_t>(g - 1)];
  }
  return w;
}

MisspecEstimates estimate_misspecification(const RegressionData& data, const Vector& beta,
                                           const GammaFunctional& gamma) {
  MisspecEstimates out;
  out.B_hat = estimate_B(data);
  if (data.has_sigma()) {
    out.A_hat = estimate_A(data, beta, out.B_hat);
    out.delta_hat = estimate_delta(out.A_hat, out.B_hat, gamma);
  }
  if (data.has_groups()) out.C_hat = estimate_Cm(data, beta);
  return out;
}

// ---------------------------------------------------------------------------

FitResult fit(const RegressionData& data, const WeightStrategy& strat,
              const GammaFunctional& gamma, VarianceEstimator variance) {
  FitResult res;
  res.strategy = strat;
  res.gamma = gamma;
  const auto n = data.n();
  if (gamma.kind() == GammaFunctional::Kind::Coordinate)
    require(gamma.index() >= 0 && gamma.index() < data.p(), ErrorCode::InvalidGamma,
            "gamma: coordinate " + std::to_string(gamma.index() + 1) + " out of range for p = " +
                std::to_string(data.p()));

  // B_hat depends only on X; it is shared by every adaptive round and by the
  // variance estimators.
  std::optional<Matrix> B_hat;
  auto get_B = [&]() -> const Matrix& {
    if (!B_hat) B_hat = estimate_B(data);
    return *B_hat;
  };

  struct Visitor {
    const RegressionData& data;
    const GammaFunctional& gamma;
    FitResult& res;
    decltype(get_B)& B;
    Eigen::Index n;

    void operator()(const strategy::Identity&) {
      res.weights = Vector::Ones(n);
      res.beta = solve_weighted(data, res.weights);
    }
    void operator()(const strategy::InverseVariance&) {
      res.weights = data.sigma().array().square().inverse();
      res.beta = solve_weighted(data, res.weights);
    }
    void operator()(const strategy::AdaptiveKnown& s) {
      require(s.iterations >= 1, ErrorCode::InvalidArgument,
              "AdaptiveKnown: iterations must be positive");
      (void)data.sigma();
      res.beta = solve_weighted(data, Vector::Ones(n));
      for (int k = 0; k < s.iterations; ++k) {
        const Matrix A_hat = estimate_A(data, res.beta, B());
        const double delta = estimate_delta(A_hat, B(), gamma);
        res.delta = delta;
        res.A_hat = A_hat;
        res.weights = optimal_weights_known(data, delta);
        res.beta = solve_weighted(data, res.weights);
      }
    }
    void operator()(const strategy::AdaptiveGrouped& s) {
      require(s.iterations >= 1, ErrorCode::InvalidArgument,
              "AdaptiveGrouped: iterations must be positive");
      (void)data.groups();
      res.beta = solve_weighted(data, Vector::Ones(n));
      for (int k = 0; k < s.iterations; ++k) {
        const auto C_hat = estimate_Cm(data, res.beta);
        res.weights = optimal_weights_grouped(C_hat, B(), data.groups(), gamma);
        res.beta = solve_weighted(data, res.weights);
      }
    }
    void operator()(const strategy::FixedWeights& s) {
      res.weights = s.w;
      res.beta = solve_weighted(data, res.weights);
    }
    void operator()(const strategy::FixedDelta& s) {
      res.delta = s.delta;
      res.weights = optimal_weights_known(data, s.delta);
      res.beta = solve_weighted(data, res.weights);
    }
  };
  std::visit(Visitor{data, gamma, res, get_B, n}, strat);

  switch (variance) {
    case VarianceEstimator::None:
      break;
    case VarianceEstimator::PlugIn: {
      const Matrix A_hat = res.A_hat ? *res.A_hat : plug_in_A(data, gamma);
      res.nu_hat = nu_hat_1(data, A_hat, get_B(), res.weights);
      break;
    }
    case VarianceEstimator::Sandwich:
      res.nu_hat = nu_hat_2(data, get_B(), res.weights, res.beta);
      break;
  }
  return res;
}

Matrix plug_in_A(const RegressionData& data, const GammaFunctional& gamma, int iterations) {
  return *fit(data, strategy::AdaptiveKnown{iterations}, gamma, VarianceEstimator::None).A_hat;
}

// ---------------------------------------------------------------------------

Matrix nu_hat_1(const RegressionData& data, const Matrix& A_hat, const Matrix& B_hat,
                const Vector& weights) {
  return plug_in_nu(data, A_hat, B_hat, weights);
}

Matrix nu_oracle(const RegressionData& data, const Matrix& A, const Matrix& B,
                 const Vector& weights) {
  return plug_in_nu(data, A, B, weights);
}

Matrix nu_hat_2(const RegressionData& data, const Matrix& B_hat, const Vector& weights,
                const Vector& beta) {
  const auto n = data.n();
  check_weights(weights, n, "nu_hat_2");
  check_beta(beta, data.p(), "nu_hat_2");
  check_square(B_hat, data.p(), "B_hat");
  const Vector r = data.y() - data.X() * beta;
  const Vector coef = r.cwiseProduct(weights).array().square();
  const Matrix middle = data.X().transpose() * coef.asDiagonal() * data.X();
  const double sum_w = weights.sum();
  return symmetrize(static_cast<double>(n) * B_hat * middle * B_hat / (sum_w * sum_w));
}

WeightMoments weight_moments(std::span<const double> sigma_values, std::span<const double> probs,
                             const std::function<double(double)>& w) {
  require(sigma_values.size() == probs.size(), ErrorCode::InvalidArgument,
          "weight_moments: values and probabilities differ in length");
  WeightMoments m;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double s = sigma_values[k];
    const double wk = w(s);
    m.mean_w += probs[k] * wk;
    m.mean_w2 += probs[k] * wk * wk;
    m.mean_sigma2_w2 += probs[k] * s * s * wk * wk;
  }
  return m;
}

Matrix theoretical_nu(const Matrix& A, const Matrix& B, const WeightMoments& m) {
  if (!(m.mean_w > 0.0)) throw Error(ErrorCode::InvalidMoments, "theoretical_nu: E[w] <= 0");
  require(A.rows() == B.rows() && A.cols() == B.cols(), ErrorCode::InvalidArgument,
          "theoretical_nu: A and B differ in shape");
  return symmetrize((m.mean_w2 * A + m.mean_sigma2_w2 * B) / (m.mean_w * m.mean_w));
}

double region_statistic(const Vector& beta_hat, const Matrix& nu_hat, const Vector& beta0,
                        double n) {
  require(beta_hat.size() == beta0.size() && nu_hat.rows() == beta_hat.size() &&
              nu_hat.cols() == beta_hat.size(),
          ErrorCode::InvalidArgument, "region_statistic: shape mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(nu_hat));
  const Vector& lam = eig.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !lam.allFinite() || lam.cwiseAbs().minCoeff() <= kRcondTolerance * scale)
    throw Error(ErrorCode::SingularCovariance, "covariance matrix is singular");
  const Vector z = eig.eigenvectors().transpose() * (beta_hat - beta0);
  return n * (z.array().square() / lam.array()).sum();
}

bool confidence_region_contains(const Vector& beta_hat, const Matrix& nu_hat,
                                const Vector& beta0, double n, double level) {
  const double stat = region_statistic(beta_hat, nu_hat, beta0, n);
  return stat <= chi2_quantile(level, static_cast<int>(beta_hat.size()));
}

}  // namespace hetwls
