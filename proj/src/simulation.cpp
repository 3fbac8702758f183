#include "hetwls/simulation.hpp"

#include "format.hpp"
#include "parallel.hpp"

#include "hetwls/chi2.hpp"
#include "hetwls/quadrature.hpp"
#include "hetwls/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hetwls {

namespace {

constexpr std::uint16_t kDatasetStream = 1;

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, msg);
}

std::vector<double> breakpoints(const DgpConfig& config) {
  std::vector<double> out;
  if (const auto* table = std::get_if<dgp::CustomTable>(&config.regression_fn))
    out.insert(out.end(), table->x.begin(), table->x.end());
  if (const auto* step = std::get_if<dgp::StepSigma>(&config.sigma_law))
    out.insert(out.end(), step->thresholds.begin(), step->thresholds.end());
  return out;
}

// Integral over [0, 1] of every entry of h(x) * (1, x)(1, x)^T.
Matrix integrate_design(const std::function<double(double)>& h, std::span<const double> breaks) {
  Matrix m(2, 2);
  m(0, 0) = integrate(h, 0.0, 1.0, breaks);
  m(0, 1) = integrate([&](double x) { return h(x) * x; }, 0.0, 1.0, breaks);
  m(1, 1) = integrate([&](double x) { return h(x) * x * x; }, 0.0, 1.0, breaks);
  m(1, 0) = m(0, 1);
  return m;
}

Vector integrate_moment(const std::function<double(double)>& h, std::span<const double> breaks) {
  Vector v(2);
  v[0] = integrate(h, 0.0, 1.0, breaks);
  v[1] = integrate([&](double x) { return h(x) * x; }, 0.0, 1.0, breaks);
  return v;
}

bool strategy_knows_sigma(const WeightStrategy& s) {
  return !std::holds_alternative<strategy::AdaptiveGrouped>(s);
}

bool is_excludable(ErrorCode code) {
  return code == ErrorCode::SingularDesign || code == ErrorCode::EmptyGroup ||
         code == ErrorCode::DegenerateGroupVariance || code == ErrorCode::InvalidGamma;
}

struct ReplicateOutcome {
  bool ok = false;
  Vector beta;
  CoverageFlags covered;
  double seconds = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------

void DgpConfig::validate() const {
  require(n >= 2, "DgpConfig: n must be at least 2");
  require(replicates >= 1, "DgpConfig: replicates must be positive");
  if (const auto* table = std::get_if<dgp::CustomTable>(&regression_fn)) {
    require(table->x.size() >= 2 && table->x.size() == table->f.size(),
            "DgpConfig: custom table needs matching x and f with at least two nodes");
    for (std::size_t k = 1; k < table->x.size(); ++k)
      require(table->x[k] > table->x[k - 1], "DgpConfig: custom table x must increase");
    require(table->x.front() <= 0.0 && table->x.back() >= 1.0,
            "DgpConfig: custom table must cover [0, 1]");
  }
  if (const auto* d = std::get_if<dgp::DiscreteSigma>(&sigma_law)) {
    require(!d->values.empty() && d->values.size() == d->probs.size(),
            "DgpConfig: discrete sigma law needs matching values and probabilities");
    double total = 0.0;
    for (std::size_t k = 0; k < d->values.size(); ++k) {
      require(d->values[k] > 0.0 && std::isfinite(d->values[k]),
              "DgpConfig: sigma values must be positive");
      require(d->probs[k] >= 0.0, "DgpConfig: probabilities must be nonnegative");
      total += d->probs[k];
    }
    require(std::abs(total - 1.0) <= 1e-12, "DgpConfig: probabilities must sum to 1");
  } else {
    const auto& s = std::get<dgp::StepSigma>(sigma_law);
    require(s.values.size() == s.thresholds.size() + 1,
            "DgpConfig: step sigma law needs one more value than thresholds");
    for (std::size_t k = 1; k < s.thresholds.size(); ++k)
      require(s.thresholds[k] > s.thresholds[k - 1],
              "DgpConfig: step thresholds must be strictly increasing");
    for (double v : s.values)
      require(v > 0.0 && std::isfinite(v), "DgpConfig: sigma values must be positive");
  }
}

double evaluate(const RegressionFn& f, double x) {
  struct Visitor {
    double x;
    double operator()(const dgp::Quadratic&) const { return x * x; }
    double operator()(const dgp::Linear& l) const { return l.intercept + l.slope * x; }
    double operator()(const dgp::CustomTable& t) const {
      if (x <= t.x.front()) return t.f.front();
      if (x >= t.x.back()) return t.f.back();
      const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
      const auto k = static_cast<std::size_t>(it - t.x.begin());
      const double frac = (x - t.x[k - 1]) / (t.x[k] - t.x[k - 1]);
      return t.f[k - 1] + frac * (t.f[k] - t.f[k - 1]);
    }
  };
  return std::visit(Visitor{x}, f);
}

namespace {
std::size_t step_index(const dgp::StepSigma& law, double x) {
  const auto& t = law.thresholds;
  if (t.empty()) return 0;
  std::size_t idx = 0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    if (x >= t[k]) idx = k + 1;
  if (x > t.back()) idx = t.size();
  return idx;
}
}  // namespace

double sigma_at(const dgp::StepSigma& law, double x) { return law.values[step_index(law, x)]; }

bool sigma_independent_of_x(const DgpConfig& config) noexcept {
  return std::holds_alternative<dgp::DiscreteSigma>(config.sigma_law);
}

RegressionData generate_dataset(const DgpConfig& config, std::uint64_t replicate_index) {
  const int n = config.n;
  Philox4x32 rng(config.seed, make_stream(kDatasetStream, replicate_index));
  Matrix X(n, 2);
  Vector y(n);
  Vector sigma(n);
  std::vector<std::size_t> level(static_cast<std::size_t>(n));
  const auto* discrete = std::get_if<dgp::DiscreteSigma>(&config.sigma_law);
  const auto* step = std::get_if<dgp::StepSigma>(&config.sigma_law);

  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    std::size_t k = 0;
    if (discrete) {
      const double u = rng.uniform();
      double cum = 0.0;
      k = discrete->values.size() - 1;
      for (std::size_t j = 0; j < discrete->probs.size(); ++j) {
        cum += discrete->probs[j];
        if (u < cum) {
          k = j;
          break;
        }
      }
      sigma[i] = discrete->values[k];
    } else {
      k = step_index(*step, x);
      sigma[i] = step->values[k];
    }
    level[static_cast<std::size_t>(i)] = k;
    X(i, 0) = 1.0;
    X(i, 1) = x;
    y[i] = evaluate(config.regression_fn, x) + sigma[i] * rng.normal();
  }

  // Compact group labels ordered by sigma level.
  const auto& values = discrete ? discrete->values : step->values;
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<bool> present(values.size(), false);
  for (auto k : level) present[k] = true;
  std::vector<int> label_of(values.size(), 0);
  int next = 0;
  for (auto k : order)
    if (present[k]) label_of[k] = ++next;
  std::vector<int> groups(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = label_of[level[i]];

  return RegressionData(std::move(X), std::move(y), std::move(sigma), std::move(groups), next);
}

// ---------------------------------------------------------------------------

OracleQuantities oracle_quantities(const DgpConfig& config, const GammaFunctional& gamma) {
  config.validate();
  const auto breaks = breakpoints(config);
  const auto f = [&](double x) { return evaluate(config.regression_fn, x); };

  OracleQuantities q;
  const Matrix gram = integrate_design([](double) { return 1.0; }, breaks);
  q.B_true = symmetrize(gram.inverse());
  q.beta_true = q.B_true * integrate_moment(f, breaks);

  const Vector beta = q.beta_true;
  const auto g = [&](double x) { return f(x) - beta[0] - beta[1] * x; };
  const auto g2 = [&](double x) {
    const double v = g(x);
    return v * v;
  };
  q.mean_g2 = integrate(g2, 0.0, 1.0, breaks);
  const Matrix g2_gram = integrate_design(g2, breaks);
  q.A_true = symmetrize(q.B_true * g2_gram * q.B_true);
  q.delta_true = estimate_delta(q.A_true, q.B_true, gamma);

  if (const auto* step = std::get_if<dgp::StepSigma>(&config.sigma_law)) {
    const auto w = [&](double x) {
      const double s = sigma_at(*step, x);
      return 1.0 / (s * s);
    };
    const Matrix w_gram = integrate_design(w, breaks);
    const Vector w_moment = integrate_moment([&](double x) { return w(x) * f(x); }, breaks);
    q.wls_limit = w_gram.ldlt().solve(w_moment);
    const Matrix middle = integrate_design(
        [&](double x) {
          const double s = sigma_at(*step, x);
          return g2(x) + s * s;
        },
        breaks);
    q.ols_nu = symmetrize(q.B_true * middle * q.B_true);
  } else {
    const auto& d = std::get<dgp::DiscreteSigma>(config.sigma_law);
    q.wls_limit = q.beta_true;
    double mean_s2 = 0.0;
    for (std::size_t k = 0; k < d.values.size(); ++k)
      mean_s2 += d.probs[k] * d.values[k] * d.values[k];
    q.ols_nu = symmetrize(q.A_true + mean_s2 * q.B_true);
  }
  return q;
}

std::optional<Matrix> theoretical_nu_for(const DgpConfig& config, const OracleQuantities& oracle,
                                         const WeightStrategy& strat) {
  if (std::holds_alternative<strategy::Identity>(strat)) return oracle.ols_nu;
  const auto* d = std::get_if<dgp::DiscreteSigma>(&config.sigma_law);
  if (!d) return std::nullopt;

  std::function<double(double)> w;
  if (std::holds_alternative<strategy::InverseVariance>(strat)) {
    w = [](double s) { return 1.0 / (s * s); };
  } else if (std::holds_alternative<strategy::AdaptiveKnown>(strat) ||
             std::holds_alternative<strategy::AdaptiveGrouped>(strat)) {
    const double delta = oracle.delta_true;
    w = [delta](double s) { return 1.0 / (s * s + delta); };
  } else if (const auto* fd = std::get_if<strategy::FixedDelta>(&strat)) {
    const double delta = fd->delta;
    w = [delta](double s) { return 1.0 / (s * s + delta); };
  } else {
    return std::nullopt;
  }
  return theoretical_nu(oracle.A_true, oracle.B_true, weight_moments(d->values, d->probs, w));
}

std::string coverage_estimator_name(CoverageEstimator e) {
  switch (e) {
    case CoverageEstimator::PlugIn: return "nu1";
    case CoverageEstimator::Sandwich: return "nu2";
    case CoverageEstimator::Oracle: return "nu_or";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

SimReport run_monte_carlo(const DgpConfig& config, const SimOptions& options) {
  config.validate();
  require(!options.strategies.empty(), "run_monte_carlo: no strategies requested");
  for (const auto& s : options.strategies)
    if (std::holds_alternative<strategy::AdaptiveGrouped>(s))
      require(sigma_independent_of_x(config),
              "run_monte_carlo: adaptive_grouped needs a discrete sigma law");

  SimReport report;
  report.config = config;
  report.oracle = oracle_quantities(config, options.gamma);
  report.estimators = options.estimators;
  report.level = options.level;

  const auto R = static_cast<std::size_t>(config.replicates);
  const std::size_t S = options.strategies.size();
  const double chi2 = chi2_quantile(options.level, 2);
  const auto& oracle = report.oracle;

  std::vector<ReplicateOutcome> outcomes(R * S);

  detail::parallel_for(R, options.threads, [&](std::size_t r) {
    const RegressionData data = generate_dataset(config, r);
    const Matrix B_hat = estimate_B(data);
    const double n = static_cast<double>(data.n());
    std::optional<Matrix> A_hat;
    for (std::size_t s = 0; s < S; ++s) {
      auto& out = outcomes[r * S + s];
      const auto& strat = options.strategies[s];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const FitResult res = fit(data, strat, options.gamma, VarianceEstimator::None);
        out.beta = res.beta;
        out.covered.reserve(options.estimators.size());
        for (const auto e : options.estimators) {
          std::optional<Matrix> nu;
          switch (e) {
            case CoverageEstimator::PlugIn:
              if (strategy_knows_sigma(strat)) {
                if (!A_hat) A_hat = res.A_hat ? *res.A_hat : plug_in_A(data, options.gamma);
                nu = nu_hat_1(data, *A_hat, B_hat, res.weights);
              }
              break;
            case CoverageEstimator::Sandwich:
              nu = nu_hat_2(data, B_hat, res.weights, res.beta);
              break;
            case CoverageEstimator::Oracle:
              if (strategy_knows_sigma(strat))
                nu = nu_oracle(data, oracle.A_true, oracle.B_true, res.weights);
              break;
          }
          if (!nu) {
            out.covered.push_back(-1);
            continue;
          }
          int flag = 0;
          try {
            flag = region_statistic(res.beta, *nu, oracle.beta_true, n) <= chi2 ? 1 : 0;
          } catch (const Error& err) {
            if (err.code() != ErrorCode::SingularCovariance) throw;
          }
          out.covered.push_back(flag);
        }
        out.ok = true;
      } catch (const Error& err) {
        if (!is_excludable(err.code())) throw;
        out.ok = false;
      }
      out.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  for (std::size_t s = 0; s < S; ++s) {
    StrategyReport sr;
    sr.strategy = options.strategies[s];
    sr.name = strategy_name(sr.strategy);
    for (std::size_t r = 0; r < R; ++r) {
      auto& out = outcomes[r * S + s];
      sr.fit_seconds += out.seconds;
      if (!out.ok) {
        ++sr.failures;
        continue;
      }
      sr.replicate_ids.push_back(r);
      sr.betas.push_back(std::move(out.beta));
      sr.covered.push_back(std::move(out.covered));
    }
    const std::size_t N = sr.betas.size();
    sr.mean = Vector::Zero(2);
    sr.covariance = Matrix::Zero(2, 2);
    if (N > 0) {
      for (const auto& b : sr.betas) sr.mean += b;
      sr.mean /= static_cast<double>(N);
    }
    if (N > 1) {
      for (const auto& b : sr.betas) {
        const Vector d = b - sr.mean;
        sr.covariance += d * d.transpose();
      }
      sr.covariance = symmetrize(sr.covariance / static_cast<double>(N - 1));
    }
    for (std::size_t e = 0; e < options.estimators.size(); ++e) {
      std::size_t hits = 0, applicable = 0;
      for (const auto& flags : sr.covered) {
        if (flags[e] < 0) continue;
        ++applicable;
        hits += static_cast<std::size_t>(flags[e]);
      }
      if (applicable > 0)
        sr.coverage.emplace_back(static_cast<double>(hits) / static_cast<double>(applicable));
      else
        sr.coverage.emplace_back(std::nullopt);
    }
    report.strategies.push_back(std::move(sr));
  }
  return report;
}

// ---------------------------------------------------------------------------

Ellipse asymptotic_ellipse(const Matrix& nu, double level, double n) {
  if (nu.rows() != nu.cols() || nu.rows() == 0)
    throw Error(ErrorCode::InvalidArgument, "asymptotic_ellipse: nu must be square");
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "asymptotic_ellipse: n must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(nu));
  const Vector lam = eig.eigenvalues();
  if (!(lam.minCoeff() > 1e-12 * lam.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::SingularCovariance, "asymptotic_ellipse: nu is not positive definite");
  const double scale = chi2_quantile(level, static_cast<int>(nu.rows())) / n;
  const auto p = nu.rows();
  Ellipse e;
  e.semi_axes.resize(p);
  e.axes.resize(p, p);
  // Eigen sorts ascending; emit descending.
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::Index src = p - 1 - k;
    e.semi_axes[k] = std::sqrt(lam[src] * scale);
    Vector dir = eig.eigenvectors().col(src);
    // Fix the sign so the first nonzero component is positive.
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(dir[j]) > 1e-14) {
        if (dir[j] < 0) dir = -dir;
        break;
      }
    }
    e.axes.col(k) = dir;
  }
  return e;
}

std::string replicates_csv(const SimReport& report) {
  using detail::format_double;
  std::ostringstream os;
  os << "replicate,strategy,beta1,beta2,covered_nu1,covered_nu2,covered_or\n";
  auto estimator_slot = [&](CoverageEstimator e) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < report.estimators.size(); ++k)
      if (report.estimators[k] == e) return k;
    return std::nullopt;
  };
  const std::array<std::optional<std::size_t>, 3> slots = {
      estimator_slot(CoverageEstimator::PlugIn), estimator_slot(CoverageEstimator::Sandwich),
      estimator_slot(CoverageEstimator::Oracle)};

  // Rows ordered by replicate, then strategy.
  const auto R = static_cast<std::uint64_t>(report.config.replicates);
  std::vector<std::size_t> cursor(report.strategies.size(), 0);
  for (std::uint64_t r = 0; r < R; ++r) {
    for (std::size_t s = 0; s < report.strategies.size(); ++s) {
      const auto& sr = report.strategies[s];
      auto& c = cursor[s];
      if (c >= sr.replicate_ids.size() || sr.replicate_ids[c] != r) continue;
      os << r << ',' << sr.name;
      for (Eigen::Index j = 0; j < sr.betas[c].size(); ++j)
        os << ',' << format_double(sr.betas[c][j]);
      for (const auto& slot : slots) {
        os << ',';
        if (slot && sr.covered[c][*slot] >= 0) os << sr.covered[c][*slot];
      }
      os << '\n';
      ++c;
    }
  }
  return os.str();
}

std::string summary_csv(const SimReport& report) {
  std::ostringstream os;
  os << "estimator";
  for (const auto& sr : report.strategies) os << ',' << sr.name;
  os << '\n';
  for (std::size_t e = 0; e < report.estimators.size(); ++e) {
    os << coverage_estimator_name(report.estimators[e]);
    for (const auto& sr : report.strategies) {
      os << ',';
      if (sr.coverage[e]) os << detail::format_fixed(*sr.coverage[e], 6);
    }
    os << '\n';
  }
  os << "replicates";
  for (const auto& sr : report.strategies) os << ',' << sr.betas.size();
  os << "\nfailures";
  for (const auto& sr : report.strategies) os << ',' << sr.failures;
  os << '\n';
  return os.str();
}

std::string ellipse_csv(const SimReport& report) {
  using detail::format_double;
  std::ostringstream os;
  os << "strategy,axis,semi_length,center1,center2,dir1,dir2\n";
  const double n = static_cast<double>(report.config.n);
  for (const auto& sr : report.strategies) {
    const auto nu = theoretical_nu_for(report.config, report.oracle, sr.strategy);
    if (!nu) continue;
    const Vector center = std::holds_alternative<strategy::InverseVariance>(sr.strategy)
                              ? report.oracle.wls_limit
                              : report.oracle.beta_true;
    const Ellipse e = asymptotic_ellipse(*nu, report.level, n);
    for (Eigen::Index k = 0; k < e.semi_axes.size(); ++k) {
      os << sr.name << ',' << (k + 1) << ',' << format_double(e.semi_axes[k]) << ','
         << format_double(center[0]) << ',' << format_double(center[1]) << ','
         << format_double(e.axes(0, k)) << ',' << format_double(e.axes(1, k)) << '\n';
    }
  }
  return os.str();
}

}  // namespace hetwls
