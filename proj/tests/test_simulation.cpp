#include "hetwls/chi2.hpp"
#include "hetwls/simulation.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace hetwls;

namespace {

// Polynomials as coefficient vectors, integrated exactly over [a, b].
using Poly = std::vector<double>;

Poly mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

double integral(const Poly& p, double a, double b) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    s += p[k] * (std::pow(b, k + 1) - std::pow(a, k + 1)) / static_cast<double>(k + 1);
  return s;
}

// g(x) = x^2 - x + 1/6 for the quadratic truth.
const Poly kG{1.0 / 6, -1.0, 1.0};

Matrix exact_B() {
  Matrix B(2, 2);
  B << 4, -6, -6, 12;
  return B;
}

Matrix exact_A() {
  const Poly g2 = mul(kG, kG);
  Matrix M(2, 2);
  M(0, 0) = integral(g2, 0, 1);
  M(0, 1) = M(1, 0) = integral(mul(g2, {0, 1}), 0, 1);
  M(1, 1) = integral(mul(g2, {0, 0, 1}), 0, 1);
  return exact_B() * M * exact_B();
}

std::string csv_of(const SimReport& r) { return replicates_csv(r) + summary_csv(r) + ellipse_csv(r); }

}  // namespace

TEST_CASE("oracle quantities for the quadratic truth") {
  const DgpConfig cfg;
  const auto q = oracle_quantities(cfg);
  CHECK(q.beta_true[0] == doctest::Approx(-1.0 / 6).epsilon(1e-10));
  CHECK(q.beta_true[1] == doctest::Approx(1.0).epsilon(1e-10));
  const Matrix B = exact_B();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(q.B_true(i, j) - B(i, j)) < 1e-8);
  CHECK(std::abs(q.mean_g2 - 1.0 / 180) < 1e-8);
  CHECK(std::abs(integral(mul(kG, kG), 0, 1) - 1.0 / 180) < 1e-15);
  const Matrix A = exact_A();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(q.A_true(i, j) - A(i, j)) < 1e-9);
  CHECK(q.delta_true == doctest::Approx(A.trace() / B.trace()).epsilon(1e-9));
  const double es2 = 0.05 * 1e-4 + 0.9 * 1e-2 + 0.05 * 1.0;
  const Matrix ols = A + es2 * B;
  CHECK((q.ols_nu - ols).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((q.wls_limit - q.beta_true).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear truth has no misspecification") {
  DgpConfig cfg;
  cfg.regression_fn = dgp::Linear{0.5, -2.0};
  const auto q = oracle_quantities(cfg);
  CHECK(q.beta_true[0] == doctest::Approx(0.5));
  CHECK(q.beta_true[1] == doctest::Approx(-2.0));
  CHECK(q.A_true.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(q.delta_true == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("custom table interpolates and integrates") {
  DgpConfig cfg;
  cfg.regression_fn = dgp::CustomTable{{0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}};
  CHECK(evaluate(cfg.regression_fn, 0.25) == doctest::Approx(0.5));
  CHECK(evaluate(cfg.regression_fn, 0.75) == doctest::Approx(0.5));
  const auto q = oracle_quantities(cfg);
  // Tent function: symmetric about 1/2, so the best slope is 0 and the
  // intercept is its mean 1/2.
  CHECK(q.beta_true[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::abs(q.beta_true[1]) < 1e-10);
}

TEST_CASE("dependent sigma: WLS limit against exact piecewise integrals") {
  DgpConfig cfg;
  cfg.sigma_law = dgp::StepSigma{{0.05, 0.95}, {0.01, 0.1, 1.0}};
  CHECK(sigma_at(std::get<dgp::StepSigma>(cfg.sigma_law), 0.049) == 0.01);
  CHECK(sigma_at(std::get<dgp::StepSigma>(cfg.sigma_law), 0.05) == 0.1);
  CHECK(sigma_at(std::get<dgp::StepSigma>(cfg.sigma_law), 0.95) == 0.1);
  CHECK(sigma_at(std::get<dgp::StepSigma>(cfg.sigma_law), 0.951) == 1.0);
  CHECK_FALSE(sigma_independent_of_x(cfg));

  const double edges[] = {0.0, 0.05, 0.95, 1.0};
  const double w[] = {1e4, 1e2, 1.0};
  Matrix G = Matrix::Zero(2, 2);
  Vector m = Vector::Zero(2);
  Matrix mid = Matrix::Zero(2, 2);
  const double s2[] = {1e-4, 1e-2, 1.0};
  for (int k = 0; k < 3; ++k) {
    const double a = edges[k], b = edges[k + 1];
    G(0, 0) += w[k] * integral({1}, a, b);
    G(0, 1) += w[k] * integral({0, 1}, a, b);
    G(1, 1) += w[k] * integral({0, 0, 1}, a, b);
    m[0] += w[k] * integral({0, 0, 1}, a, b);
    m[1] += w[k] * integral({0, 0, 0, 1}, a, b);
    Poly h = mul(kG, kG);
    h[0] += s2[k];
    mid(0, 0) += integral(h, a, b);
    mid(0, 1) += integral(mul(h, {0, 1}), a, b);
    mid(1, 1) += integral(mul(h, {0, 0, 1}), a, b);
  }
  G(1, 0) = G(0, 1);
  mid(1, 0) = mid(0, 1);
  const Vector limit = G.inverse() * m;
  const auto q = oracle_quantities(cfg);
  CHECK((q.wls_limit - limit).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((q.ols_nu - exact_B() * mid * exact_B()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((q.wls_limit - q.beta_true).norm() > 0.01);
}

TEST_CASE("theoretical nu per strategy") {
  const DgpConfig cfg;
  const auto q = oracle_quantities(cfg);
  const Matrix A = exact_A(), B = exact_B();
  const double s[] = {0.01, 0.1, 1.0};
  const double p[] = {0.05, 0.9, 0.05};
  auto nu_for = [&](auto w) {
    double ew = 0, ew2 = 0, es2w2 = 0;
    for (int k = 0; k < 3; ++k) {
      ew += p[k] * w(s[k]);
      ew2 += p[k] * w(s[k]) * w(s[k]);
      es2w2 += p[k] * s[k] * s[k] * w(s[k]) * w(s[k]);
    }
    return Matrix((ew2 * A + es2w2 * B) / (ew * ew));
  };
  const double d = A.trace() / B.trace();
  const Matrix wls = nu_for([](double x) { return 1 / (x * x); });
  const Matrix ada = nu_for([d](double x) { return 1 / (x * x + d); });
  CHECK((*theoretical_nu_for(cfg, q, strategy::InverseVariance{}) - wls).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((*theoretical_nu_for(cfg, q, strategy::AdaptiveKnown{}) - ada).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((*theoretical_nu_for(cfg, q, strategy::AdaptiveGrouped{}) - ada).cwiseAbs().maxCoeff() < 1e-8);
  // The optimal weighting beats both OLS and standard WLS in trace.
  const double t_ols = q.ols_nu.trace();
  CHECK(ada.trace() < std::min(t_ols, wls.trace()));
  CHECK_FALSE(theoretical_nu_for(cfg, q, strategy::FixedWeights{}).has_value());
}

TEST_CASE("datasets are deterministic with compact sigma-ordered groups") {
  DgpConfig cfg;
  cfg.n = 40;
  cfg.sigma_law = dgp::DiscreteSigma{{1.0, 0.01, 0.1}, {0.3, 0.0, 0.7}};
  const auto a = generate_dataset(cfg, 3);
  const auto b = generate_dataset(cfg, 3);
  const auto c = generate_dataset(cfg, 4);
  CHECK(a.X() == b.X());
  CHECK(a.y() == b.y());
  CHECK(a.X() != c.X());
  CHECK(a.group_count() == 2);
  for (Eigen::Index i = 0; i < a.n(); ++i) {
    CHECK(a.X()(i, 0) == 1.0);
    CHECK(a.X()(i, 1) > 0.0);
    CHECK(a.X()(i, 1) < 1.0);
    const int g = a.groups()[static_cast<std::size_t>(i)];
    CHECK(a.sigma()[i] == (g == 1 ? 0.1 : 1.0));
  }
}

TEST_CASE("dependent-sigma datasets follow the step law") {
  DgpConfig cfg;
  cfg.n = 200;
  cfg.sigma_law = dgp::StepSigma{{0.05, 0.95}, {0.01, 0.1, 1.0}};
  const auto d = generate_dataset(cfg, 0);
  const auto& law = std::get<dgp::StepSigma>(cfg.sigma_law);
  for (Eigen::Index i = 0; i < d.n(); ++i) CHECK(d.sigma()[i] == sigma_at(law, d.X()(i, 1)));
}

TEST_CASE("config validation") {
  DgpConfig cfg;
  cfg.sigma_law = dgp::DiscreteSigma{{0.1, 1.0}, {0.5, 0.6}};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.sigma_law = dgp::StepSigma{{0.5}, {0.1}};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = DgpConfig{};
  cfg.n = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("Monte Carlo report structure and thread independence") {
  DgpConfig cfg;
  cfg.replicates = 40;
  SimOptions opt;
  opt.strategies = {strategy::InverseVariance{}, strategy::Identity{}, strategy::AdaptiveKnown{},
                    strategy::AdaptiveGrouped{}};
  const auto one = run_monte_carlo(cfg, opt);
  opt.threads = 3;
  const auto three = run_monte_carlo(cfg, opt);
  CHECK(csv_of(one) == csv_of(three));

  REQUIRE(one.strategies.size() == 4);
  for (const auto& s : one.strategies) {
    CHECK(s.betas.size() + s.failures == 40);
    CHECK(s.covered.size() == s.betas.size());
  }
  // Plug-in and oracle estimators need sigma, so they are NA for grouped.
  CHECK_FALSE(one.strategies[3].coverage[0].has_value());
  CHECK(one.strategies[3].coverage[1].has_value());
  CHECK_FALSE(one.strategies[3].coverage[2].has_value());

  std::istringstream summary(summary_csv(one));
  std::string line;
  std::getline(summary, line);
  CHECK(line == "estimator,wls,ols,adaptive_known,adaptive_grouped");
  std::getline(summary, line);
  CHECK(line.rfind("nu1,", 0) == 0);
  CHECK(line.back() == ',');
  CHECK(replicates_csv(one).rfind("replicate,strategy,beta1,beta2,covered_nu1,covered_nu2,covered_or\n", 0) == 0);
}

TEST_CASE("single replicate gives one row per strategy") {
  DgpConfig cfg;
  cfg.replicates = 1;
  SimOptions opt;
  opt.strategies = {strategy::Identity{}};
  const auto r = run_monte_carlo(cfg, opt);
  const std::string csv = replicates_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("failed replicates are excluded and counted") {
  DgpConfig cfg;
  cfg.n = 2;  // zero residuals: every grouped variance is degenerate
  cfg.replicates = 5;
  SimOptions opt;
  opt.strategies = {strategy::AdaptiveGrouped{}, strategy::Identity{}};
  opt.estimators = {CoverageEstimator::Sandwich};
  const auto r = run_monte_carlo(cfg, opt);
  CHECK(r.strategies[0].failures == 5);
  CHECK(r.strategies[0].betas.empty());
  CHECK(r.strategies[1].failures == 0);
  CHECK(summary_csv(r).find("failures,5,0") != std::string::npos);
}

TEST_CASE("asymptotic ellipse axes") {
  Matrix nu(2, 2);
  nu << 4.0, 0.0, 0.0, 1.0;
  const auto e = asymptotic_ellipse(nu, 0.95, 100);
  const double c = chi2_quantile(0.95, 2);
  CHECK(e.semi_axes[0] == doctest::Approx(std::sqrt(4.0 * c / 100)));
  CHECK(e.semi_axes[1] == doctest::Approx(std::sqrt(1.0 * c / 100)));
  CHECK(std::abs(e.axes(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.axes(1, 1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(asymptotic_ellipse(-nu, 0.95, 100), Error);
}
