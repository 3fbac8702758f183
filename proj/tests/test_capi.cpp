#include "hetwls/hetwls.h"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  hetwls_string_free(s);
  return out;
}

// y = x^2 on a fixed design with three sigma levels, exactly recoverable
// groups and no noise beyond the misspecification.
struct Sample {
  std::vector<double> X, y, sigma;
  std::vector<int> groups;
  size_t n = 0;
};

Sample sample(size_t n) {
  Sample s;
  s.n = n;
  const double levels[] = {0.01, 0.1, 1.0};
  for (size_t i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    s.X.push_back(1.0);
    s.X.push_back(x);
    s.sigma.push_back(levels[i % 3]);
    s.groups.push_back(static_cast<int>(i % 3) + 1);
    s.y.push_back(x * x + ((i * 7) % 5 - 2.0) * 0.01);
  }
  return s;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(hetwls_version()) == "0.1.0");
  CHECK(std::string(hetwls_status_name(HETWLS_OK)) == "ok");
  CHECK(std::string(hetwls_status_name(HETWLS_E_SINGULAR_DESIGN)) == "SingularDesign");
  CHECK(std::string(hetwls_status_name(static_cast<hetwls_status>(99))) == "unknown");
  hetwls_string_free(nullptr);
  hetwls_data_free(nullptr);
  hetwls_fit_free(nullptr);
  hetwls_study_free(nullptr);
}

TEST_CASE("data handles and fits") {
  const auto s = sample(30);
  hetwls_data* d = nullptr;
  REQUIRE(hetwls_data_create(s.X.data(), s.y.data(), s.n, 2, s.sigma.data(), s.groups.data(), &d) ==
          HETWLS_OK);
  CHECK(hetwls_data_n(d) == 30);
  CHECK(hetwls_data_p(d) == 2);
  CHECK(hetwls_data_has_sigma(d) == 1);

  hetwls_fit* ols = nullptr;
  REQUIRE(hetwls_fit_run(d, "ols", 0, 0.0, nullptr, nullptr, &ols) == HETWLS_OK);
  double beta[2];
  REQUIRE(hetwls_fit_beta(ols, beta, 2) == HETWLS_OK);
  CHECK(hetwls_fit_beta(ols, beta, 1) == HETWLS_E_INVALID_ARGUMENT);
  double delta = -1.0;
  CHECK(hetwls_fit_delta(ols, &delta) == 0);
  double cov[4];
  REQUIRE(hetwls_fit_covariance(ols, cov, 4) == 1);
  CHECK(cov[1] == cov[2]);
  CHECK(cov[0] > 0.0);

  // fixed_delta with a huge delta is OLS up to rounding.
  hetwls_fit* big = nullptr;
  REQUIRE(hetwls_fit_run(d, "fixed_delta", 0, 1e12, "x2", "none", &big) == HETWLS_OK);
  double beta_big[2];
  hetwls_fit_beta(big, beta_big, 2);
  CHECK(beta_big[0] == doctest::Approx(beta[0]).epsilon(1e-9));
  CHECK(beta_big[1] == doctest::Approx(beta[1]).epsilon(1e-9));
  CHECK(hetwls_fit_covariance(big, cov, 4) == 0);

  hetwls_fit* ak = nullptr;
  REQUIRE(hetwls_fit_run(d, "adaptive_known", 3, 0.0, "trace", "plug_in", &ak) == HETWLS_OK);
  CHECK(hetwls_fit_delta(ak, &delta) == 1);
  CHECK(delta >= 0.0);
  std::vector<double> w(30);
  REQUIRE(hetwls_fit_weights(ak, w.data(), w.size()) == HETWLS_OK);
  CHECK(w[0] == doctest::Approx(1.0 / (0.01 * 0.01 + delta)));

  const std::string csv = take([&] {
    char* out = nullptr;
    REQUIRE(hetwls_fit_csv(ak, &out) == HETWLS_OK);
    return out;
  }());
  CHECK(csv.rfind("quantity,index,value\nbeta,1,", 0) == 0);
  CHECK(csv.find("\ndelta,,") != std::string::npos);
  CHECK(csv.find("\nweight,30,") != std::string::npos);
  const std::string cov_csv = take([&] {
    char* out = nullptr;
    REQUIRE(hetwls_fit_covariance_csv(ak, &out) == HETWLS_OK);
    return out;
  }());
  CHECK(cov_csv.rfind("x1,x2\n", 0) == 0);

  hetwls_fit* bad = nullptr;
  CHECK(hetwls_fit_run(d, "lasso", 0, 0.0, nullptr, nullptr, &bad) == HETWLS_E_INVALID_ARGUMENT);
  CHECK(bad == nullptr);
  CHECK(std::string(hetwls_last_error()).find("lasso") != std::string::npos);
  CHECK(hetwls_fit_run(d, "ols", 0, 0.0, "x3", nullptr, &bad) == HETWLS_E_INVALID_GAMMA);
  CHECK(hetwls_fit_run(nullptr, "ols", 0, 0.0, nullptr, nullptr, &bad) == HETWLS_E_INVALID_ARGUMENT);

  hetwls_fit_free(ols);
  hetwls_fit_free(big);
  hetwls_fit_free(ak);
  hetwls_data_free(d);
}

TEST_CASE("error codes from data") {
  hetwls_data* d = nullptr;
  CHECK(hetwls_data_from_csv("y,x1\n1,1\n2,1\n", &d) == HETWLS_OK);
  hetwls_fit* f = nullptr;
  CHECK(hetwls_fit_run(d, "wls", 0, 0.0, nullptr, nullptr, &f) == HETWLS_E_MISSING_COLUMN);
  CHECK(std::string(hetwls_last_error()).find("sigma") != std::string::npos);
  CHECK(hetwls_fit_run(d, "adaptive_grouped", 0, 0.0, nullptr, nullptr, &f) ==
        HETWLS_E_MISSING_COLUMN);
  hetwls_data_free(d);

  // Two identical columns: rank deficient.
  REQUIRE(hetwls_data_from_csv("y,x1,x2\n1,1,1\n2,1,1\n3,1,1\n", &d) == HETWLS_OK);
  CHECK(hetwls_fit_run(d, "ols", 0, 0.0, nullptr, nullptr, &f) == HETWLS_E_SINGULAR_DESIGN);
  hetwls_data_free(d);

  d = nullptr;
  CHECK(hetwls_data_from_csv("sigma,x1\n1,1\n", &d) == HETWLS_E_MISSING_COLUMN);
  CHECK(d == nullptr);
  CHECK(hetwls_data_from_csv("y,x1\n1,oops\n", &d) == HETWLS_E_PARSE);
  CHECK(hetwls_data_read_csv("/nonexistent/file.csv", &d) == HETWLS_E_IO);
  const int groups[] = {1, 3};
  const double X[] = {1, 1}, y[] = {0, 1};
  CHECK(hetwls_data_create(X, y, 2, 1, nullptr, groups, &d) == HETWLS_E_EMPTY_GROUP);
}

TEST_CASE("last error is per thread and cleared by nothing but failures") {
  hetwls_data* d = nullptr;
  hetwls_data_from_csv("y\n1\n", &d);
  const std::string first = hetwls_last_error();
  CHECK_FALSE(first.empty());
  CHECK(hetwls_data_from_csv("y,x1\n1,1\n", &d) == HETWLS_OK);
  hetwls_data_free(d);
}

TEST_CASE("simulation through the C API") {
  hetwls_sim_config* cfg = nullptr;
  REQUIRE(hetwls_sim_config_from_json(
              R"({"n": 50, "replicates": 40, "seed": 3, "strategies": ["wls", "ols"],
                  "estimators": ["nu2", "nu_or"]})",
              &cfg) == HETWLS_OK);
  hetwls_sim_report* r1 = nullptr;
  REQUIRE(hetwls_simulate(cfg, &r1) == HETWLS_OK);
  CHECK(hetwls_sim_strategy_count(r1) == 2);
  CHECK(std::string(hetwls_sim_strategy_name(r1, 1)) == "ols");
  CHECK(hetwls_sim_estimator_count(r1) == 2);
  CHECK(std::string(hetwls_sim_estimator_name(r1, 0)) == "nu2");
  double c = -1;
  CHECK(hetwls_sim_coverage(r1, 1, 0, &c) == 1);
  CHECK(c >= 0.0);
  CHECK(c <= 1.0);
  CHECK(hetwls_sim_failures(r1, 0) == 0);

  hetwls_sim_config_set_threads(cfg, 2);
  hetwls_sim_report* r2 = nullptr;
  REQUIRE(hetwls_simulate(cfg, &r2) == HETWLS_OK);
  char *a = nullptr, *b = nullptr;
  hetwls_sim_replicates_csv(r1, &a);
  hetwls_sim_replicates_csv(r2, &b);
  CHECK(take(a) == take(b));

  hetwls_sim_config_set_seed(cfg, 4);
  hetwls_sim_report* r3 = nullptr;
  REQUIRE(hetwls_simulate(cfg, &r3) == HETWLS_OK);
  hetwls_sim_summary_csv(r1, &a);
  hetwls_sim_summary_csv(r3, &b);
  CHECK(take(a) != take(b));
  REQUIRE(hetwls_sim_ellipse_csv(r3, &a) == HETWLS_OK);
  CHECK_FALSE(take(a).empty());

  hetwls_sim_report_free(r1);
  hetwls_sim_report_free(r2);
  hetwls_sim_report_free(r3);
  hetwls_sim_config_free(cfg);

  CHECK(hetwls_sim_config_from_json(R"({"bogus": 1})", &cfg) == HETWLS_E_PARSE);
  CHECK(std::string(hetwls_last_error()).find("bogus") != std::string::npos);
}

TEST_CASE("periodogram through the C API") {
  const size_t n = 50;
  std::vector<double> t(n), mag(n), err(n, 0.05);
  const double period = 0.55;
  for (size_t i = 0; i < n; ++i) {
    t[i] = 60.0 * std::fmod(0.754877666 * (i + 1) * (i + 3), 1.0);
    mag[i] = 15.0 + 0.4 * std::sin(2 * M_PI * t[i] / period + 1.0);
  }
  hetwls_lightcurve* lc = nullptr;
  REQUIRE(hetwls_lightcurve_create(t.data(), mag.data(), err.data(), n, &lc) == HETWLS_OK);
  CHECK(hetwls_lightcurve_size(lc) == n);
  std::vector<double> grid;
  for (double w = 2 * M_PI / 1.2; w <= 2 * M_PI / 0.3; w += 0.001) grid.push_back(w);

  hetwls_periodogram* pg = nullptr;
  REQUIRE(hetwls_periodogram_run(lc, 1, "delta", grid.data(), grid.size(), nullptr, &pg) == HETWLS_OK);
  CHECK(std::abs(hetwls_periodogram_period(pg) - period) / period < 0.01);
  CHECK(hetwls_periodogram_harmonics(pg) == 1);
  double beta[3], amp[1], ph[1], delta = -1;
  REQUIRE(hetwls_periodogram_beta(pg, beta, 3) == HETWLS_OK);
  CHECK(beta[0] == doctest::Approx(15.0).epsilon(1e-3));
  REQUIRE(hetwls_periodogram_amplitudes(pg, amp, ph, 1) == HETWLS_OK);
  CHECK(amp[0] == doctest::Approx(0.4).epsilon(0.05));
  CHECK(hetwls_periodogram_delta(pg, &delta) == 1);
  CHECK(delta >= 0.0);
  CHECK(hetwls_periodogram_singular_count(pg) == 0);
  char* csv = nullptr;
  REQUIRE(hetwls_periodogram_csv(pg, &csv) == HETWLS_OK);
  CHECK(take(csv).rfind("omega,rss\n", 0) == 0);
  hetwls_periodogram_free(pg);

  pg = nullptr;
  CHECK(hetwls_periodogram_run(lc, 1, "huber", grid.data(), grid.size(), nullptr, &pg) ==
        HETWLS_E_INVALID_ARGUMENT);
  CHECK(hetwls_periodogram_run(lc, 30, "identity", grid.data(), grid.size(), nullptr, &pg) ==
        HETWLS_E_INVALID_ARGUMENT);
  hetwls_lightcurve_free(lc);

  const double same_t[] = {1, 1, 1, 1, 1}, m5[] = {1, 2, 3, 4, 5}, e5[] = {1, 1, 1, 1, 1};
  REQUIRE(hetwls_lightcurve_create(same_t, m5, e5, 5, &lc) == HETWLS_OK);
  CHECK(hetwls_periodogram_run(lc, 1, "identity", grid.data(), grid.size(), nullptr, &pg) ==
        HETWLS_E_ALL_FREQUENCIES_SINGULAR);
  hetwls_lightcurve_free(lc);

  const double bad_err[] = {1, 0, 1, 1, 1};
  CHECK(hetwls_lightcurve_create(m5, m5, bad_err, 5, &lc) == HETWLS_E_INVALID_ARGUMENT);
}

TEST_CASE("period study through the C API") {
  hetwls_score_job* job = nullptr;
  REQUIRE(hetwls_score_job_from_json(
              R"({"synthetic": {"shape": "sinusoid", "count": 5, "n": 40},
                  "n_values": [20, 40], "K_values": [1], "weightings": ["identity", "delta"],
                  "grid": {"min_period": 0.3, "max_period": 1.2}})",
              nullptr, &job) == HETWLS_OK);
  hetwls_score_job_set_seed(job, 12);
  hetwls_study* st = nullptr;
  REQUIRE(hetwls_score_run(job, &st) == HETWLS_OK);
  CHECK(hetwls_study_catalog_size(st) == 5);
  CHECK(hetwls_study_skipped_count(st) == 0);
  REQUIRE(hetwls_study_cell_count(st) == 4);
  int n = 0, K = 0;
  const char* w = nullptr;
  double frac = -1;
  size_t count = 0, failures = 9;
  REQUIRE(hetwls_study_cell(st, 3, &n, &K, &w, &frac, &count, &failures) == HETWLS_OK);
  CHECK(n == 40);
  CHECK(K == 1);
  CHECK(std::string(w) == "delta");
  CHECK(count == 5);
  CHECK(failures == 0);
  CHECK(frac == 1.0);
  CHECK(hetwls_study_cell(st, 4, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) ==
        HETWLS_E_INVALID_ARGUMENT);
  char* csv = nullptr;
  REQUIRE(hetwls_study_csv(st, &csv) == HETWLS_OK);
  CHECK(take(csv).rfind("n,K1_identity,K1_delta\n20,", 0) == 0);
  hetwls_study_free(st);
  hetwls_score_job_free(job);

  REQUIRE(hetwls_score_job_from_json(R"({"manifest": "gone.csv"})", "/nonexistent", &job) ==
          HETWLS_OK);
  st = nullptr;
  CHECK(hetwls_score_run(job, &st) == HETWLS_E_IO);
  hetwls_score_job_free(job);
}
