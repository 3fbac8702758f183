#include "hetwls/periodfit.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace hetwls;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

LightCurve noiseless_sinusoid(double period, int n, double span, double phase = 0.3) {
  LightCurve lc{Vector(n), Vector(n), Vector::Constant(n, 0.05)};
  for (int i = 0; i < n; ++i) {
    // Irregular but deterministic sampling.
    const double t = span * std::fmod(0.618033988749895 * (i + 1) * (i + 1), 1.0);
    lc.t[i] = t;
    lc.y[i] = 17.0 + 0.8 * std::sin(kTwoPi * t / period + phase);
  }
  return lc;
}

}  // namespace

TEST_CASE("design matrix columns") {
  Vector t(3);
  t << 0.0, 0.4, 1.3;
  const Matrix X = design_matrix(2.0, t, 3);
  REQUIRE(X.cols() == 7);
  for (int i = 0; i < 3; ++i) {
    CHECK(X(i, 0) == 1.0);
    for (int k = 1; k <= 3; ++k) {
      CHECK(X(i, 2 * k - 1) == doctest::Approx(std::sin(k * 2.0 * t[i])).epsilon(1e-13));
      CHECK(X(i, 2 * k) == doctest::Approx(std::cos(k * 2.0 * t[i])).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(design_matrix(0.0, t, 1), Error);
  CHECK_THROWS_AS(design_matrix(1.0, t, 0), Error);
}

TEST_CASE("fit at the true frequency recovers amplitude and phase exactly") {
  const double period = 0.7;
  const auto lc = noiseless_sinusoid(period, 30, 50.0, 0.3);
  const auto f = fit_at_frequency(lc, kTwoPi / period, 1, Vector::Ones(30));
  CHECK(f.weighted_rss < 1e-20);
  const auto ap = amplitudes_phases(f.beta);
  CHECK(f.beta[0] == doctest::Approx(17.0).epsilon(1e-12));
  CHECK(ap.amplitudes[0] == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(ap.phases[0] == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("noiseless curve: period recovered within 1%") {
  for (double period : {0.35, 0.61, 0.93}) {
    const auto lc = noiseless_sinusoid(period, 40, 80.0);
    PeriodogramConfig cfg;
    cfg.omega_grid = default_frequency_grid(80.0, 0.3, 1.2, 10.0);
    for (auto w : {PeriodWeighting::Identity, PeriodWeighting::InverseVariance, PeriodWeighting::DeltaRefit}) {
      cfg.weighting = w;
      const auto r = periodogram(lc, cfg);
      CHECK(std::abs(r.period() - period) / period < 0.01);
      CHECK(r.rss_curve.size() == cfg.omega_grid.size());
      CHECK(r.delta.has_value() == (w == PeriodWeighting::DeltaRefit));
      if (r.delta) CHECK(*r.delta >= 0.0);
    }
  }
}

TEST_CASE("ties go to the lowest frequency") {
  // A zero signal fits exactly at every frequency, so every RSS is exactly 0.
  LightCurve flat{Vector::LinSpaced(10, 0.0, 9.3), Vector::Zero(10), Vector::Ones(10)};
  flat.t[3] = 2.71;
  PeriodogramConfig cfg;
  cfg.omega_grid = uniform_grid(1.0, 2.0, 0.1);
  const auto r = periodogram(flat, cfg);
  CHECK(r.best_index == 0);
  CHECK(r.omega_hat == 1.0);
}

TEST_CASE("periodogram errors") {
  const auto lc = noiseless_sinusoid(0.5, 6, 10.0);
  PeriodogramConfig cfg;
  cfg.omega_grid = uniform_grid(5.0, 6.0, 0.5);
  cfg.K = 3;  // needs 8 points
  CHECK_THROWS_AS(periodogram(lc, cfg), Error);

  LightCurve same{Vector::Constant(6, 1.0), Vector::LinSpaced(6, 0, 1), Vector::Ones(6)};
  cfg.K = 1;
  try {
    periodogram(same, cfg);
    FAIL("expected AllFrequenciesSingular");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllFrequenciesSingular);
  }

  cfg.omega_grid = {2.0, 1.0};
  CHECK_THROWS_AS(periodogram(lc, cfg), Error);
  LightCurve bad = lc;
  bad.sigma[0] = 0.0;
  cfg.omega_grid = {1.0};
  CHECK_THROWS_AS(periodogram(bad, cfg), Error);
}

TEST_CASE("amplitude and phase map") {
  Vector beta(5);
  beta << 1.0, -1.0, 0.0, 0.0, 0.0;  // phase pi, second harmonic absent
  const auto ap = amplitudes_phases(beta);
  CHECK(ap.amplitudes[0] == 1.0);
  CHECK(ap.phases[0] == doctest::Approx(std::numbers::pi));
  CHECK(ap.amplitudes[1] == 0.0);
  CHECK(ap.phases[1] == 0.0);
  beta << 1.0, -1.0, -0.0, 0.0, 0.0;  // atan2(-0, -1) = -pi maps to pi
  CHECK(amplitudes_phases(beta).phases[0] == doctest::Approx(std::numbers::pi));
  CHECK_THROWS_AS(amplitudes_phases(Vector::Ones(4)), Error);
}

TEST_CASE("frequency grids") {
  const auto g = default_frequency_grid(100.0, 0.5, 2.0, 5.0);
  const double step = kTwoPi * 0.1 / 500.0;
  CHECK(g.front() == doctest::Approx(kTwoPi / 2.0));
  CHECK(g[1] - g[0] == doctest::Approx(step));
  CHECK(g.back() <= kTwoPi / 0.5 + 1e-12);
  CHECK(g.back() > kTwoPi / 0.5 - step);
}

TEST_CASE("downsampling") {
  const auto lc = noiseless_sinusoid(0.5, 50, 30.0);
  const auto a = downsample(lc, 20, 9);
  const auto b = downsample(lc, 20, 9);
  const auto c = downsample(lc, 20, 10);
  CHECK(a.t == b.t);
  CHECK(a.t != c.t);
  std::set<double> pool(lc.t.begin(), lc.t.end());
  std::set<double> picked(a.t.begin(), a.t.end());
  CHECK(picked.size() == 20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    CHECK(pool.count(a.t[i]) == 1);
    // Order of the source curve is kept; find the source index.
    Eigen::Index src = 0;
    while (lc.t[src] != a.t[i]) ++src;
    CHECK(a.y[i] == lc.y[src]);
  }
  CHECK(downsample(lc, 50, 1).size() == 50);
  try {
    downsample(lc, 51, 1);
    FAIL("expected InvalidTarget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidTarget);
  }
}

TEST_CASE("scoring") {
  const std::vector<double> est{1.0, 2.019, 3.5};
  const std::vector<double> truth{1.005, 2.0, 3.0};
  const auto s = score_periods(est, truth, 0.01);
  CHECK(s.correct == 2);
  CHECK(s.count == 3);
  CHECK(s.fraction == doctest::Approx(2.0 / 3));
  CHECK(score_periods({}, {}).count == 0);
}

TEST_CASE("synthetic curves") {
  SyntheticCurveSpec spec;
  spec.shape = CurveShape::Sawtooth;
  spec.sigma_law = {{0.0001}, {1.0}};
  spec.n = 400;
  const auto a = synthetic_light_curve(spec, 5, 2);
  const auto b = synthetic_light_curve(spec, 5, 2);
  CHECK(a.curve.y == b.curve.y);
  CHECK(a.true_period >= spec.min_period);
  CHECK(a.true_period <= spec.max_period);
  // Sawtooth spans mean +- amplitude / 2 and spends most of the cycle fading.
  const double lo = a.curve.y.minCoeff(), hi = a.curve.y.maxCoeff();
  CHECK(std::abs(lo - (spec.mean_magnitude - 0.5)) < 0.05);
  CHECK(std::abs(hi - (spec.mean_magnitude + 0.5)) < 0.05);
  CHECK(lo >= spec.mean_magnitude - 0.5 - 0.001);
  CHECK(hi <= spec.mean_magnitude + 0.5 + 0.001);
  const auto cat = synthetic_catalog(spec, 4, 5);
  CHECK(cat.size() == 4);
  CHECK(cat[2].curve.y == a.curve.y);
}

TEST_CASE("period study layout") {
  SyntheticCurveSpec spec;
  spec.n = 40;
  const auto cat = synthetic_catalog(spec, 6, 3);
  PeriodStudyConfig cfg;
  cfg.n_values = {10, 40};
  cfg.K_values = {1, 2};
  cfg.weightings = {PeriodWeighting::Identity, PeriodWeighting::InverseVariance};
  cfg.min_period = 0.3;
  cfg.max_period = 1.2;
  const auto r = run_period_study(cat, cfg);
  CHECK(r.cells.size() == 8);
  CHECK(r.catalog_size == 6);
  const std::string csv = period_study_csv(r);
  CHECK(csv.rfind("n,K1_identity,K1_inverse_variance,K2_identity,K2_inverse_variance\n10,", 0) == 0);
  // The sinusoid truth at full sampling is easy.
  CHECK(r.cell(40, 1, PeriodWeighting::Identity).score.fraction == 1.0);

  const auto empty = run_period_study({}, cfg);
  CHECK(period_study_csv(empty) == "n,K1_identity,K1_inverse_variance,K2_identity,K2_inverse_variance\n");
}
