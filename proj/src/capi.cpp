#include "hetwls/hetwls.h"

#include "hetwls/config.hpp"
#include "hetwls/csv.hpp"
#include "hetwls/estimators.hpp"
#include "hetwls/periodfit.hpp"
#include "hetwls/simulation.hpp"

#include "format.hpp"

#include <cstdlib>
#include <cstring>
#include <functional>
#include <memory>
#include <new>
#include <string>

using namespace hetwls;

struct hetwls_data {
  RegressionData data;
};
struct hetwls_fit {
  FitResult result;
  Eigen::Index n = 0;
};
struct hetwls_sim_config {
  SimulateJob job;
};
struct hetwls_sim_report {
  SimReport report;
  std::vector<std::string> strategy_names;
  std::vector<std::string> estimator_names;
};
struct hetwls_lightcurve {
  LightCurve lc;
};
struct hetwls_periodogram {
  PeriodogramResult result;
  std::vector<double> grid;
  int K = 1;
};
struct hetwls_periodogram_job {
  PeriodogramJob job;
  std::vector<std::string> paths;
};
struct hetwls_score_job {
  ScoreJob job;
};
struct hetwls_study {
  PeriodStudyResult result;
  std::vector<std::string> skipped;
  std::vector<std::string> weighting_names;
};

namespace {

thread_local std::string last_error;

hetwls_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return HETWLS_E_INVALID_ARGUMENT;
    case ErrorCode::MissingColumn: return HETWLS_E_MISSING_COLUMN;
    case ErrorCode::ParseError: return HETWLS_E_PARSE;
    case ErrorCode::IoError: return HETWLS_E_IO;
    case ErrorCode::SingularDesign: return HETWLS_E_SINGULAR_DESIGN;
    case ErrorCode::SingularCovariance: return HETWLS_E_SINGULAR_COVARIANCE;
    case ErrorCode::InvalidGamma: return HETWLS_E_INVALID_GAMMA;
    case ErrorCode::InvalidMoments: return HETWLS_E_INVALID_MOMENTS;
    case ErrorCode::EmptyGroup: return HETWLS_E_EMPTY_GROUP;
    case ErrorCode::DegenerateGroupVariance: return HETWLS_E_DEGENERATE_GROUP_VARIANCE;
    case ErrorCode::QuadratureFailure: return HETWLS_E_QUADRATURE_FAILURE;
    case ErrorCode::AllFrequenciesSingular: return HETWLS_E_ALL_FREQUENCIES_SINGULAR;
    case ErrorCode::InvalidTarget: return HETWLS_E_INVALID_TARGET;
  }
  return HETWLS_E_INTERNAL;
}

template <class F>
hetwls_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return HETWLS_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return HETWLS_E_OUT_OF_MEMORY;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HETWLS_E_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return HETWLS_E_INTERNAL;
  }
}

void need(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

hetwls_status emit(char** out, const std::function<std::string()>& render) {
  return guarded([&] {
    need(out != nullptr, "output pointer is NULL");
    *out = dup_string(render());
  });
}

void copy_vector(const Vector& v, double* out, std::size_t len) {
  need(out != nullptr, "output buffer is NULL");
  need(len >= static_cast<std::size_t>(v.size()), "output buffer too small");
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
}

std::filesystem::path base_path(const char* base_dir) {
  return base_dir ? std::filesystem::path(base_dir) : std::filesystem::path();
}

WeightStrategy strategy_with(std::string_view name, int iterations, double delta) {
  WeightStrategy s = parse_strategy(name);
  need(iterations >= 0, "iterations must be >= 0");
  if (auto* a = std::get_if<strategy::AdaptiveKnown>(&s); a && iterations > 0) a->iterations = iterations;
  if (auto* g = std::get_if<strategy::AdaptiveGrouped>(&s); g && iterations > 0) g->iterations = iterations;
  if (auto* d = std::get_if<strategy::FixedDelta>(&s)) d->delta = delta;
  return s;
}

double span_of(const LightCurve& lc) {
  return lc.size() == 0 ? 0.0 : lc.t.maxCoeff() - lc.t.minCoeff();
}

}  // namespace

extern "C" {

const char* hetwls_version(void) { return "0.1.0"; }

const char* hetwls_status_name(hetwls_status status) {
  switch (status) {
    case HETWLS_OK: return "ok";
    case HETWLS_E_OUT_OF_MEMORY: return "out_of_memory";
    case HETWLS_E_INTERNAL: return "internal";
    default: break;
  }
  if (status >= HETWLS_E_INVALID_ARGUMENT && status <= HETWLS_E_INVALID_TARGET)
    return to_string(static_cast<ErrorCode>(status - 1));
  return "unknown";
}

const char* hetwls_last_error(void) { return last_error.c_str(); }

void hetwls_string_free(char* s) { std::free(s); }

// ---- regression data ------------------------------------------------------

hetwls_status hetwls_data_create(const double* X, const double* y, size_t n, size_t p,
                                 const double* sigma, const int* groups, hetwls_data** out) {
  return guarded([&] {
    need(out && X && y, "NULL argument");
    need(n > 0 && p > 0, "n and p must be positive");
    Matrix Xm(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < p; ++j)
        Xm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i * p + j];
    Vector yv = Eigen::Map<const Vector>(y, static_cast<Eigen::Index>(n));
    std::optional<Vector> sv;
    if (sigma) sv = Eigen::Map<const Vector>(sigma, static_cast<Eigen::Index>(n));
    std::optional<std::vector<int>> gv;
    if (groups) gv.emplace(groups, groups + n);
    *out = new hetwls_data{RegressionData(std::move(Xm), std::move(yv), std::move(sv), std::move(gv))};
  });
}

hetwls_status hetwls_data_from_csv(const char* text, hetwls_data** out) {
  return guarded([&] {
    need(out && text, "NULL argument");
    *out = new hetwls_data{parse_regression_csv(text)};
  });
}

hetwls_status hetwls_data_read_csv(const char* path, hetwls_data** out) {
  return guarded([&] {
    need(out && path, "NULL argument");
    *out = new hetwls_data{read_regression_csv(path)};
  });
}

size_t hetwls_data_n(const hetwls_data* d) { return d ? static_cast<size_t>(d->data.n()) : 0; }
size_t hetwls_data_p(const hetwls_data* d) { return d ? static_cast<size_t>(d->data.p()) : 0; }
int hetwls_data_has_sigma(const hetwls_data* d) { return d && d->data.has_sigma() ? 1 : 0; }
void hetwls_data_free(hetwls_data* d) { delete d; }

// ---- fitting ----------------------------------------------------------------

hetwls_status hetwls_fit_run(const hetwls_data* data, const char* strategy_name_c, int iterations,
                             double delta, const char* gamma, const char* variance,
                             hetwls_fit** out) {
  return guarded([&] {
    need(out && data && strategy_name_c, "NULL argument");
    const WeightStrategy s = strategy_with(strategy_name_c, iterations, delta);
    const GammaFunctional g = gamma ? parse_gamma(gamma) : GammaFunctional::trace();
    const VarianceEstimator v =
        variance ? parse_variance_estimator(variance) : VarianceEstimator::Sandwich;
    *out = new hetwls_fit{fit(data->data, s, g, v), data->data.n()};
  });
}

hetwls_status hetwls_fit_job_run(const char* json, const char* base_dir, hetwls_fit** out) {
  return guarded([&] {
    need(out && json, "NULL argument");
    const FitJob job = parse_fit_job(json, base_path(base_dir));
    const RegressionData data = read_regression_csv(job.data);
    *out = new hetwls_fit{fit(data, job.strategy, job.gamma, job.variance), data.n()};
  });
}

size_t hetwls_fit_p(const hetwls_fit* f) { return f ? static_cast<size_t>(f->result.beta.size()) : 0; }
size_t hetwls_fit_n(const hetwls_fit* f) { return f ? static_cast<size_t>(f->n) : 0; }

hetwls_status hetwls_fit_beta(const hetwls_fit* f, double* out, size_t len) {
  return guarded([&] {
    need(f != nullptr, "NULL fit");
    copy_vector(f->result.beta, out, len);
  });
}

hetwls_status hetwls_fit_weights(const hetwls_fit* f, double* out, size_t len) {
  return guarded([&] {
    need(f != nullptr, "NULL fit");
    copy_vector(f->result.weights, out, len);
  });
}

int hetwls_fit_delta(const hetwls_fit* f, double* delta) {
  if (!f || !f->result.delta) return 0;
  if (delta) *delta = *f->result.delta;
  return 1;
}

int hetwls_fit_covariance(const hetwls_fit* f, double* out, size_t len) {
  if (!f || !f->result.nu_hat) return 0;
  const Matrix& c = *f->result.nu_hat;
  if (out) {
    if (len < static_cast<size_t>(c.size())) return 0;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = 0; j < c.cols(); ++j) out[i * c.cols() + j] = c(i, j);
  }
  return 1;
}

hetwls_status hetwls_fit_csv(const hetwls_fit* f, char** out) {
  return emit(out, [&] {
    need(f != nullptr, "NULL fit");
    using detail::format_double;
    std::string s = "quantity,index,value\n";
    for (Eigen::Index j = 0; j < f->result.beta.size(); ++j)
      s += "beta," + std::to_string(j + 1) + ',' + format_double(f->result.beta(j)) + '\n';
    if (f->result.delta) s += "delta,," + format_double(*f->result.delta) + '\n';
    for (Eigen::Index i = 0; i < f->result.weights.size(); ++i)
      s += "weight," + std::to_string(i + 1) + ',' + format_double(f->result.weights(i)) + '\n';
    return s;
  });
}

hetwls_status hetwls_fit_covariance_csv(const hetwls_fit* f, char** out) {
  return emit(out, [&] {
    need(f != nullptr, "NULL fit");
    if (!f->result.nu_hat)
      throw Error(ErrorCode::InvalidArgument, "fit was run without a variance estimator");
    const Matrix& c = *f->result.nu_hat;
    std::string s;
    for (Eigen::Index j = 0; j < c.cols(); ++j) s += (j ? ",x" : "x") + std::to_string(j + 1);
    s += '\n';
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.cols(); ++j) s += (j ? "," : "") + detail::format_double(c(i, j));
      s += '\n';
    }
    return s;
  });
}

void hetwls_fit_free(hetwls_fit* f) { delete f; }

// ---- Monte Carlo ------------------------------------------------------------

hetwls_status hetwls_sim_config_from_json(const char* json, hetwls_sim_config** out) {
  return guarded([&] {
    need(out && json, "NULL argument");
    *out = new hetwls_sim_config{parse_simulate_job(json)};
  });
}

void hetwls_sim_config_set_seed(hetwls_sim_config* c, uint64_t seed) {
  if (c) c->job.dgp.seed = seed;
}

void hetwls_sim_config_set_threads(hetwls_sim_config* c, unsigned threads) {
  if (c) c->job.options.threads = threads;
}

void hetwls_sim_config_free(hetwls_sim_config* c) { delete c; }

hetwls_status hetwls_simulate(const hetwls_sim_config* c, hetwls_sim_report** out) {
  return guarded([&] {
    need(out && c, "NULL argument");
    auto r = std::make_unique<hetwls_sim_report>();
    r->report = run_monte_carlo(c->job.dgp, c->job.options);
    for (const auto& s : r->report.strategies) r->strategy_names.push_back(s.name);
    for (auto e : r->report.estimators) r->estimator_names.push_back(coverage_estimator_name(e));
    *out = r.release();
  });
}

size_t hetwls_sim_strategy_count(const hetwls_sim_report* r) {
  return r ? r->strategy_names.size() : 0;
}

const char* hetwls_sim_strategy_name(const hetwls_sim_report* r, size_t i) {
  return r && i < r->strategy_names.size() ? r->strategy_names[i].c_str() : nullptr;
}

size_t hetwls_sim_estimator_count(const hetwls_sim_report* r) {
  return r ? r->estimator_names.size() : 0;
}

const char* hetwls_sim_estimator_name(const hetwls_sim_report* r, size_t j) {
  return r && j < r->estimator_names.size() ? r->estimator_names[j].c_str() : nullptr;
}

int hetwls_sim_coverage(const hetwls_sim_report* r, size_t i, size_t j, double* coverage) {
  if (!r || i >= r->report.strategies.size() || j >= r->report.estimators.size()) return 0;
  const auto& c = r->report.strategies[i].coverage[j];
  if (!c) return 0;
  if (coverage) *coverage = *c;
  return 1;
}

size_t hetwls_sim_failures(const hetwls_sim_report* r, size_t i) {
  return r && i < r->report.strategies.size() ? r->report.strategies[i].failures : 0;
}

hetwls_status hetwls_sim_replicates_csv(const hetwls_sim_report* r, char** out) {
  return emit(out, [&] {
    need(r != nullptr, "NULL report");
    return replicates_csv(r->report);
  });
}

hetwls_status hetwls_sim_summary_csv(const hetwls_sim_report* r, char** out) {
  return emit(out, [&] {
    need(r != nullptr, "NULL report");
    return summary_csv(r->report);
  });
}

hetwls_status hetwls_sim_ellipse_csv(const hetwls_sim_report* r, char** out) {
  return emit(out, [&] {
    need(r != nullptr, "NULL report");
    return ellipse_csv(r->report);
  });
}

void hetwls_sim_report_free(hetwls_sim_report* r) { delete r; }

// ---- light curves and periodograms -----------------------------------------

hetwls_status hetwls_lightcurve_create(const double* t, const double* mag, const double* err,
                                       size_t n, hetwls_lightcurve** out) {
  return guarded([&] {
    need(out && t && mag && err, "NULL argument");
    const auto len = static_cast<Eigen::Index>(n);
    LightCurve lc{Eigen::Map<const Vector>(t, len), Eigen::Map<const Vector>(mag, len),
                  Eigen::Map<const Vector>(err, len)};
    lc.validate();
    *out = new hetwls_lightcurve{std::move(lc)};
  });
}

hetwls_status hetwls_lightcurve_from_csv(const char* text, hetwls_lightcurve** out) {
  return guarded([&] {
    need(out && text, "NULL argument");
    *out = new hetwls_lightcurve{parse_light_curve_csv(text)};
  });
}

hetwls_status hetwls_lightcurve_read_csv(const char* path, hetwls_lightcurve** out) {
  return guarded([&] {
    need(out && path, "NULL argument");
    *out = new hetwls_lightcurve{read_light_curve_csv(path)};
  });
}

size_t hetwls_lightcurve_size(const hetwls_lightcurve* lc) {
  return lc ? static_cast<size_t>(lc->lc.size()) : 0;
}

void hetwls_lightcurve_free(hetwls_lightcurve* lc) { delete lc; }

hetwls_status hetwls_periodogram_run(const hetwls_lightcurve* lc, int K, const char* weighting,
                                     const double* omega, size_t grid_len, const char* gamma,
                                     hetwls_periodogram** out) {
  return guarded([&] {
    need(out && lc && weighting && omega, "NULL argument");
    PeriodogramConfig pc;
    pc.K = K;
    pc.weighting = parse_weighting(weighting);
    pc.omega_grid.assign(omega, omega + grid_len);
    if (gamma) pc.gamma = parse_gamma(gamma);
    auto pg = std::make_unique<hetwls_periodogram>();
    pg->result = periodogram(lc->lc, pc);
    pg->grid = std::move(pc.omega_grid);
    pg->K = K;
    *out = pg.release();
  });
}

double hetwls_periodogram_omega(const hetwls_periodogram* pg) { return pg ? pg->result.omega_hat : 0.0; }
double hetwls_periodogram_period(const hetwls_periodogram* pg) { return pg ? pg->result.period() : 0.0; }
size_t hetwls_periodogram_harmonics(const hetwls_periodogram* pg) {
  return pg ? static_cast<size_t>(pg->K) : 0;
}

hetwls_status hetwls_periodogram_beta(const hetwls_periodogram* pg, double* out, size_t len) {
  return guarded([&] {
    need(pg != nullptr, "NULL periodogram");
    copy_vector(pg->result.beta_hat, out, len);
  });
}

hetwls_status hetwls_periodogram_amplitudes(const hetwls_periodogram* pg, double* amplitudes,
                                            double* phases, size_t len) {
  return guarded([&] {
    need(pg != nullptr, "NULL periodogram");
    copy_vector(pg->result.amplitudes, amplitudes, len);
    copy_vector(pg->result.phases, phases, len);
  });
}

int hetwls_periodogram_delta(const hetwls_periodogram* pg, double* delta) {
  if (!pg || !pg->result.delta) return 0;
  if (delta) *delta = *pg->result.delta;
  return 1;
}

size_t hetwls_periodogram_singular_count(const hetwls_periodogram* pg) {
  return pg ? pg->result.singular_count : 0;
}

hetwls_status hetwls_periodogram_csv(const hetwls_periodogram* pg, char** out) {
  return emit(out, [&] {
    need(pg != nullptr, "NULL periodogram");
    return periodogram_csv(pg->grid, pg->result);
  });
}

void hetwls_periodogram_free(hetwls_periodogram* pg) { delete pg; }

hetwls_status hetwls_periodogram_job_from_json(const char* json, const char* base_dir,
                                               hetwls_periodogram_job** out) {
  return guarded([&] {
    need(out && json, "NULL argument");
    auto j = std::make_unique<hetwls_periodogram_job>();
    j->job = parse_periodogram_job(json, base_path(base_dir));
    for (const auto& p : j->job.curves) j->paths.push_back(p.string());
    *out = j.release();
  });
}

size_t hetwls_periodogram_job_curve_count(const hetwls_periodogram_job* j) {
  return j ? j->paths.size() : 0;
}

const char* hetwls_periodogram_job_curve_path(const hetwls_periodogram_job* j, size_t i) {
  return j && i < j->paths.size() ? j->paths[i].c_str() : nullptr;
}

hetwls_status hetwls_periodogram_job_run(const hetwls_periodogram_job* j, size_t i,
                                         hetwls_periodogram** out) {
  return guarded([&] {
    need(out && j, "NULL argument");
    need(i < j->paths.size(), "curve index out of range");
    const LightCurve lc = read_light_curve_csv(j->job.curves[i]);
    PeriodogramConfig pc;
    pc.K = j->job.K;
    pc.weighting = j->job.weighting;
    pc.gamma = j->job.gamma;
    pc.delta_iterations = j->job.delta_iterations;
    const double span = span_of(lc);
    if (!j->job.grid.step && !(span > 0.0))
      throw Error(ErrorCode::InvalidArgument, "curve has zero time span; give grid.step");
    pc.omega_grid = j->job.grid.frequencies(span);
    auto pg = std::make_unique<hetwls_periodogram>();
    pg->result = periodogram(lc, pc);
    pg->grid = std::move(pc.omega_grid);
    pg->K = pc.K;
    *out = pg.release();
  });
}

void hetwls_periodogram_job_free(hetwls_periodogram_job* j) { delete j; }

// ---- period-recovery study -------------------------------------------------

hetwls_status hetwls_score_job_from_json(const char* json, const char* base_dir,
                                         hetwls_score_job** out) {
  return guarded([&] {
    need(out && json, "NULL argument");
    *out = new hetwls_score_job{parse_score_job(json, base_path(base_dir))};
  });
}

void hetwls_score_job_set_seed(hetwls_score_job* j, uint64_t seed) {
  if (j) j->job.study.seed = seed;
}

void hetwls_score_job_set_threads(hetwls_score_job* j, unsigned threads) {
  if (j) j->job.study.threads = threads;
}

void hetwls_score_job_free(hetwls_score_job* j) { delete j; }

hetwls_status hetwls_score_run(const hetwls_score_job* j, hetwls_study** out) {
  return guarded([&] {
    need(out && j, "NULL argument");
    auto s = std::make_unique<hetwls_study>();
    std::vector<CatalogEntry> catalog;
    const ScoreJob& job = j->job;
    if (job.synthetic) {
      const std::uint64_t seed = job.synthetic->seed.value_or(job.study.seed);
      catalog = synthetic_catalog(job.synthetic->curve, job.synthetic->count, seed);
    } else {
      for (const auto& e : read_manifest_csv(*job.manifest)) {
        try {
          catalog.push_back(CatalogEntry{e.path.string(), read_light_curve_csv(e.path), e.true_period});
        } catch (const Error& err) {
          s->skipped.push_back(e.path.string() + ": " + err.what());
        }
      }
    }
    s->result = run_period_study(catalog, job.study);
    for (const auto& c : s->result.cells) s->weighting_names.push_back(weighting_name(c.weighting));
    *out = s.release();
  });
}

size_t hetwls_study_catalog_size(const hetwls_study* s) { return s ? s->result.catalog_size : 0; }
size_t hetwls_study_skipped_count(const hetwls_study* s) { return s ? s->skipped.size() : 0; }

const char* hetwls_study_skipped_message(const hetwls_study* s, size_t i) {
  return s && i < s->skipped.size() ? s->skipped[i].c_str() : nullptr;
}

size_t hetwls_study_cell_count(const hetwls_study* s) { return s ? s->result.cells.size() : 0; }

hetwls_status hetwls_study_cell(const hetwls_study* s, size_t i, int* n, int* K,
                                const char** weighting, double* fraction, size_t* count,
                                size_t* failures) {
  return guarded([&] {
    need(s != nullptr, "NULL study");
    need(i < s->result.cells.size(), "cell index out of range");
    const auto& c = s->result.cells[i];
    if (n) *n = c.n;
    if (K) *K = c.K;
    if (weighting) *weighting = s->weighting_names[i].c_str();
    if (fraction) *fraction = c.score.fraction;
    if (count) *count = c.score.count;
    if (failures) *failures = c.failures;
  });
}

hetwls_status hetwls_study_csv(const hetwls_study* s, char** out) {
  return emit(out, [&] {
    need(s != nullptr, "NULL study");
    return period_study_csv(s->result);
  });
}

void hetwls_study_free(hetwls_study* s) { delete s; }

}  // extern "C"
