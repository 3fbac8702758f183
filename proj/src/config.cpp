#include "hetwls/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>

namespace hetwls {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
}

// Object view that rejects keys outside an allow-list.
class Obj {
 public:
  Obj(const json& j, std::string where, std::initializer_list<const char*> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(where_ + ": expected an object");
    for (const auto& [key, value] : j_.items()) {
      bool ok = std::any_of(allowed.begin(), allowed.end(),
                            [&](const char* a) { return key == a; });
      if (!ok) fail(where_ + ": unknown key '" + key + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const {
    if (!has(key)) fail(where_ + ": missing key '" + std::string(key) + "'");
    return j_.at(key);
  }
  std::string path(const char* key) const { return where_ + "." + key; }

  double real(const char* key, double fallback) const {
    return has(key) ? as_real(at(key), path(key)) : fallback;
  }
  double real(const char* key) const { return as_real(at(key), path(key)); }
  long long integer(const char* key, long long fallback) const {
    return has(key) ? as_integer(at(key), path(key)) : fallback;
  }
  std::string string(const char* key, std::string fallback) const {
    return has(key) ? as_string(at(key), path(key)) : fallback;
  }
  std::string string(const char* key) const { return as_string(at(key), path(key)); }
  std::vector<double> reals(const char* key) const {
    const json& a = at(key);
    if (!a.is_array()) fail(path(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(as_real(a[i], path(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::vector<int> ints(const char* key) const {
    const json& a = at(key);
    if (!a.is_array()) fail(path(key) + ": expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(static_cast<int>(as_integer(a[i], path(key) + "[" + std::to_string(i) + "]")));
    return out;
  }

  static double as_real(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where + ": expected a number");
    return v.get<double>();
  }
  static long long as_integer(const json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    fail(where + ": expected an integer");
  }
  static std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where + ": expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string where_;
};

std::uint64_t seed_value(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  long long s = Obj::as_integer(v, where);
  if (s < 0) fail(where + ": seed must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

int positive_int(const Obj& o, const char* key, int fallback) {
  long long v = o.integer(key, fallback);
  if (v < 1 || v > 1'000'000'000) fail(o.path(key) + ": must be a positive integer");
  return static_cast<int>(v);
}

template <class F>
auto rethrow_as_parse(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) fail(where + ": " + e.what());
    throw;
  }
}

WeightStrategy strategy_from_json(const json& v, const std::string& where) {
  if (v.is_string()) return rethrow_as_parse(where, [&] { return parse_strategy(v.get<std::string>()); });
  Obj o(v, where, {"name", "iterations", "delta"});
  std::string name = o.string("name");
  WeightStrategy s = rethrow_as_parse(where, [&] { return parse_strategy(name); });
  if (auto* a = std::get_if<strategy::AdaptiveKnown>(&s)) {
    a->iterations = positive_int(o, "iterations", a->iterations);
  } else if (auto* g = std::get_if<strategy::AdaptiveGrouped>(&s)) {
    g->iterations = positive_int(o, "iterations", g->iterations);
  } else if (o.has("iterations")) {
    fail(o.path("iterations") + ": only adaptive strategies iterate");
  }
  if (auto* d = std::get_if<strategy::FixedDelta>(&s)) {
    d->delta = o.real("delta");
    if (!(d->delta >= 0.0) || !std::isfinite(d->delta)) fail(o.path("delta") + ": must be >= 0");
  } else if (o.has("delta")) {
    fail(o.path("delta") + ": only fixed_delta takes a delta");
  }
  return s;
}

GammaFunctional gamma_from(const Obj& o) {
  if (!o.has("gamma")) return GammaFunctional::trace();
  std::string g = o.string("gamma");
  return rethrow_as_parse(o.path("gamma"), [&] { return parse_gamma(g); });
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

GridSpec grid_from(const Obj& parent) {
  GridSpec g;
  if (!parent.has("grid")) return g;
  Obj o(parent.at("grid"), parent.path("grid"), {"min_period", "max_period", "oversample", "step"});
  g.min_period = o.real("min_period", g.min_period);
  g.max_period = o.real("max_period", g.max_period);
  g.oversample = o.real("oversample", g.oversample);
  if (o.has("step")) g.step = o.real("step");
  if (!(g.min_period > 0.0) || !(g.max_period > g.min_period))
    fail(o.path("max_period") + ": need 0 < min_period < max_period");
  if (!(g.oversample > 0.0)) fail(o.path("oversample") + ": must be positive");
  if (g.step && !(*g.step > 0.0)) fail(o.path("step") + ": must be positive");
  return g;
}

}  // namespace

WeightStrategy parse_strategy(std::string_view name) {
  if (name == "ols" || name == "identity") return strategy::Identity{};
  if (name == "wls" || name == "inverse_variance") return strategy::InverseVariance{};
  if (name == "adaptive_known" || name == "adaptive") return strategy::AdaptiveKnown{};
  if (name == "adaptive_grouped" || name == "grouped") return strategy::AdaptiveGrouped{};
  if (name == "fixed_delta") return strategy::FixedDelta{};
  throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

GammaFunctional parse_gamma(std::string_view name) {
  if (name == "trace") return GammaFunctional::trace();
  if (name.size() > 1 && name[0] == 'x' &&
      std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    long j = std::stol(std::string(name.substr(1)));
    if (j >= 1) return GammaFunctional::coordinate(j - 1);
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown gamma '" + std::string(name) + "' (expected 'trace' or 'x<j>')");
}

CoverageEstimator parse_coverage_estimator(std::string_view name) {
  if (name == "nu1" || name == "plug_in") return CoverageEstimator::PlugIn;
  if (name == "nu2" || name == "sandwich") return CoverageEstimator::Sandwich;
  if (name == "nu_or" || name == "oracle") return CoverageEstimator::Oracle;
  throw Error(ErrorCode::InvalidArgument, "unknown variance estimator '" + std::string(name) + "'");
}

VarianceEstimator parse_variance_estimator(std::string_view name) {
  if (name == "sandwich" || name == "nu2") return VarianceEstimator::Sandwich;
  if (name == "plug_in" || name == "nu1") return VarianceEstimator::PlugIn;
  if (name == "none") return VarianceEstimator::None;
  throw Error(ErrorCode::InvalidArgument, "unknown variance estimator '" + std::string(name) + "'");
}

std::vector<double> GridSpec::frequencies(double time_span) const {
  if (step) {
    const double two_pi = 2.0 * std::numbers::pi;
    return uniform_grid(two_pi / max_period, two_pi / min_period, *step);
  }
  return default_frequency_grid(time_span, min_period, max_period, oversample);
}

FitJob parse_fit_job(std::string_view text, const std::filesystem::path& base_dir) {
  json j = parse_json(text);
  Obj o(j, "fit", {"data", "strategy", "gamma", "variance"});
  FitJob job;
  job.data = resolve(base_dir, o.string("data"));
  job.strategy = strategy_from_json(o.at("strategy"), o.path("strategy"));
  job.gamma = gamma_from(o);
  if (o.has("variance")) {
    std::string v = o.string("variance");
    job.variance = rethrow_as_parse(o.path("variance"), [&] { return parse_variance_estimator(v); });
  }
  return job;
}

SimulateJob parse_simulate_job(std::string_view text) {
  json j = parse_json(text);
  Obj o(j, "simulate", {"regression", "sigma_law", "n", "replicates", "seed", "strategies",
                        "estimators", "gamma", "level", "threads"});
  SimulateJob job;
  DgpConfig& d = job.dgp;

  if (o.has("regression")) {
    const json& r = o.at("regression");
    const std::string where = o.path("regression");
    if (r.is_string()) {
      if (r.get<std::string>() != "quadratic") fail(where + ": unknown regression function");
      d.regression_fn = dgp::Quadratic{};
    } else {
      Obj ro(r, where, {"quadratic", "linear", "table"});
      if (ro.has("linear")) {
        Obj lo(ro.at("linear"), ro.path("linear"), {"intercept", "slope"});
        d.regression_fn = dgp::Linear{lo.real("intercept", 0.0), lo.real("slope", 1.0)};
      } else if (ro.has("table")) {
        Obj to(ro.at("table"), ro.path("table"), {"x", "f"});
        d.regression_fn = dgp::CustomTable{to.reals("x"), to.reals("f")};
      } else if (ro.has("quadratic")) {
        d.regression_fn = dgp::Quadratic{};
      } else {
        fail(where + ": expected one of quadratic, linear, table");
      }
    }
  }

  if (o.has("sigma_law")) {
    Obj so(o.at("sigma_law"), o.path("sigma_law"), {"discrete", "step"});
    if (so.has("discrete") == so.has("step")) fail(o.path("sigma_law") + ": give exactly one of discrete, step");
    if (so.has("discrete")) {
      Obj dd(so.at("discrete"), so.path("discrete"), {"values", "probs"});
      d.sigma_law = dgp::DiscreteSigma{dd.reals("values"), dd.reals("probs")};
    } else {
      Obj st(so.at("step"), so.path("step"), {"thresholds", "values"});
      d.sigma_law = dgp::StepSigma{st.reals("thresholds"), st.reals("values")};
    }
  }

  d.n = positive_int(o, "n", d.n);
  d.replicates = positive_int(o, "replicates", d.replicates);
  if (o.has("seed")) d.seed = seed_value(o.at("seed"), o.path("seed"));
  rethrow_as_parse("simulate", [&] { d.validate(); return 0; });

  SimOptions& opt = job.options;
  if (o.has("strategies")) {
    const json& a = o.at("strategies");
    if (!a.is_array() || a.empty()) fail(o.path("strategies") + ": expected a nonempty array");
    for (std::size_t i = 0; i < a.size(); ++i)
      opt.strategies.push_back(strategy_from_json(a[i], o.path("strategies") + "[" + std::to_string(i) + "]"));
  } else {
    opt.strategies = {strategy::InverseVariance{}, strategy::Identity{}, strategy::AdaptiveKnown{}};
    if (sigma_independent_of_x(d)) opt.strategies.push_back(strategy::AdaptiveGrouped{});
  }
  for (const auto& s : opt.strategies) {
    if (std::holds_alternative<strategy::AdaptiveGrouped>(s) && !sigma_independent_of_x(d))
      fail(o.path("strategies") + ": adaptive_grouped needs a discrete sigma_law");
  }
  if (o.has("estimators")) {
    const json& a = o.at("estimators");
    if (!a.is_array() || a.empty()) fail(o.path("estimators") + ": expected a nonempty array");
    opt.estimators.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string where = o.path("estimators") + "[" + std::to_string(i) + "]";
      std::string name = Obj::as_string(a[i], where);
      opt.estimators.push_back(rethrow_as_parse(where, [&] { return parse_coverage_estimator(name); }));
    }
  }
  opt.gamma = gamma_from(o);
  opt.level = o.real("level", opt.level);
  if (!(opt.level > 0.0 && opt.level < 1.0)) fail(o.path("level") + ": must lie in (0, 1)");
  long long threads = o.integer("threads", 1);
  if (threads < 0) fail(o.path("threads") + ": must be >= 0");
  opt.threads = static_cast<unsigned>(threads);
  return job;
}

PeriodogramJob parse_periodogram_job(std::string_view text, const std::filesystem::path& base_dir) {
  json j = parse_json(text);
  Obj o(j, "periodogram", {"curves", "K", "weighting", "grid", "gamma", "delta_iterations"});
  PeriodogramJob job;
  const json& curves = o.at("curves");
  if (!curves.is_array()) fail(o.path("curves") + ": expected an array of paths");
  for (std::size_t i = 0; i < curves.size(); ++i)
    job.curves.push_back(
        resolve(base_dir, Obj::as_string(curves[i], o.path("curves") + "[" + std::to_string(i) + "]")));
  job.K = positive_int(o, "K", job.K);
  if (o.has("weighting")) {
    std::string w = o.string("weighting");
    job.weighting = rethrow_as_parse(o.path("weighting"), [&] { return parse_weighting(w); });
  }
  job.grid = grid_from(o);
  job.gamma = gamma_from(o);
  job.delta_iterations = positive_int(o, "delta_iterations", job.delta_iterations);
  return job;
}

ScoreJob parse_score_job(std::string_view text, const std::filesystem::path& base_dir) {
  json j = parse_json(text);
  Obj o(j, "score", {"manifest", "synthetic", "n_values", "K_values", "weightings", "grid",
                     "tolerance", "gamma", "seed", "threads"});
  ScoreJob job;
  if (o.has("manifest") == o.has("synthetic")) fail("score: give exactly one of manifest, synthetic");
  if (o.has("manifest")) job.manifest = resolve(base_dir, o.string("manifest"));
  if (o.has("synthetic")) {
    Obj s(o.at("synthetic"), o.path("synthetic"),
          {"shape", "count", "n", "min_period", "max_period", "amplitude", "mean_magnitude",
           "time_span", "rise_fraction", "sigma_law", "seed"});
    SyntheticCatalogSpec spec;
    SyntheticCurveSpec& c = spec.curve;
    std::string shape = s.string("shape", "sawtooth");
    if (shape == "sawtooth")
      c.shape = CurveShape::Sawtooth;
    else if (shape == "sinusoid")
      c.shape = CurveShape::Sinusoid;
    else
      fail(s.path("shape") + ": expected sawtooth or sinusoid");
    spec.count = static_cast<std::size_t>(s.integer("count", 100));
    if (s.integer("count", 100) < 0) fail(s.path("count") + ": must be >= 0");
    c.n = positive_int(s, "n", c.n);
    c.min_period = s.real("min_period", c.min_period);
    c.max_period = s.real("max_period", c.max_period);
    c.amplitude = s.real("amplitude", c.amplitude);
    c.mean_magnitude = s.real("mean_magnitude", c.mean_magnitude);
    c.time_span = s.real("time_span", c.time_span);
    c.rise_fraction = s.real("rise_fraction", c.rise_fraction);
    if (s.has("sigma_law")) {
      Obj sl(s.at("sigma_law"), s.path("sigma_law"), {"values", "probs"});
      c.sigma_law = dgp::DiscreteSigma{sl.reals("values"), sl.reals("probs")};
    }
    if (s.has("seed")) spec.seed = seed_value(s.at("seed"), s.path("seed"));
    job.synthetic = std::move(spec);
  }

  PeriodStudyConfig& st = job.study;
  if (o.has("n_values")) st.n_values = o.ints("n_values");
  if (o.has("K_values")) st.K_values = o.ints("K_values");
  if (st.n_values.empty() || st.K_values.empty()) fail("score: n_values and K_values must be nonempty");
  for (int n : st.n_values)
    if (n < 1) fail(o.path("n_values") + ": entries must be positive");
  for (int K : st.K_values)
    if (K < 1) fail(o.path("K_values") + ": entries must be positive");
  if (o.has("weightings")) {
    const json& a = o.at("weightings");
    if (!a.is_array() || a.empty()) fail(o.path("weightings") + ": expected a nonempty array");
    st.weightings.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string where = o.path("weightings") + "[" + std::to_string(i) + "]";
      std::string name = Obj::as_string(a[i], where);
      st.weightings.push_back(rethrow_as_parse(where, [&] { return parse_weighting(name); }));
    }
  }
  GridSpec g = grid_from(o);
  st.min_period = g.min_period;
  st.max_period = g.max_period;
  st.oversample = g.oversample;
  st.omega_step = g.step;
  st.tolerance = o.real("tolerance", st.tolerance);
  if (!(st.tolerance > 0.0)) fail(o.path("tolerance") + ": must be positive");
  st.gamma = gamma_from(o);
  if (o.has("seed")) st.seed = seed_value(o.at("seed"), o.path("seed"));
  long long threads = o.integer("threads", 1);
  if (threads < 0) fail(o.path("threads") + ": must be >= 0");
  st.threads = static_cast<unsigned>(threads);
  return job;
}

}  // namespace hetwls
