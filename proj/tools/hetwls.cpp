// hetwls: batch front end over libhetwls.
//
//   hetwls fit         --config job.json --out DIR
//   hetwls simulate    --config sim.json --out DIR [--seed N] [--threads N]
//   hetwls periodogram --config pg.json  --out DIR
//   hetwls score       --config score.json --out DIR [--seed N] [--threads N]
//
// Exit codes: 0 success, 2 bad input (arguments, config, CSV, missing column,
// unreadable file), 3 singular design, 1 anything else.

#include "hetwls/hetwls.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInput = 2;
constexpr int kExitSingular = 3;

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  int verbosity = 0;
};

struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(hetwls_status s) {
  switch (s) {
    case HETWLS_OK: return kExitOk;
    case HETWLS_E_INVALID_ARGUMENT:
    case HETWLS_E_MISSING_COLUMN:
    case HETWLS_E_PARSE:
    case HETWLS_E_IO:
    case HETWLS_E_INVALID_GAMMA:
      return kExitInput;
    case HETWLS_E_SINGULAR_DESIGN: return kExitSingular;
    default: return kExitOther;
  }
}

void check(hetwls_status s, const std::string& context) {
  if (s != HETWLS_OK)
    throw Failure{exit_code_for(s), context + ": " + hetwls_last_error()};
}

class Log {
 public:
  explicit Log(int verbosity) : verbosity_(verbosity) {}
  void info(const std::string& m) const {
    if (verbosity_ >= 1) std::cerr << "hetwls: " << m << '\n';
  }
  void debug(const std::string& m) const {
    if (verbosity_ >= 2) std::cerr << "hetwls: " << m << '\n';
  }
  static void warn(const std::string& m) { std::cerr << "hetwls: warning: " << m << '\n'; }

 private:
  int verbosity_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Failure{kExitInput, "cannot read config '" + p.string() + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Owns a string allocated by the library.
std::string take(char* s) {
  std::string out(s ? s : "");
  hetwls_string_free(s);
  return out;
}

struct PendingFile {
  std::string name;
  std::string contents;
};

// Every file is staged next to its destination and renamed into place, so a
// failure never leaves a truncated output behind.
void write_outputs(const fs::path& dir, const std::vector<PendingFile>& files, const Log& log) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitInput, "cannot create output directory '" + dir.string() + "': " + ec.message()};
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto cleanup = [&] {
    for (auto& [tmp, dst] : staged) fs::remove(tmp, ec);
  };
  for (const auto& f : files) {
    fs::path dst = dir / f.name;
    fs::path tmp = dir / ("." + f.name + ".tmp");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << f.contents;
    out.close();
    staged.emplace_back(tmp, dst);
    if (!out) {
      cleanup();
      throw Failure{kExitOther, "failed writing '" + dst.string() + "'"};
    }
  }
  for (auto& [tmp, dst] : staged) {
    fs::rename(tmp, dst, ec);
    if (ec) {
      cleanup();
      throw Failure{kExitOther, "cannot rename into '" + dst.string() + "': " + ec.message()};
    }
    log.info("wrote " + dst.string());
  }
}

std::string base_dir_of(const std::string& config) {
  return fs::absolute(fs::path(config)).parent_path().string();
}

int cmd_fit(const Options& o, const Log& log) {
  const std::string json = read_file(o.config);
  const std::string base = base_dir_of(o.config);
  hetwls_fit* fit = nullptr;
  check(hetwls_fit_job_run(json.c_str(), base.c_str(), &fit), "fit");
  std::vector<PendingFile> files;
  char* s = nullptr;
  hetwls_status st = hetwls_fit_csv(fit, &s);
  if (st == HETWLS_OK) files.push_back({"fit.csv", take(s)});
  if (st == HETWLS_OK && hetwls_fit_covariance(fit, nullptr, 0)) {
    st = hetwls_fit_covariance_csv(fit, &s);
    if (st == HETWLS_OK) files.push_back({"cov.csv", take(s)});
  } else if (st == HETWLS_OK) {
    Log::warn("variance estimator 'none' requested; cov.csv not written");
  }
  double delta = 0.0;
  if (hetwls_fit_delta(fit, &delta)) log.info("delta_hat = " + std::to_string(delta));
  log.debug("n = " + std::to_string(hetwls_fit_n(fit)) + ", p = " + std::to_string(hetwls_fit_p(fit)));
  hetwls_fit_free(fit);
  check(st, "fit output");
  write_outputs(o.out, files, log);
  return kExitOk;
}

int cmd_simulate(const Options& o, const Log& log) {
  const std::string json = read_file(o.config);
  hetwls_sim_config* cfg = nullptr;
  check(hetwls_sim_config_from_json(json.c_str(), &cfg), "simulate config");
  if (o.seed) hetwls_sim_config_set_seed(cfg, *o.seed);
  if (o.threads) hetwls_sim_config_set_threads(cfg, *o.threads);
  hetwls_sim_report* rep = nullptr;
  hetwls_status st = hetwls_simulate(cfg, &rep);
  hetwls_sim_config_free(cfg);
  check(st, "simulate");

  std::vector<PendingFile> files;
  char* s = nullptr;
  const char* names[] = {"replicates.csv", "summary.csv", "ellipse.csv"};
  hetwls_status (*render[])(const hetwls_sim_report*, char**) = {
      hetwls_sim_replicates_csv, hetwls_sim_summary_csv, hetwls_sim_ellipse_csv};
  for (int k = 0; k < 3 && st == HETWLS_OK; ++k) {
    st = render[k](rep, &s);
    if (st == HETWLS_OK) files.push_back({names[k], take(s)});
  }
  for (std::size_t i = 0; i < hetwls_sim_strategy_count(rep); ++i) {
    const std::size_t failed = hetwls_sim_failures(rep, i);
    if (failed > 0)
      Log::warn(std::string(hetwls_sim_strategy_name(rep, i)) + ": " + std::to_string(failed) +
                " replicate(s) failed and were excluded");
    for (std::size_t j = 0; j < hetwls_sim_estimator_count(rep); ++j) {
      double c = 0.0;
      if (hetwls_sim_coverage(rep, i, j, &c))
        log.debug(std::string(hetwls_sim_strategy_name(rep, i)) + " " +
                  hetwls_sim_estimator_name(rep, j) + " coverage " + std::to_string(c));
    }
  }
  hetwls_sim_report_free(rep);
  check(st, "simulate output");
  write_outputs(o.out, files, log);
  return kExitOk;
}

std::string unique_stem(const std::string& path, std::set<std::string>& used) {
  std::string stem = fs::path(path).stem().string();
  if (stem.empty()) stem = "curve";
  std::string name = stem;
  for (int k = 2; !used.insert(name).second; ++k) name = stem + "_" + std::to_string(k);
  return name;
}

int cmd_periodogram(const Options& o, const Log& log) {
  const std::string json = read_file(o.config);
  const std::string base = base_dir_of(o.config);
  hetwls_periodogram_job* job = nullptr;
  check(hetwls_periodogram_job_from_json(json.c_str(), base.c_str(), &job), "periodogram config");

  std::vector<PendingFile> files;
  std::string periods = "curve,omega_hat,period,delta\n";
  std::set<std::string> used;
  std::size_t failed = 0;
  const std::size_t count = hetwls_periodogram_job_curve_count(job);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string path = hetwls_periodogram_job_curve_path(job, i);
    hetwls_periodogram* pg = nullptr;
    hetwls_status st = hetwls_periodogram_job_run(job, i, &pg);
    if (st != HETWLS_OK) {
      ++failed;
      Log::warn("skipping '" + path + "': " + hetwls_last_error());
      continue;
    }
    char* s = nullptr;
    st = hetwls_periodogram_csv(pg, &s);
    if (st != HETWLS_OK) {
      hetwls_periodogram_free(pg);
      hetwls_periodogram_job_free(job);
      check(st, "periodogram output");
    }
    const std::string stem = unique_stem(path, used);
    files.push_back({"periodogram_" + stem + ".csv", take(s)});
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", hetwls_periodogram_omega(pg),
                  hetwls_periodogram_period(pg));
    periods += stem + buf;
    double delta = 0.0;
    if (hetwls_periodogram_delta(pg, &delta)) {
      std::snprintf(buf, sizeof buf, "%.17g", delta);
      periods += buf;
    }
    periods += '\n';
    log.info(path + ": period " + std::to_string(hetwls_periodogram_period(pg)));
    hetwls_periodogram_free(pg);
  }
  hetwls_periodogram_job_free(job);
  if (failed > 0) Log::warn(std::to_string(failed) + " of " + std::to_string(count) + " curve(s) skipped");
  files.push_back({"periods.csv", periods});
  write_outputs(o.out, files, log);
  return kExitOk;
}

int cmd_score(const Options& o, const Log& log) {
  const std::string json = read_file(o.config);
  const std::string base = base_dir_of(o.config);
  hetwls_score_job* job = nullptr;
  check(hetwls_score_job_from_json(json.c_str(), base.c_str(), &job), "score config");
  if (o.seed) hetwls_score_job_set_seed(job, *o.seed);
  if (o.threads) hetwls_score_job_set_threads(job, *o.threads);
  hetwls_study* study = nullptr;
  hetwls_status st = hetwls_score_run(job, &study);
  hetwls_score_job_free(job);
  check(st, "score");

  for (std::size_t i = 0; i < hetwls_study_skipped_count(study); ++i)
    Log::warn(std::string("skipped ") + hetwls_study_skipped_message(study, i));
  if (hetwls_study_catalog_size(study) == 0) Log::warn("catalog is empty; results have no rows");
  for (std::size_t i = 0; i < hetwls_study_cell_count(study); ++i) {
    int n = 0, K = 0;
    const char* w = nullptr;
    double frac = 0.0;
    std::size_t cnt = 0, fail = 0;
    if (hetwls_study_cell(study, i, &n, &K, &w, &frac, &cnt, &fail) != HETWLS_OK) continue;
    if (fail > 0 && hetwls_study_catalog_size(study) > 0)
      Log::warn("n=" + std::to_string(n) + " K=" + std::to_string(K) + " " + w + ": " +
                std::to_string(fail) + " curve(s) skipped");
    log.debug("n=" + std::to_string(n) + " K=" + std::to_string(K) + " " + w + ": " +
              std::to_string(frac) + " of " + std::to_string(cnt));
  }
  char* s = nullptr;
  st = hetwls_study_csv(study, &s);
  hetwls_study_free(study);
  check(st, "score output");
  write_outputs(o.out, {{"results.csv", take(s)}}, log);
  return kExitOk;
}

std::optional<unsigned> threads_from_env() {
  const char* v = std::getenv("HETWLS_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  unsigned long t = std::strtoul(v, &end, 10);
  if (*end != '\0' || t > 4096) throw Failure{kExitInput, "HETWLS_THREADS must be a nonnegative integer"};
  return static_cast<unsigned>(t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted least squares under misspecification: fitting, Monte Carlo, periodograms"};
  app.set_version_flag("--version", std::string(hetwls_version()));
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto add_common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("--config", opt.config, "JSON job file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (created if missing)");
    if (seeded) {
      sub->add_option("--seed", seed, "override the config seed");
      sub->add_option("--threads", threads, "worker cap, 0 = all cores (env HETWLS_THREADS)");
    }
    sub->add_flag("-v,--verbose", "more output on stderr (-vv for detail)");
  };
  CLI::App* fit = app.add_subcommand("fit", "fit one dataset");
  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo coverage study");
  CLI::App* pg = app.add_subcommand("periodogram", "periodograms of light curves");
  CLI::App* score = app.add_subcommand("score", "period-recovery study over a catalog");
  add_common(fit, false);
  add_common(sim, true);
  add_common(pg, false);
  add_common(score, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    for (auto* sub : {fit, sim, pg, score})
      if (sub->parsed()) opt.verbosity = static_cast<int>(std::min<std::size_t>(sub->count("-v"), 2));
    for (auto* sub : {sim, score}) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) opt.seed = seed;
      if (sub->count("--threads"))
        opt.threads = threads;
      else
        opt.threads = threads_from_env();
    }
    const Log log(opt.verbosity);
    if (fit->parsed()) return cmd_fit(opt, log);
    if (sim->parsed()) return cmd_simulate(opt, log);
    if (pg->parsed()) return cmd_periodogram(opt, log);
    return cmd_score(opt, log);
  } catch (const Failure& f) {
    std::cerr << "hetwls: error: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "hetwls: error: " << e.what() << '\n';
    return kExitOther;
  }
}
