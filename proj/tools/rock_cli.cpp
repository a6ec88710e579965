// rock: command-line front end.
//
// Exit codes: 0 ok, 2 configuration error, 3 backend error, 4 data error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rock/rock.hpp"

namespace fs = std::filesystem;
using namespace rock;

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!normalize_text(item).empty()) out.push_back(normalize_text(item));
  return out;
}

struct BackendFlags {
  std::string backend_url = env_or("ROCK_BACKEND_URL", "http://127.0.0.1:8750");
  std::string cache_dir = env_or("ROCK_CACHE_DIR", "");
  std::string backend_id;
  std::string stub_file;
  std::optional<std::uint64_t> seed;
  std::size_t concurrency = 8;
  int retries = 3;
};

struct EstimatorFlags {
  std::string kind = "l2";
  std::optional<int> p;
  double epsilon = 0.05;
  std::string norms = "none";
  std::size_t n_covariates = 100;
  std::string role_convention = "premise-as-cause";
  std::string q_form = "reciprocal";
  std::string orientation = "after-forward";
  int top_k = 5;
  std::string codes;
  int n_per_code = 3;
  std::size_t samples = 100;
  std::size_t workers = 0;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& b) {
  cmd->add_option("--seed", b.seed, "Seed for sampling requests and generators (default: unseeded requests, generator seed 0)");
  cmd->add_option("--backend-url", b.backend_url, "Protocol backend base URL (env ROCK_BACKEND_URL)");
  cmd->add_option("--cache-dir", b.cache_dir, "Persistent response cache directory (env ROCK_CACHE_DIR)");
  cmd->add_option("--backend-id", b.backend_id, "Backend id for cache keys; skips the /v1/info lookup");
  cmd->add_option("--stub", b.stub_file, "Serve this stub universe (or suite file) in-process and use it");
  cmd->add_option("--concurrency", b.concurrency, "Requests in flight (default 8)");
  cmd->add_option("--retries", b.retries, "Retries per request after the first attempt (default 3)");
}

void add_estimator_flags(CLI::App* cmd, EstimatorFlags& e) {
  cmd->add_option("--kind", e.kind, "l1, l2, balanced (norm from --p), temporal, unbalanced, misspecified");
  cmd->add_option("--p", e.p, "Matching norm for balanced kinds")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--epsilon", e.epsilon, "Matching radius (default 0.05)");
  cmd->add_option("--norms", e.norms, "Normalization subset over D,F,S,Q,C,E (default none)");
  cmd->add_option("--n-covariates", e.n_covariates, "Covariates used, by sampling-order prefix (default 100)");
  cmd->add_option("--role-convention", e.role_convention, "premise-as-cause or choice-as-cause");
  cmd->add_option("--q-form", e.q_form, "reciprocal or conditional");
  cmd->add_option("--orientation", e.orientation, "after-forward or before-forward");
  cmd->add_option("--top-k", e.top_k, "mask_fill top_k (default 5)");
  cmd->add_option("--codes", e.codes, "Comma-separated control codes (default all eight)");
  cmd->add_option("--n-per-code", e.n_per_code, "Perturbations per control code (default 3)");
  cmd->add_option("--samples", e.samples, "Covariate generations requested (default 100)");
  cmd->add_option("--workers", e.workers, "Scoring threads (default: hardware concurrency)");
}

EstimatorConfig estimator_config(const EstimatorFlags& f) {
  EstimatorConfig cfg;
  if (f.kind == "balanced") {
    cfg.kind = f.p.value_or(2) == 1 ? EstimatorKind::BalancedL1 : EstimatorKind::BalancedL2;
  } else {
    cfg.kind = parse_estimator_kind(f.kind);
    if (f.p && is_balanced(cfg.kind) && (*f.p == 1) != (cfg.kind == EstimatorKind::BalancedL1))
      throw ConfigError("--p " + std::to_string(*f.p) + " contradicts --kind " + f.kind);
  }
  cfg.match.epsilon = f.epsilon;
  cfg.match.q_form = parse_q_form(f.q_form);
  cfg.score_flags.orientation = parse_orientation(f.orientation);
  cfg.n_covariates = f.n_covariates;
  cfg = cfg.with_combo(NormalizationCombo::parse(f.norms));
  validate(cfg);
  return cfg;
}

PipelineOptions pipeline_options(const EstimatorFlags& f, const BackendFlags& b) {
  PipelineOptions o;
  o.sampler.n = f.samples;
  if (b.seed) o.sampler.seed = static_cast<std::int64_t>(*b.seed);
  if (!f.codes.empty()) {
    o.codes.clear();
    for (const auto& c : split_list(f.codes)) {
      auto code = try_parse_control_code(c);
      if (!code) throw ConfigError("unknown control code '" + c + "'");
      o.codes.push_back(*code);
    }
    if (o.codes.empty()) throw ConfigError("--codes lists no control code");
  }
  if (f.n_per_code < 1) throw ConfigError("--n-per-code must be >= 1");
  if (f.top_k < 1) throw ConfigError("--top-k must be >= 1");
  if (f.samples < 1) throw ConfigError("--samples must be >= 1");
  o.n_per_code = f.n_per_code;
  o.top_k = f.top_k;
  o.convention = parse_role_convention(f.role_convention);
  return o;
}

/// Backend, cache and client for one command, with an optional in-process
/// stub server behind them.
class Session {
 public:
  explicit Session(const BackendFlags& flags) {
    std::string url = flags.backend_url;
    std::string id = flags.backend_id;
    if (!flags.stub_file.empty()) {
      stub_ = std::make_unique<StubBackend>(StubUniverse::load(flags.stub_file));
      server_ = std::make_unique<StubServer>(*stub_);
      url = server_->url();
      if (id.empty()) id = stub_->backend_id();
    }
    ClientOptions co;
    co.base_url = url;
    co.max_concurrency = flags.concurrency;
    co.max_retries = flags.retries;
    if (id.empty()) id = BackendClient(co).info().backend_id;
    cache_ = flags.cache_dir.empty() ? std::make_unique<ResponseCache>(id)
                                     : std::make_unique<ResponseCache>(fs::path(flags.cache_dir), id);
    client_ = std::make_unique<BackendClient>(co, cache_.get());
  }

  BackendClient& client() { return *client_; }
  ResponseCache& cache() { return *cache_; }

 private:
  std::unique_ptr<StubBackend> stub_;
  std::unique_ptr<StubServer> server_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<BackendClient> client_;
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path);
}

std::string shortest(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ---- commands --------------------------------------------------------------

int cmd_score(const std::string& e1_text, const std::string& e2_text, const EstimatorFlags& ef,
              const BackendFlags& bf, bool explain, bool as_json, const std::string& out) {
  std::ostringstream s;
  const EstimatorConfig cfg = estimator_config(ef);
  const PipelineOptions opts = pipeline_options(ef, bf);
  const CausalQuery query{Event(e1_text), Event(e2_text)};
  Session session(bf);
  ScoringPipeline<BackendClient> pipeline(session.client(), opts);
  pipeline.prepare(std::vector<CausalQuery>{query});
  const DeltaExplanation ex = pipeline.explain(query, cfg);
  const ScoreResult& r = ex.result;

  if (as_json) {
    json j{{"value", r.value},
           {"matched", r.matched_count},
           {"candidates", r.candidate_count},
           {"fallback", r.fallback_used},
           {"f_e1_e2", ex.f_e1_e2},
           {"config", config_to_json(cfg)}};
    if (explain) {
      json rows = json::array();
      for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
        json row{{"event", ex.candidates[i].text()}, {"f_to_e2", ex.f_candidate_e2[i]}, {"kept", static_cast<bool>(ex.kept[i])}};
        if (i < ex.distances.size()) row["distance"] = ex.distances[i];
        rows.push_back(row);
      }
      json covs = json::array();
      for (const auto& x : ex.covariates) covs.push_back(x.text());
      j["covariates"] = covs;
      j["interventions"] = rows;
    }
    s << j.dump(2) << '\n';
    write_text(out, s.str());
    return 0;
  }

  s << "score " << shortest(r.value) << "  (" << to_string(cfg.kind) << ", matched " << r.matched_count << " of "
    << r.candidate_count << (r.fallback_used ? ", fallback" : "") << ")\n";
  if (explain) {
    s << "\nf(E1, E2) = " << fixed(ex.f_e1_e2, 4) << "\n\ncovariates (" << ex.covariates.size() << ")\n";
    for (std::size_t i = 0; i < ex.covariates.size(); ++i) s << "  X" << i + 1 << "  " << ex.covariates[i].text() << '\n';
    s << "\n  #    distance   kept  Pr(.<E2)  intervention\n";
    for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
      char line[96];
      const std::string dist = i < ex.distances.size() ? fixed(ex.distances[i], 6) : std::string("      -");
      std::snprintf(line, sizeof line, "  %-4zu %-10s %-5s %-9s ", i + 1, dist.c_str(), ex.kept[i] ? "yes" : "no",
                    fixed(ex.f_candidate_e2[i], 4).c_str());
      s << line << ex.candidates[i].text() << '\n';
    }
  }
  write_text(out, s.str());
  return 0;
}

int cmd_evaluate(const std::string& data, const EstimatorFlags& ef, const BackendFlags& bf, const std::string& out,
                 const std::string& csv, const std::string& manifest) {
  const EstimatorConfig cfg = estimator_config(ef);
  const PipelineOptions opts = pipeline_options(ef, bf);
  const Dataset dataset = load_dataset(data);
  const auto t0 = std::chrono::steady_clock::now();
  Session session(bf);
  Evaluator<BackendClient> ev(session.client(), dataset, opts, ef.workers);
  const EvalReport r = ev.evaluate(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out.empty()) write_text(out, r.serialize());
  if (!csv.empty()) {
    std::ostringstream s;
    write_instances_csv(s, r);
    write_text(csv, s.str());
  }
  if (!manifest.empty()) write_text(manifest, run_manifest(r, "evaluate", secs).dump(2) + "\n");
  std::cout << r.dataset << "  " << to_string(cfg.kind) << "  accuracy " << fixed(r.accuracy) << "  (" << r.correct << "/"
            << r.n << ", random 0.5+-" << fixed(r.random_baseline_std) << ")  fingerprint " << r.config_fingerprint << '\n';
  std::cerr << "network requests " << session.client().network_requests() << ", cache hits "
            << session.client().cache_hits() << '\n';
  return 0;
}

int cmd_sweep(const std::string& data, const EstimatorFlags& ef, const BackendFlags& bf, const std::string& axis_name,
              const std::string& grid_text, bool all_combos, const std::string& out) {
  const EstimatorConfig cfg = estimator_config(ef);
  const PipelineOptions opts = pipeline_options(ef, bf);
  SweepAxis axis;
  if (axis_name == "epsilon") axis = SweepAxis::Epsilon;
  else if (axis_name == "n-covariates") axis = SweepAxis::CovariateCount;
  else throw ConfigError("unknown sweep axis '" + axis_name + "' (epsilon or n-covariates)");

  std::vector<double> grid;
  if (grid_text.empty()) {
    if (axis != SweepAxis::Epsilon) throw ConfigError("--grid is required for an n-covariates sweep");
    grid = default_epsilon_grid();
  } else {
    for (const auto& g : split_list(grid_text)) {
      try {
        grid.push_back(std::stod(g));
      } catch (const std::exception&) {
        throw ConfigError("bad grid value '" + g + "'");
      }
    }
  }
  if (all_combos && axis != SweepAxis::Epsilon) throw ConfigError("--all-combos applies to epsilon sweeps only");

  const Dataset dataset = load_dataset(data);
  Session session(bf);
  Evaluator<BackendClient> ev(session.client(), dataset, opts, ef.workers);
  std::ostringstream s;
  if (all_combos) {
    write_combo_sweep_csv(s, ev.sweep_combos(cfg, grid));
  } else {
    write_sweep_csv(s, axis, ev.sweep(cfg, axis, grid));
  }
  write_text(out, s.str());
  return 0;
}

int cmd_ablate(const std::string& data, const EstimatorFlags& ef, const BackendFlags& bf, const std::string& kinds_text,
               const std::string& out) {
  EstimatorFlags base_flags = ef;
  base_flags.norms = "none";
  const EstimatorConfig cfg = estimator_config(base_flags);
  const PipelineOptions opts = pipeline_options(ef, bf);
  std::vector<EstimatorKind> kinds;
  for (const auto& k : split_list(kinds_text)) kinds.push_back(parse_estimator_kind(k));
  if (kinds.empty()) throw ConfigError("--kinds lists no estimator kind");

  const Dataset dataset = load_dataset(data);
  Session session(bf);
  Evaluator<BackendClient> ev(session.client(), dataset, opts, ef.workers);
  std::ostringstream s;
  write_ablation_csv(s, ev.ablate(cfg, kinds));
  write_text(out, s.str());
  return 0;
}

int cmd_verify(std::size_t worlds, std::uint64_t seed, const std::string& q_form, std::size_t max_covariates,
               const std::string& out) {
  std::ostringstream s;
  const QForm form = parse_q_form(q_form);
  if (max_covariates < 1 || max_covariates > 12) throw ConfigError("--max-covariates must be in [1, 12]");
  std::size_t holds = 0;
  double worst_gap = 1.0;
  for (std::size_t i = 0; i < worlds; ++i) {
    const SyntheticWorld w = random_world(hash_combine(seed, i), max_covariates);
    const PropositionReport r = verify_proposition(w, form);
    if (r.holds) ++holds;
    else std::cerr << "world " << i << ": lhs " << r.lhs << " exceeds bound " << r.bound << '\n';
    worst_gap = std::min(worst_gap, r.bound - r.lhs);
  }
  s << holds << "/" << worlds << " hold  (smallest bound - lhs " << shortest(worst_gap) << ")\n";
  write_text(out, s.str());
  return holds == worlds ? 0 : static_cast<int>(ErrorClass::Data);
}

int cmd_make_suite(const SuiteSpec& spec, std::uint64_t seed, const std::string& out) {
  const ConfoundedSuite suite = confounded_pair_suite(spec, seed);
  write_text(out, suite.to_json().dump() + "\n");
  std::cerr << "suite " << suite.dataset.name() << ": " << suite.dataset.size() << " instances;";
  for (std::size_t k = 0; k < suite.certificate.kinds.size(); ++k)
    std::cerr << ' ' << suite.certificate.kinds[k] << '=' << fixed(suite.certificate.accuracy[k]);
  std::cerr << '\n';
  return 0;
}

int cmd_cache(const std::string& action, const BackendFlags& bf, const std::string& out) {
  std::ostringstream text;
  if (bf.cache_dir.empty()) throw ConfigError("cache commands need --cache-dir (or ROCK_CACHE_DIR)");
  std::vector<std::string> ids;
  if (!bf.backend_id.empty()) {
    ids.push_back(bf.backend_id);
  } else {
    if (!fs::exists(bf.cache_dir)) throw DataError("no cache directory at " + bf.cache_dir);
    for (const auto& entry : fs::directory_iterator(bf.cache_dir))
      if (entry.path().extension() == ".rkc") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
  }
  for (const auto& id : ids) {
    ResponseCache cache(fs::path(bf.cache_dir), id);
    if (action == "compact") cache.compact();
    const CacheStats s = cache.stats();
    text << ResponseCache::file_name(id) << "  entries " << s.entries << "  records " << s.records << "  bytes "
         << s.file_bytes << '\n';
  }
  write_text(out, text.str());
  return 0;
}

int cmd_serve_stub(const BackendFlags& bf, int port, const std::string& out) {
  if (bf.stub_file.empty()) throw ConfigError("serve-stub needs --stub FILE");
  StubBackend backend(StubUniverse::load(bf.stub_file));
  StubServer server(backend, port);
  // With --out the URL goes to a file, so scripts can pass --port 0.
  if (!out.empty()) write_text(out, server.url() + "\n");
  std::cout << "serving " << backend.backend_id() << " at " << server.url() << std::endl;
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rock: causal scoring of event pairs by temporal propensity matching"};
  app.require_subcommand(1);

  BackendFlags bf;
  EstimatorFlags ef;
  std::string out;

  auto* score = app.add_subcommand("score", "Score one (E1, E2) pair");
  std::string e1, e2;
  bool explain = false, as_json = false;
  score->add_option("e1", e1, "Treatment event text")->required();
  score->add_option("e2", e2, "Outcome event text")->required();
  score->add_flag("--explain", explain, "Print covariates and the per-intervention distance table");
  score->add_flag("--json", as_json, "Print JSON");
  score->add_option("--out", out, "Output path (default stdout)");
  add_backend_flags(score, bf);
  add_estimator_flags(score, ef);

  std::string data, csv, manifest;
  auto* evaluate = app.add_subcommand("evaluate", "Accuracy on a dataset (.xml COPA, .tsv GLUCOSE-D1, .json)");
  evaluate->add_option("--data", data, "Dataset file")->required();
  evaluate->add_option("--out", out, "Report JSON path");
  evaluate->add_option("--csv", csv, "Per-instance CSV path");
  evaluate->add_option("--manifest", manifest, "Run manifest JSON path");
  add_backend_flags(evaluate, bf);
  add_estimator_flags(evaluate, ef);

  std::string axis = "epsilon", grid;
  bool all_combos = false;
  auto* sweep = app.add_subcommand("sweep", "Accuracy along epsilon or covariate count");
  sweep->add_option("--data", data, "Dataset file")->required();
  sweep->add_option("--axis", axis, "epsilon or n-covariates");
  sweep->add_option("--grid", grid, "Comma-separated, strictly increasing (default: 0 and 50 log-spaced in [1e-4,1])");
  sweep->add_flag("--all-combos", all_combos, "One curve per normalization combo plus the per-point best");
  sweep->add_option("--out", out, "CSV path (default stdout)");
  add_backend_flags(sweep, bf);
  add_estimator_flags(sweep, ef);

  std::string kinds = "l1,l2,temporal,unbalanced,misspecified";
  auto* ablate = app.add_subcommand("ablate", "Accuracy for every valid normalization combo");
  ablate->add_option("--data", data, "Dataset file")->required();
  ablate->add_option("--kinds", kinds, "Comma-separated estimator kinds");
  ablate->add_option("--out", out, "CSV path (default stdout)");
  add_backend_flags(ablate, bf);
  add_estimator_flags(ablate, ef);

  std::size_t worlds = 1000, max_covariates = 4;
  std::string q_form = "reciprocal";
  auto* verify = app.add_subcommand("verify-proposition", "Check the matching error bound on random worlds");
  verify->add_option("--worlds", worlds, "Number of random worlds (default 1000)");
  verify->add_option("--max-covariates", max_covariates, "Covariates per world, at most (default 4)");
  verify->add_option("--q-form", q_form, "reciprocal or conditional");
  verify->add_option("--out", out, "Output path (default stdout)");
  add_backend_flags(verify, bf);

  SuiteSpec suite_spec;
  std::string suite_convention = "premise-as-cause";
  auto* make_suite = app.add_subcommand("make-suite", "Generate a certified confounding suite");
  make_suite->add_option("--instances", suite_spec.instances, "Instances (default 200)");
  make_suite->add_option("--covariates", suite_spec.covariates, "Covariates per world (default 3)");
  make_suite->add_option("--confounding", suite_spec.confounding, "Confounder strength in [0,1] (default 1)");
  make_suite->add_option("--max-attempts", suite_spec.max_attempts, "Resampling budget per instance (default 20)");
  make_suite->add_option("--role-convention", suite_convention, "premise-as-cause or choice-as-cause");
  make_suite->add_option("--out", out, "Suite JSON path (default stdout)");
  add_backend_flags(make_suite, bf);

  std::string cache_action;
  int port = 8750;
  auto* cache = app.add_subcommand("cache", "Inspect or compact response caches");
  cache->add_option("action", cache_action, "stats or compact")->required()->check(CLI::IsMember({"stats", "compact"}));
  cache->add_option("--out", out, "Output path (default stdout)");
  add_backend_flags(cache, bf);

  auto* serve = app.add_subcommand("serve-stub", "Serve a stub universe over HTTP until killed");
  serve->add_option("--port", port, "Port on 127.0.0.1 (default 8750; 0 picks a free port)");
  serve->add_option("--out", out, "Write the served URL to this file");
  add_backend_flags(serve, bf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "error_class=config\n";
    return static_cast<int>(ErrorClass::Config);
  }

  try {
    if (*score) return cmd_score(e1, e2, ef, bf, explain, as_json, out);
    if (*evaluate) return cmd_evaluate(data, ef, bf, out, csv, manifest);
    if (*sweep) return cmd_sweep(data, ef, bf, axis, grid, all_combos, out);
    if (*ablate) return cmd_ablate(data, ef, bf, kinds, out);
    if (*verify) return cmd_verify(worlds, bf.seed.value_or(0), q_form, max_covariates, out);
    if (*make_suite) {
      suite_spec.convention = parse_role_convention(suite_convention);
      return cmd_make_suite(suite_spec, bf.seed.value_or(0), out);
    }
    if (*cache) return cmd_cache(cache_action, bf, out);
    if (*serve) return cmd_serve_stub(bf, port, out);
  } catch (const Error& e) {
    const char* cls = e.error_class() == ErrorClass::Config ? "config"
                      : e.error_class() == ErrorClass::Backend ? "backend"
                                                                : "data";
    std::cerr << "error: " << e.what() << "\nerror_class=" << cls << '\n';
    return static_cast<int>(e.error_class());
  }
  return 0;
}
