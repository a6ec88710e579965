// Acceptance run: one PASS/FAIL line per headline criterion. Exits nonzero
// when any line fails. Tolerances are pinned here and nowhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "rock/rock.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace rock;
namespace fs = std::filesystem;

namespace {

constexpr double kPropositionSlack = 1e-12;
constexpr double kTwoRouteTolerance = 1e-12;
constexpr double kAlgebraTolerance = 1e-12;
constexpr double kPropositionSeconds = 60.0;
constexpr double kConfoundingSeconds = 120.0;
constexpr std::uint64_t kSuiteSeed = 42;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---- proposition ------------------------------------------------------------

Outcome proposition() {
  const auto t0 = Clock::now();
  std::size_t holds = 0, agree = 0, worlds = 0;
  double worst_route_gap = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const SyntheticWorld w = random_world(hash_combine(7, i), 4);
    ++worlds;
    const auto rep = verify_proposition(w, QForm::Reciprocal);
    if (rep.lhs <= rep.bound + kPropositionSlack) ++holds;
    const double gap = std::abs(rep.lhs - rep.lhs_total_variance);
    worst_route_gap = std::max(worst_route_gap, gap);
    if (gap <= kTwoRouteTolerance && std::abs(rep.delta_true - oracle::true_ate(w)) <= kTwoRouteTolerance) ++agree;
  }
  const double secs = seconds_since(t0);
  return {holds == worlds && agree == worlds && secs < kPropositionSeconds,
          std::to_string(holds) + "/" + std::to_string(worlds) + " hold, two routes agree in " + std::to_string(agree) +
              " (max gap " + num(worst_route_gap) + "), " + num(secs) + " s"};
}

// ---- confounding suite and cache -------------------------------------------

const ConfoundedSuite& default_suite() {
  static const ConfoundedSuite suite = confounded_pair_suite(SuiteSpec{}, kSuiteSeed);
  return suite;
}

EvalReport evaluate_over_http(const ConfoundedSuite& suite, const std::string& url, ResponseCache* cache,
                              const EstimatorConfig& cfg, std::size_t* requests) {
  ClientOptions opts;
  opts.base_url = url;
  BackendClient client(opts, cache);
  Evaluator<BackendClient> ev(client, suite.dataset, suite_pipeline_options(suite.spec));
  EvalReport r = ev.evaluate(cfg);
  if (requests) *requests = client.network_requests();
  return r;
}

Outcome confounding() {
  const auto t0 = Clock::now();
  const ConfoundedSuite& suite = default_suite();
  const std::string again = confounded_pair_suite(SuiteSpec{}, kSuiteSeed).to_json().dump();
  const bool deterministic = again == suite.to_json().dump();

  StubBackend stub(suite.universe);
  StubServer server(stub);
  ClientOptions opts;
  opts.base_url = server.url();
  BackendClient client(opts);
  Evaluator<BackendClient> ev(client, suite.dataset, suite_pipeline_options(suite.spec));

  bool ok = deterministic && suite.dataset.size() == 200;
  std::string detail;
  for (const auto& [name, cfg] : certified_configs(suite.spec)) {
    const double acc = ev.evaluate(cfg).accuracy;
    const bool balanced = is_balanced(cfg.kind);
    ok = ok && (balanced ? acc >= 0.95 : acc <= 0.50) && acc == suite.certificate.accuracy_of(name);
    detail += name + "=" + fixed(acc) + " ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kConfoundingSeconds;
  return {ok, detail + "over HTTP, matches certificate, " + (deterministic ? "deterministic" : "NOT deterministic") +
                  ", " + num(secs) + " s"};
}

Outcome cache_determinism() {
  const ConfoundedSuite& suite = default_suite();
  StubBackend stub(suite.universe);
  StubServer server(stub);
  TempDir dir;
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::BalancedL1;
  cfg.match.epsilon = suite.spec.epsilon_l1;

  std::size_t cold = 0, warm1 = 0, warm2 = 0;
  std::string r0, r1, r2;
  {
    ResponseCache cache(dir.path(), stub.backend_id());
    r0 = evaluate_over_http(suite, server.url(), &cache, cfg, &cold).serialize();
  }
  {
    ResponseCache cache(dir.path(), stub.backend_id());
    r1 = evaluate_over_http(suite, server.url(), &cache, cfg, &warm1).serialize();
  }
  const auto served = stub.requests_served();
  {
    ResponseCache cache(dir.path(), stub.backend_id());
    r2 = evaluate_over_http(suite, server.url(), &cache, cfg, &warm2).serialize();
  }
  const bool ok = r1 == r2 && r0 == r1 && warm2 == 0 && warm1 == 0 && stub.requests_served() == served;
  return {ok, "cold run " + std::to_string(cold) + " requests, warm runs " + std::to_string(warm1) + " and " +
                  std::to_string(warm2) + ", reports " + (r1 == r2 && r0 == r1 ? "byte-identical" : "DIFFER")};
}

// ---- estimator algebra -------------------------------------------------------

ScoreResult run(const oracle::RandomTable& rt, const TemporalScoreTable& t, const EstimatorConfig& cfg) {
  return delta_score(CausalQuery(rt.e1, rt.e2), CovariateSet(rt.xs), InterventionSet(rt.as), t, cfg);
}

Outcome limit_identities() {
  std::size_t checks = 0, failures = 0, narrow_checks = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto rt = oracle::random_table(seed);
    const auto t = rt.table();
    for (const auto& combo : enumerate_combos()) {
      if (combo.f) continue;
      for (auto kind : {EstimatorKind::BalancedL1, EstimatorKind::BalancedL2}) {
        EstimatorConfig cfg;
        cfg.kind = kind;
        cfg = cfg.with_combo(combo);
        const auto ex = explain_delta(CausalQuery(rt.e1, rt.e2), CovariateSet(rt.xs), InterventionSet(rt.as), t, cfg);
        const double max_d = *std::max_element(ex.distances.begin(), ex.distances.end());
        const double min_d = *std::min_element(ex.distances.begin(), ex.distances.end());

        EstimatorConfig wide = cfg, unb = cfg;
        wide.match.epsilon = max_d;
        unb.kind = EstimatorKind::Unbalanced;
        ++checks;
        if (!bit_equal(run(rt, t, wide).value, run(rt, t, unb).value)) ++failures;

        if (min_d > 0.0) {
          EstimatorConfig narrow = cfg, tmp = cfg;
          narrow.match.epsilon = 0.0;
          tmp.kind = EstimatorKind::Temporal;
          ++checks;
          ++narrow_checks;
          if (!bit_equal(run(rt, t, narrow).value, run(rt, t, tmp).value)) ++failures;
        }
      }
    }
  }
  return {failures == 0 && narrow_checks > 0, std::to_string(checks - failures) + "/" + std::to_string(checks) +
                                                   " bit-exact over 100 tables (" + std::to_string(narrow_checks) +
                                                   " at epsilon 0)"};
}

Outcome lattice() {
  const auto combos = enumerate_combos();
  std::size_t brute = 0;
  for (int m = 0; m < 64; ++m) {
    const bool d = m & 1, s = m & 4, q = m & 8, c = m & 16, e = m & 32;
    if (!(d && (s || q)) && !(c && e)) ++brute;
  }
  SuiteSpec spec;
  spec.instances = 20;
  const auto suite = confounded_pair_suite(spec, kSuiteSeed);
  StubBackend stub(suite.universe);
  Evaluator<StubBackend> ev(stub, suite.dataset, suite_pipeline_options(spec), 1);
  std::ostringstream csv;
  write_ablation_csv(csv, ev.ablate(EstimatorConfig{}, {EstimatorKind::BalancedL1, EstimatorKind::Unbalanced}));
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  const std::size_t rows = lines - 1;
  return {combos.size() == 30 && brute == 30 && rows == 30,
          std::to_string(combos.size()) + " combos (independent count " + std::to_string(brute) + "), ablate rows " +
              std::to_string(rows)};
}

Outcome matching_monotonicity() {
  std::size_t failures = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    oracle::Gen g(seed + 777);
    const auto rt = oracle::random_table(seed);
    const auto table = rt.table();
    MatchConfig m;
    m.norm = g.coin(0.5) ? Norm::L1 : Norm::L2;
    m.mode = g.coin(0.3) ? MatchMode::Direct : MatchMode::Propensity;
    m.q_normalized = m.mode == MatchMode::Propensity && g.coin(0.5);
    m.q_form = g.coin(0.5) ? QForm::Reciprocal : QForm::Conditional;
    ScoreNormFlags fl;
    fl.s_enabled = m.mode == MatchMode::Propensity && g.coin(0.5);
    fl.c_enabled = g.coin(0.3);
    const TablePrecedence f{&table, fl};
    auto kept = [&](const std::vector<Event>& xs) {
      return matched_set(InterventionSet(rt.as), rt.e1, CovariateSet(xs), f, m).kept;
    };

    std::vector<bool> prev(rt.as.size(), false);
    double eps = 0.0;
    for (int step = 0; step < 8; ++step) {
      m.epsilon = eps;
      const auto k = kept(rt.xs);
      for (std::size_t i = 0; i < k.size(); ++i)
        if (prev[i] && !k[i]) ++failures;
      prev = k;
      eps += g.range(0.0, 0.4);
    }
    m.epsilon = g.range(0.0, 1.0);
    auto shuffled = rt.xs;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[g.pick(i)]);
    if (kept(rt.xs) != kept(shuffled)) ++failures;
  }
  return {failures == 0, "1000 tables, " + std::to_string(failures) + " violations"};
}

Outcome normalization_algebra() {
  std::size_t sum_fail = 0, sym_fail = 0, range_fail = 0, noop_fail = 0, sums = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto rt = oracle::random_table(seed);
    const auto table = rt.table();
    const auto events = rt.all();
    for (int mask = 0; mask < 8; ++mask) {
      ScoreNormFlags fl;
      fl.s_enabled = mask & 1;
      fl.c_enabled = mask & 2;
      fl.e_enabled = mask & 4;
      if (fl.c_enabled && fl.e_enabled) continue;
      for (const auto& a : events)
        for (const auto& b : events) {
          const double ab = precedence(table, a, b, fl).value;
          const double ba = precedence(table, b, a, fl).value;
          if (fl.s_enabled && !(ab >= 0.0 && ab <= 1.0)) ++range_fail;
          if (fl.c_enabled && !bit_equal(ab, ba)) ++sym_fail;
          if (fl.e_enabled) {
            ScoreNormFlags pre = fl;
            pre.e_enabled = false;
            if (precedence(table, a, b, pre).value + precedence(table, b, a, pre).value > kDenominatorFloor) {
              ++sums;
              if (std::abs(ab + ba - 1.0) > kAlgebraTolerance) ++sum_fail;
            }
          }
          if (mask == 0 && !bit_equal(ab, symmetrize(table.at(a, b), table.at(b, a)))) ++noop_fail;
        }
    }
  }
  const bool ok = sum_fail + sym_fail + range_fail + noop_fail == 0 && sums > 0;
  return {ok, "E sums " + std::to_string(sums - sum_fail) + "/" + std::to_string(sums) + ", C asymmetries " +
                  std::to_string(sym_fail) + ", S out of range " + std::to_string(range_fail) + ", no-op breaks " +
                  std::to_string(noop_fail)};
}

Outcome baseline() {
  const std::string a = fixed(random_baseline_std(100)), b = fixed(random_baseline_std(500)),
                    c = fixed(random_baseline_std(153));
  return {a == "0.050" && b == "0.022" && c == "0.040", "n=100 " + a + ", n=500 " + b + ", n=153 " + c};
}

// ---- datasets ----------------------------------------------------------------

bool copa_round_trips(const Dataset& d) {
  std::ostringstream out;
  write_copa(out, d);
  std::istringstream in(out.str());
  return parse_copa(in, d.name()) == d;
}

std::optional<fs::path> find_official(const fs::path& root, const std::string& name) {
  for (const auto& candidate : {root / name, root / "datasets" / name})
    if (fs::exists(candidate)) return candidate;
  return std::nullopt;
}

Outcome dataset_loaders() {
  const std::string data = ROCK_DATA_DIR;
  const auto glucose = load_glucose_d1(data + "/glucose-d1.tsv");
  std::ostringstream gout;
  write_glucose_d1(gout, glucose);
  std::istringstream gin(gout.str());
  const bool glucose_ok = glucose.size() == 153 && parse_glucose_d1(gin, glucose.name()) == glucose;
  const bool fixtures_ok = glucose_ok && copa_round_trips(load_copa(data + "/copa-dev.xml")) &&
                           copa_round_trips(load_copa(data + "/copa-test.xml"));

  std::string detail = std::string("GLUCOSE-D1 fixture 153 ") + (glucose_ok ? "ok" : "FAILED") + ", round-trips " +
                       (fixtures_ok ? "lossless" : "LOSSY");
  const char* dir = std::getenv("ROCK_COPA_DIR");
  if (!dir) return {false, detail + "; official COPA files not available (set ROCK_COPA_DIR)"};
  const auto dev = find_official(dir, "copa-dev.xml");
  const auto test = find_official(dir, "copa-test.xml");
  if (!dev || !test) return {false, detail + "; copa-dev.xml / copa-test.xml not found under " + std::string(dir)};
  const auto d = load_copa(*dev);
  const auto t = load_copa(*test);
  const bool ok = fixtures_ok && d.size() == 100 && t.size() == 500 && copa_round_trips(d) && copa_round_trips(t);
  return {ok, detail + "; official COPA dev " + std::to_string(d.size()) + ", test " + std::to_string(t.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"proposition-bound", proposition},
      {"confounding-demonstration", confounding},
      {"estimator-limit-identities", limit_identities},
      {"lattice-cardinality", lattice},
      {"matching-monotonicity", matching_monotonicity},
      {"normalization-algebra", normalization_algebra},
      {"random-baseline-arithmetic", baseline},
      {"dataset-loaders", dataset_loaders},
      {"cache-determinism", cache_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << "  " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criterion(s) failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
