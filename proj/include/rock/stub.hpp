#pragma once

// Deterministic protocol backend answering from synthetic worlds and/or an
// explicit precedence table. No model, no randomness beyond the seeds.
//
//   generate   "<E1> Before that," -> the covariates known for E1, cycled in
//              a seeded order, each followed by a trailing fragment so that
//              cropping is exercised
//   mask_fill  "A <MASK> B"       -> after/before scores carrying Pr(A < B)
//              and Pr(B < A) under the configured orientation
//   perturb    E1                 -> the interventions known for E1, by code

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <httplib.h>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/hash.hpp"
#include "rock/protocol.hpp"
#include "rock/temporal.hpp"
#include "rock/world.hpp"

namespace rock {

struct StubScenario {
  Event treatment;
  std::vector<Event> covariates;
  std::vector<Perturbation> perturbations;
};

inline constexpr int kUniverseFormatVersion = 1;

class StubUniverse {
 public:
  std::string backend_id = "rock-stub";
  std::uint64_t seed = 0;
  Orientation orientation = Orientation::AfterForward;
  double null_mass = 0.05;  // for events outside every world
  std::map<std::string, int> connective_rank{{"after", 1}, {"before", 2}};

  void add_world(SyntheticWorld w) {
    w.validate();
    const std::size_t idx = worlds_.size();
    for (const auto& e : w.events()) {
      world_index_[e.id()].push_back(idx);
      known_.insert(e.id());
    }
    StubScenario derived{w.treatment, {}, {}};
    for (const auto& c : w.covariates) derived.covariates.push_back(c.event);
    for (const auto& iv : w.interventions) derived.perturbations.push_back({iv.event.text(), iv.code});
    merge_scenario(derived);
    worlds_.push_back(std::move(w));
  }

  void add_scenario(StubScenario s) {
    explicit_scenarios_.push_back(s);
    merge_scenario(s);
  }

  void set_precedence(const Event& a, const Event& b, double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw PreconditionError("precedence must lie in [0,1]");
    if (!a.is_null()) known_.insert(a.id());
    if (!b.is_null()) known_.insert(b.id());
    auto [it, inserted] = explicit_.try_emplace({a.id(), b.id()}, value);
    if (inserted) explicit_order_.push_back({a, b});
    else it->second = value;
  }

  bool knows(const Event& e) const { return e.is_null() || known_.count(e.id()) > 0; }

  /// Pr(a < b): explicit entry, else the first world holding both events,
  /// else 0 for known events and null-event mass for (x, N) / (N, x).
  /// nullopt when either event is unknown.
  std::optional<double> precedence(const Event& a, const Event& b) const {
    if (!knows(a) || !knows(b)) return std::nullopt;
    if (auto it = explicit_.find({a.id(), b.id()}); it != explicit_.end()) return it->second;
    if (a.is_null() && b.is_null()) return 0.0;
    if (const SyntheticWorld* w = shared_world(a, b)) return w->precedence(a, b);
    if (a.is_null() || b.is_null()) return null_mass;
    return 0.0;
  }

  const StubScenario* scenario(const Event& e1) const {
    auto it = scenario_index_.find(e1.id());
    return it == scenario_index_.end() ? nullptr : &scenarios_[it->second];
  }

  const std::vector<SyntheticWorld>& worlds() const noexcept { return worlds_; }

  json to_json() const {
    json worlds = json::array();
    for (const auto& w : worlds_) worlds.push_back(rock::to_json(w));
    json prec = json::array();
    for (const auto& [a, b] : explicit_order_)
      prec.push_back({{"a", a.text()}, {"b", b.text()}, {"value", explicit_.at({a.id(), b.id()})}});
    json scen = json::array();
    for (const auto& s : explicit_scenarios_) {
      json covs = json::array();
      for (const auto& c : s.covariates) covs.push_back(c.text());
      json perts = json::array();
      for (const auto& p : s.perturbations) perts.push_back({{"text", p.text}, {"code", rock::to_string(p.code)}});
      scen.push_back({{"treatment", s.treatment.text()}, {"covariates", covs}, {"perturbations", perts}});
    }
    return json{{"format", "rock-stub-universe"},
                {"version", kUniverseFormatVersion},
                {"backend_id", backend_id},
                {"seed", seed},
                {"orientation", rock::to_string(orientation)},
                {"null_mass", null_mass},
                {"connective_rank", connective_rank},
                {"worlds", worlds},
                {"precedence", prec},
                {"scenarios", scen}};
  }

  static StubUniverse from_json(const json& j) {
    auto event_of = [](const std::string& text) { return normalize_text(text).empty() ? Event::null() : Event(text); };
    try {
      if (j.at("format") != "rock-stub-universe") throw ParseError("not a stub universe file");
      if (j.at("version").get<int>() != kUniverseFormatVersion)
        throw ParseError("unsupported stub universe version " + j.at("version").dump());
      StubUniverse u;
      u.backend_id = j.value("backend_id", u.backend_id);
      u.seed = j.value("seed", std::uint64_t{0});
      u.orientation = parse_orientation(j.value("orientation", std::string("after-forward")));
      u.null_mass = j.value("null_mass", u.null_mass);
      if (j.contains("connective_rank")) u.connective_rank = j.at("connective_rank").get<std::map<std::string, int>>();
      for (const auto& w : j.value("worlds", json::array())) u.add_world(world_from_json(w));
      for (const auto& p : j.value("precedence", json::array()))
        u.set_precedence(event_of(p.at("a").get<std::string>()), event_of(p.at("b").get<std::string>()),
                         p.at("value").get<double>());
      for (const auto& s : j.value("scenarios", json::array())) {
        StubScenario sc{Event(s.at("treatment").get<std::string>()), {}, {}};
        for (const auto& c : s.value("covariates", json::array())) sc.covariates.emplace_back(c.get<std::string>());
        for (const auto& p : s.value("perturbations", json::array())) {
          auto code = try_parse_control_code(p.at("code").get<std::string>());
          if (!code) throw ParseError("unknown control code in stub universe");
          sc.perturbations.push_back({p.at("text").get<std::string>(), *code});
        }
        for (const auto& c : sc.covariates) u.known_.insert(c.id());
        for (const auto& p : sc.perturbations) u.known_.insert(Event(p.text).id());
        u.known_.insert(sc.treatment.id());
        u.add_scenario(std::move(sc));
      }
      return u;
    } catch (const json::exception& e) {
      throw ParseError(std::string("stub universe: ") + e.what());
    } catch (const ConfigError& e) {
      throw ParseError(std::string("stub universe: ") + e.what());
    }
  }

  static StubUniverse load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    // A suite file carries its universe under "universe".
    if (j.is_object() && j.contains("universe")) return from_json(j.at("universe"));
    return from_json(j);
  }

  std::string fingerprint() const { return to_hex(fnv1a64(canonical(to_json()))); }

 private:
  const SyntheticWorld* shared_world(const Event& a, const Event& b) const {
    auto worlds_of = [&](const Event& e) -> const std::vector<std::size_t>* {
      auto it = world_index_.find(e.id());
      return it == world_index_.end() ? nullptr : &it->second;
    };
    if (a.is_null() || b.is_null()) {
      const auto* ws = worlds_of(a.is_null() ? b : a);
      return ws ? &worlds_[ws->front()] : nullptr;
    }
    const auto* wa = worlds_of(a);
    const auto* wb = worlds_of(b);
    if (!wa || !wb) return nullptr;
    for (std::size_t i : *wa)
      if (std::find(wb->begin(), wb->end(), i) != wb->end()) return &worlds_[i];
    return nullptr;
  }

  void merge_scenario(const StubScenario& s) {
    auto [it, inserted] = scenario_index_.try_emplace(s.treatment.id(), scenarios_.size());
    if (inserted) {
      scenarios_.push_back(StubScenario{s.treatment, {}, {}});
    }
    StubScenario& target = scenarios_[it->second];
    for (const auto& c : s.covariates)
      if (std::find(target.covariates.begin(), target.covariates.end(), c) == target.covariates.end())
        target.covariates.push_back(c);
    for (const auto& p : s.perturbations) {
      const bool dup = std::any_of(target.perturbations.begin(), target.perturbations.end(),
                                   [&](const Perturbation& q) { return normalize_text(q.text) == normalize_text(p.text); });
      if (!dup) target.perturbations.push_back(p);
    }
  }

  std::vector<SyntheticWorld> worlds_;
  std::unordered_map<EventId, std::vector<std::size_t>> world_index_;
  std::unordered_map<std::pair<EventId, EventId>, double, EventPairHash> explicit_;
  std::vector<std::pair<Event, Event>> explicit_order_;
  std::vector<StubScenario> explicit_scenarios_;
  std::vector<StubScenario> scenarios_;
  std::unordered_map<EventId, std::size_t> scenario_index_;
  std::unordered_set<EventId> known_;
};

inline constexpr std::string_view kStubTrailingFragment = " It was";

/// Pure request handlers over a universe; also usable in-process wherever a
/// ProtocolBackend is expected.
class StubBackend {
 public:
  explicit StubBackend(std::shared_ptr<const StubUniverse> universe) : universe_(std::move(universe)) {}
  explicit StubBackend(StubUniverse universe)
      : universe_(std::make_shared<const StubUniverse>(std::move(universe))) {}

  GenerateResponse generate(const GenerateRequest& req) const {
    GenerateResponse resp;
    std::string_view prompt = req.prompt;
    const std::string suffix = normalize_text(kCovariatePromptSuffix);
    std::string norm = normalize_text(prompt);
    if (norm.size() < suffix.size() || norm.compare(norm.size() - suffix.size(), suffix.size(), suffix) != 0)
      return resp;
    norm = normalize_text(std::string_view(norm).substr(0, norm.size() - suffix.size()));
    if (norm.empty()) return resp;
    const Event e1(norm);
    const StubScenario* sc = universe_->scenario(e1);
    if (!sc) return resp;

    // Only events the law allows before E1.
    std::vector<const Event*> pool;
    for (const auto& x : sc->covariates)
      if (universe_->precedence(e1, x).value_or(0.0) < 1.0) pool.push_back(&x);
    if (pool.empty()) return resp;

    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::uint64_t request_seed = req.seed ? static_cast<std::uint64_t>(*req.seed) : 0;
    SplitMix64 rng(hash_combine(hash_combine(universe_->seed, request_seed), e1.id()));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (int i = 0; i < req.n; ++i)
      resp.completions.push_back(' ' + pool[order[static_cast<std::size_t>(i) % order.size()]]->text() +
                                 std::string(kStubTrailingFragment));
    return resp;
  }

  MaskFillResponse mask_fill(const MaskFillRequest& req) const {
    const auto [left, right] = split_mask_template(req.template_text);
    const Event a = left.empty() ? Event::null() : Event(left);
    const Event b = right.empty() ? Event::null() : Event(right);
    const auto forward = universe_->precedence(a, b);
    const auto backward = universe_->precedence(b, a);

    MaskFillResponse resp;
    for (const auto& cand : req.candidates) {
      auto rank = universe_->connective_rank.find(cand);
      const bool in_top_k = rank != universe_->connective_rank.end() && rank->second <= req.top_k;
      double score = 0.0;
      if (in_top_k && forward && backward) {
        const bool after_carries_forward = universe_->orientation == Orientation::AfterForward;
        if (cand == "after") score = after_carries_forward ? *forward : *backward;
        else if (cand == "before") score = after_carries_forward ? *backward : *forward;
      }
      const bool covered = in_top_k && forward && backward;
      resp.scores[cand] = covered ? score : 0.0;
      resp.covered[cand] = covered;
    }
    return resp;
  }

  std::vector<MaskFillResponse> mask_fill_batch(const std::vector<MaskFillRequest>& reqs) const {
    std::vector<MaskFillResponse> out;
    out.reserve(reqs.size());
    for (const auto& r : reqs) out.push_back(mask_fill(r));
    return out;
  }

  PerturbResponse perturb(const PerturbRequest& req) const {
    PerturbResponse resp;
    const std::string text = normalize_text(req.text);
    if (text.empty()) return resp;
    const StubScenario* sc = universe_->scenario(Event(text));
    if (!sc) return resp;
    std::map<ControlCode, int> used;
    for (const auto& p : sc->perturbations) {
      if (std::find(req.control_codes.begin(), req.control_codes.end(), p.code) == req.control_codes.end()) continue;
      if (used[p.code]++ >= req.n_per_code) continue;
      resp.perturbations.push_back(p);
    }
    return resp;
  }

  BackendInfo info() const { return {universe_->backend_id, true, true, true, "stub:" + universe_->fingerprint()}; }

  std::string backend_id() const { return universe_->backend_id; }
  const StubUniverse& universe() const noexcept { return *universe_; }

  struct HttpReply {
    int status = 200;
    std::string body;
  };

  /// Transport-level entry point shared by the HTTP server and tests.
  HttpReply handle(std::string_view method, std::string_view path, std::string_view body) {
    served_.fetch_add(1, std::memory_order_relaxed);
    if (failures_left_.load() > 0 && failures_left_.fetch_sub(1) > 0)
      return {503, json{{"error", "injected failure"}}.dump()};
    try {
      if (method == "GET" && path == endpoint::kInfo) return {200, canonical(to_json(info()))};
      if (method != "POST") return {405, json{{"error", "method not allowed"}}.dump()};
      const json j = parse_json_body(body, "request");
      if (path == endpoint::kGenerate) return {200, canonical(to_json(generate(generate_request_from_json(j))))};
      if (path == endpoint::kMaskFill) return {200, canonical(to_json(mask_fill(mask_fill_request_from_json(j))))};
      if (path == endpoint::kPerturb) return {200, canonical(to_json(perturb(perturb_request_from_json(j))))};
      return {404, json{{"error", "unknown endpoint"}}.dump()};
    } catch (const Error& e) {
      return {400, json{{"error", e.what()}}.dump()};
    }
  }

  /// The next n transport requests answer 503.
  void fail_next(int n) { failures_left_.store(n); }
  std::size_t requests_served() const noexcept { return served_.load(); }

 private:
  std::shared_ptr<const StubUniverse> universe_;
  std::atomic<std::size_t> served_{0};
  std::atomic<int> failures_left_{0};
};

/// Serves a StubBackend over HTTP on 127.0.0.1 from a background thread.
class StubServer {
 public:
  explicit StubServer(StubBackend& backend, int port = 0) : backend_(backend) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      const auto reply = backend_.handle(req.method, req.path, req.body);
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    };
    // Keep-alive clients pin a worker each; size the pool above the
    // client's default concurrency so pinned connections never starve it.
    server_.new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_.set_tcp_nodelay(true);
    server_.Get(".*", route);
    server_.Post(".*", route);
    server_.Put(".*", route);
    port_ = port == 0 ? server_.bind_to_any_port("127.0.0.1") : (server_.bind_to_port("127.0.0.1", port) ? port : -1);
    if (port_ <= 0) throw BackendError("stub server could not bind a port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  StubBackend& backend() noexcept { return backend_; }

 private:
  StubBackend& backend_;
  httplib::Server server_;
  int port_ = -1;
  std::thread thread_;
};

}  // namespace rock
