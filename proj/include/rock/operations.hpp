#pragma once

// Covariate sampling, intervention generation and pair-score fetching,
// written against any object that speaks the protocol: the HTTP client or
// an in-process stub.

#include <concepts>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/matching.hpp"
#include "rock/protocol.hpp"
#include "rock/temporal.hpp"

namespace rock {

template <class B>
concept ProtocolBackend = requires(B& b, const GenerateRequest& g, const std::vector<MaskFillRequest>& m,
                                   const PerturbRequest& p) {
  { b.generate(g) } -> std::same_as<GenerateResponse>;
  { b.mask_fill_batch(m) } -> std::same_as<std::vector<MaskFillResponse>>;
  { b.perturb(p) } -> std::same_as<PerturbResponse>;
  { b.backend_id() } -> std::convertible_to<std::string>;
};

struct SamplerOptions {
  std::size_t n = 100;
  int max_new_tokens = 30;
  double temperature = 0.9;
  std::vector<std::string> stop = default_stop_tokens();
  std::optional<std::int64_t> seed;
};

/// Covariates X for e1: generations continuing "<e1> Before that,", cropped
/// at the first stop token and deduplicated by normalized text.
template <ProtocolBackend B>
CovariateSet sample_covariates(const Event& e1, B& backend, const SamplerOptions& opts = {}) {
  if (opts.n < 1) throw PreconditionError("covariate sample size n must be >= 1");
  GenerateRequest req;
  req.prompt = covariate_prompt(e1);
  req.n = static_cast<int>(opts.n);
  req.max_new_tokens = opts.max_new_tokens;
  req.temperature = opts.temperature;
  req.stop = opts.stop;
  req.seed = opts.seed;
  const GenerateResponse resp = backend.generate(req);

  std::vector<Event> events;
  std::unordered_set<std::string> seen;
  for (const auto& completion : resp.completions) {
    std::string text = crop_at_stop(completion, opts.stop);
    if (text.empty() || !seen.insert(text).second) continue;
    events.emplace_back(std::move(text));
  }
  return CovariateSet(std::move(events), CovariateOrigin::Sampled);
}

/// Interventions of e1 from one perturb call. No fluency filtering; texts
/// equal to e1 are dropped.
template <ProtocolBackend B>
InterventionSet generate_interventions(const Event& e1, const std::vector<ControlCode>& codes, int n_per_code,
                                       B& backend) {
  if (codes.empty()) throw PreconditionError("at least one control code is required");
  if (n_per_code < 1) throw PreconditionError("n_per_code must be >= 1");
  const PerturbResponse resp = backend.perturb(PerturbRequest{e1.text(), codes, n_per_code});
  std::vector<Event> events;
  std::unordered_set<std::string> seen{e1.normalized()};
  for (const auto& p : resp.perturbations) {
    std::string text = normalize_text(p.text);
    if (text.empty() || !seen.insert(text).second) continue;
    events.emplace_back(p.text);
  }
  return InterventionSet(std::move(events));
}

struct FetchOptions {
  int top_k = 5;
  bool include_null = false;  // also fetch (x, N) and (N, x) for flag S
};

/// Every ordered pair the request list implies: both orders of each pair,
/// plus the null-event pairs when asked. First-seen order.
inline std::vector<std::pair<Event, Event>> expand_pairs(const std::vector<std::pair<Event, Event>>& pairs,
                                                         bool include_null) {
  std::vector<std::pair<Event, Event>> ordered;
  std::unordered_set<std::pair<EventId, EventId>, EventPairHash> seen;
  auto add = [&](const Event& a, const Event& b) {
    if (seen.insert({a.id(), b.id()}).second) ordered.emplace_back(a, b);
  };
  const Event null_event = Event::null();
  for (const auto& [a, b] : pairs) {
    add(a, b);
    add(b, a);
    if (!include_null) continue;
    for (const Event* e : {&a, &b}) {
      if (e->is_null()) continue;
      add(*e, null_event);
      add(null_event, *e);
    }
  }
  return ordered;
}

/// Raw "before"/"after" scores for both orders of every pair (and the
/// null-event pairs when requested), as one frozen table.
template <ProtocolBackend B>
TemporalScoreTable fetch_pair_scores(const std::vector<std::pair<Event, Event>>& pairs, B& backend,
                                     const FetchOptions& opts = {}) {
  const auto ordered = expand_pairs(pairs, opts.include_null);
  std::vector<MaskFillRequest> reqs;
  reqs.reserve(ordered.size());
  for (const auto& [a, b] : ordered) reqs.push_back(MaskFillRequest{mask_template(a, b), {"before", "after"}, opts.top_k});
  const auto responses = backend.mask_fill_batch(reqs);
  if (responses.size() != reqs.size()) throw MalformedResponse("mask_fill batch returned the wrong number of responses");

  TemporalScoreTable table(backend.backend_id());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& r = responses[i];
    auto score = [&](const char* cand) {
      auto covered = r.covered.find(cand);
      auto it = r.scores.find(cand);
      if (it == r.scores.end() || covered == r.covered.end())
        throw MalformedResponse(std::string("mask_fill response is missing candidate '") + cand + "'");
      return covered->second ? it->second : 0.0;
    };
    table.insert(ordered[i].first, ordered[i].second, RawDirectionalScores{score("after"), score("before")});
  }
  return table;
}

}  // namespace rock
