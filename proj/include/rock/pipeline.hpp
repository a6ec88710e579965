#pragma once

// End-to-end scoring: sample covariates and interventions per distinct E1,
// fetch every pair score those sets imply into one table, then score
// queries against the frozen table.

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rock/estimators.hpp"
#include "rock/event.hpp"
#include "rock/matching.hpp"
#include "rock/operations.hpp"
#include "rock/protocol.hpp"
#include "rock/temporal.hpp"

namespace rock {

struct PipelineOptions {
  SamplerOptions sampler;
  std::vector<ControlCode> codes = all_control_codes();
  int n_per_code = 3;
  int top_k = 5;
  RoleConvention convention = RoleConvention::PremiseAsCause;
  bool include_null = true;

  json to_json() const {
    json codes_json = json::array();
    for (auto c : codes) codes_json.push_back(to_string(c));
    return json{{"n_samples", sampler.n},
                {"max_new_tokens", sampler.max_new_tokens},
                {"temperature", sampler.temperature},
                {"stop", sampler.stop},
                {"sample_seed", sampler.seed ? json(*sampler.seed) : json(nullptr)},
                {"codes", codes_json},
                {"n_per_code", n_per_code},
                {"top_k", top_k},
                {"role_convention", to_string(convention)},
                {"include_null", include_null}};
  }
};

struct PreparedTreatment {
  CovariateSet covariates;
  InterventionSet interventions;
};

template <ProtocolBackend B>
class ScoringPipeline {
 public:
  ScoringPipeline(B& backend, PipelineOptions options) : backend_(&backend), options_(std::move(options)) {}

  const PipelineOptions& options() const noexcept { return options_; }

  /// Sample X and A for e1 once; later calls reuse the result.
  const PreparedTreatment& prepare(const Event& e1) {
    if (auto it = prepared_.find(e1.id()); it != prepared_.end()) return it->second;
    PreparedTreatment p{sample_covariates(e1, *backend_, options_.sampler),
                        generate_interventions(e1, options_.codes, options_.n_per_code, *backend_)};
    return prepared_.emplace(e1.id(), std::move(p)).first->second;
  }

  /// Prepare every query and fetch, in one batch, each pair score not yet
  /// in the table. Not thread-safe; scoring afterwards is.
  void prepare(const std::vector<CausalQuery>& queries) {
    std::vector<std::pair<Event, Event>> pairs;
    for (const auto& q : queries) {
      const PreparedTreatment& p = prepare(q.e1());
      const Event& e1 = q.e1();
      const Event& e2 = q.e2();
      pairs.emplace_back(e1, e2);
      for (const auto& a : p.interventions.events()) pairs.emplace_back(a, e2);
      for (const auto& x : p.covariates.events()) {
        pairs.emplace_back(x, e1);
        pairs.emplace_back(x, e2);
        for (const auto& a : p.interventions.events()) pairs.emplace_back(x, a);
      }
    }
    std::vector<std::pair<Event, Event>> missing;
    for (const auto& [a, b] : expand_pairs(pairs, options_.include_null))
      if (!table_.contains(a, b)) missing.emplace_back(a, b);
    if (missing.empty()) return;
    // `missing` is already closed under reversal and null expansion.
    table_.merge(fetch_pair_scores(missing, *backend_, FetchOptions{options_.top_k, false}));
    if (table_.provenance().empty()) table_.set_provenance(backend_->backend_id());
  }

  const PreparedTreatment& prepared(const Event& e1) const {
    auto it = prepared_.find(e1.id());
    if (it == prepared_.end()) throw PreconditionError("treatment \"" + e1.text() + "\" was not prepared");
    return it->second;
  }

  DeltaExplanation explain(const CausalQuery& q, const EstimatorConfig& cfg) const {
    const PreparedTreatment& p = prepared(q.e1());
    return explain_delta(q, p.covariates, p.interventions, table_, cfg);
  }

  ScoreResult score(const CausalQuery& q, const EstimatorConfig& cfg) const { return explain(q, cfg).result; }

  ChoiceOutcome choose(const BenchmarkInstance& inst, const EstimatorConfig& cfg) const {
    return rock::choose(inst, [&](const CausalQuery& q) { return score(q, cfg); }, options_.convention);
  }

  std::vector<CausalQuery> queries_for(const std::vector<BenchmarkInstance>& instances) const {
    std::vector<CausalQuery> out;
    out.reserve(2 * instances.size());
    for (const auto& inst : instances) {
      out.push_back(query_roles(inst, Choice::ChoiceA, options_.convention));
      out.push_back(query_roles(inst, Choice::ChoiceB, options_.convention));
    }
    return out;
  }

  const TemporalScoreTable& table() const noexcept { return table_; }
  std::string backend_id() const { return backend_->backend_id(); }

 private:
  B* backend_;
  PipelineOptions options_;
  std::unordered_map<EventId, PreparedTreatment> prepared_;
  TemporalScoreTable table_;
};

}  // namespace rock
