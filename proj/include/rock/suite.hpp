#pragma once

// Certified confounding suite.
//
// Each instance asks which of two candidate events brought about an outcome
// E2. Both candidates live in their own small world over fresh covariates:
//   causal world:   E1 raises Pr(E2) by tau at a flat propensity.
//   spurious world: E1 has no effect, but its propensity and the baseline of
//                   E2 both rise with covariate X1 (the confounder).
// Raw precedence favours the spurious candidate. Each world also carries
// interventions whose propensity profile tracks E1 (they survive matching)
// and decoys concentrated on one side of X1 (they do not), tilting the
// unmatched mean against the causal candidate.
//
// Instances are resampled until the exact scores (the same pipeline the
// evaluator runs, answered in-process by the stub) rank the temporal and
// unbalanced scores wrong and both balanced scores right.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rock/datasets.hpp"
#include "rock/errors.hpp"
#include "rock/estimators.hpp"
#include "rock/event.hpp"
#include "rock/hash.hpp"
#include "rock/pipeline.hpp"
#include "rock/stub.hpp"
#include "rock/world.hpp"

namespace rock {

struct SuiteSpec {
  std::size_t instances = 200;
  std::size_t covariates = 3;
  std::size_t balanced_interventions = 3;
  std::size_t decoy_interventions = 5;
  double confounding = 1.0;
  double effect_min = 0.10;
  double effect_max = 0.25;
  double epsilon_l1 = 0.05;
  double epsilon_l2 = 0.03;
  RoleConvention convention = RoleConvention::PremiseAsCause;
  std::size_t max_attempts = 20;
  double max_unbalanced_accuracy = 0.5;
  double min_balanced_accuracy = 0.95;

  json to_json() const {
    return json{{"instances", instances},
                {"covariates", covariates},
                {"balanced_interventions", balanced_interventions},
                {"decoy_interventions", decoy_interventions},
                {"confounding", confounding},
                {"effect_min", effect_min},
                {"effect_max", effect_max},
                {"epsilon_l1", epsilon_l1},
                {"epsilon_l2", epsilon_l2},
                {"role_convention", to_string(convention)},
                {"max_attempts", max_attempts},
                {"max_unbalanced_accuracy", max_unbalanced_accuracy},
                {"min_balanced_accuracy", min_balanced_accuracy}};
  }

  static SuiteSpec from_json(const json& j) {
    SuiteSpec s;
    s.instances = j.value("instances", s.instances);
    s.covariates = j.value("covariates", s.covariates);
    s.balanced_interventions = j.value("balanced_interventions", s.balanced_interventions);
    s.decoy_interventions = j.value("decoy_interventions", s.decoy_interventions);
    s.confounding = j.value("confounding", s.confounding);
    s.effect_min = j.value("effect_min", s.effect_min);
    s.effect_max = j.value("effect_max", s.effect_max);
    s.epsilon_l1 = j.value("epsilon_l1", s.epsilon_l1);
    s.epsilon_l2 = j.value("epsilon_l2", s.epsilon_l2);
    s.convention = parse_role_convention(j.value("role_convention", std::string("premise-as-cause")));
    s.max_attempts = j.value("max_attempts", s.max_attempts);
    s.max_unbalanced_accuracy = j.value("max_unbalanced_accuracy", s.max_unbalanced_accuracy);
    s.min_balanced_accuracy = j.value("min_balanced_accuracy", s.min_balanced_accuracy);
    return s;
  }

  void validate() const {
    if (instances == 0) throw PreconditionError("suite needs at least one instance");
    if (covariates == 0 || covariates > 8) throw PreconditionError("suite covariates must be in [1, 8]");
    if (balanced_interventions == 0) throw PreconditionError("suite needs balanced interventions");
    if (balanced_interventions + decoy_interventions > 3 * all_control_codes().size())
      throw PreconditionError("too many interventions for the default perturbation budget");
    if (!(confounding >= 0.0 && confounding <= 1.0)) throw PreconditionError("confounding must lie in [0,1]");
    if (!(effect_min > 0.0 && effect_min <= effect_max && effect_max <= 0.5))
      throw PreconditionError("effect range must satisfy 0 < min <= max <= 0.5");
    if (max_attempts == 0) throw PreconditionError("max_attempts must be positive");
  }
};

/// The four scorers a suite is certified against.
inline std::vector<std::pair<std::string, EstimatorConfig>> certified_configs(const SuiteSpec& spec) {
  auto make = [](EstimatorKind k, double eps) {
    EstimatorConfig c;
    c.kind = k;
    c.match.epsilon = eps;
    return c;
  };
  return {{"temporal", make(EstimatorKind::Temporal, 0.0)},
          {"unbalanced", make(EstimatorKind::Unbalanced, 0.0)},
          {"l1", make(EstimatorKind::BalancedL1, spec.epsilon_l1)},
          {"l2", make(EstimatorKind::BalancedL2, spec.epsilon_l2)}};
}

inline PipelineOptions suite_pipeline_options(const SuiteSpec& spec) {
  PipelineOptions o;
  o.convention = spec.convention;
  return o;
}

struct InstanceCertificate {
  std::string source_id;
  double true_ate_a = 0.0;
  double true_ate_b = 0.0;
  std::vector<std::array<double, 2>> scores;  // per certified config, (A, B)
  std::vector<bool> correct;
  std::size_t attempts = 1;
};

struct SuiteCertificate {
  std::vector<std::string> kinds;
  std::vector<double> accuracy;
  std::vector<InstanceCertificate> instances;

  double accuracy_of(std::string_view kind) const {
    for (std::size_t k = 0; k < kinds.size(); ++k)
      if (kinds[k] == kind) return accuracy[k];
    throw PreconditionError("suite certificate has no kind '" + std::string(kind) + "'");
  }
};

struct ConfoundedSuite {
  SuiteSpec spec;
  std::uint64_t seed = 0;
  Dataset dataset;
  std::shared_ptr<const StubUniverse> universe;
  SuiteCertificate certificate;

  json to_json() const {
    json acc = json::object();
    for (std::size_t k = 0; k < certificate.kinds.size(); ++k) acc[certificate.kinds[k]] = certificate.accuracy[k];
    json items = json::array();
    for (const auto& c : certificate.instances) {
      json scores = json::object(), correct = json::object();
      for (std::size_t k = 0; k < certificate.kinds.size(); ++k) {
        scores[certificate.kinds[k]] = json::array({c.scores[k][0], c.scores[k][1]});
        correct[certificate.kinds[k]] = static_cast<bool>(c.correct[k]);
      }
      items.push_back({{"source_id", c.source_id},
                       {"true_ate", json::array({c.true_ate_a, c.true_ate_b})},
                       {"scores", scores},
                       {"correct", correct},
                       {"attempts", c.attempts}});
    }
    return json{{"format", "rock-suite"},
                {"version", 1},
                {"seed", seed},
                {"spec", spec.to_json()},
                {"pipeline", suite_pipeline_options(spec).to_json()},
                {"dataset", dataset.to_json()},
                {"universe", universe->to_json()},
                {"certificate", {{"accuracy", acc}, {"instances", items}}}};
  }
};

namespace detail {

struct SuiteDraw {
  SyntheticWorld causal;
  SyntheticWorld spurious;
};

inline SuiteDraw draw_instance_worlds(const SuiteSpec& spec, std::size_t index, std::uint64_t stream) {
  SplitMix64 rng(stream);
  const std::string tag = "case " + std::to_string(index);
  const double gamma = spec.confounding;
  const double b0 = rng.uniform(0.10, 0.20);
  const double tau = rng.uniform(spec.effect_min, spec.effect_max);
  const double rho = rng.uniform(0.25, 0.40);
  const double rho_spurious = 1.25 * rho;

  const Event outcome("The outcome of " + tag + " came about.");
  auto make_world = [&](const std::string& side) {
    SyntheticWorld w(Event("Candidate " + side + " of " + tag + " took place."), outcome);
    w.seed = stream;
    for (std::size_t j = 0; j < spec.covariates; ++j)
      w.covariates.push_back({Event("Background " + std::to_string(j + 1) + " of " + tag + " " + side + " held."),
                              j == 0 ? rng.uniform(0.4, 0.6) : rng.uniform(0.3, 0.7)});
    return w;
  };
  SuiteDraw d{make_world("alpha"), make_world("beta")};

  auto baseline_fn = [&](const SyntheticWorld& w) {
    std::vector<double> weights(spec.covariates, 0.0);
    for (std::size_t j = 1; j < spec.covariates; ++j) weights[j] = rng.uniform(-0.02, 0.02);
    std::vector<double> base(w.pattern_count());
    for (std::size_t x = 0; x < base.size(); ++x) {
      double b = b0 + 0.6 * gamma * (SyntheticWorld::bit(x, 0) ? 1.0 : 0.0);
      for (std::size_t j = 1; j < spec.covariates; ++j) b += SyntheticWorld::bit(x, j) ? weights[j] : 0.0;
      base[x] = std::clamp(b, 0.0, 1.0);
    }
    return base;
  };

  std::size_t code_slot = 0;
  auto next_code = [&] { return all_control_codes()[code_slot++ % all_control_codes().size()]; };

  auto add_interventions = [&](SyntheticWorld& w, const std::string& side, const std::vector<double>& base,
                               bool decoys_on_confounder) {
    code_slot = 0;
    std::size_t serial = 0;
    for (std::size_t k = 0; k < spec.balanced_interventions; ++k) {
      const double delta = rng.uniform(-0.02, 0.02);
      InterventionSpec iv{Event("Variant " + std::to_string(++serial) + " of " + tag + " " + side + " happened."),
                          next_code(), {}, {}};
      for (std::size_t x = 0; x < w.pattern_count(); ++x) {
        iv.occurs.push_back(std::clamp(w.treatment_model[x] * (1.0 + delta), 0.0, 1.0));
        iv.followed.push_back(base[x]);
      }
      w.interventions.push_back(std::move(iv));
    }
    for (std::size_t k = 0; k < spec.decoy_interventions; ++k) {
      const double u = rng.uniform(0.6, 1.0);
      InterventionSpec iv{Event("Variant " + std::to_string(++serial) + " of " + tag + " " + side + " happened."),
                          next_code(), {}, {}};
      for (std::size_t x = 0; x < w.pattern_count(); ++x) {
        const bool on = SyntheticWorld::bit(x, 0) == decoys_on_confounder;
        iv.occurs.push_back(u * (on ? 0.9 : 0.05));
        iv.followed.push_back(base[x]);
      }
      w.interventions.push_back(std::move(iv));
    }
  };

  // Causal side: flat propensity, effect tau on top of the baseline.
  {
    SyntheticWorld& w = d.causal;
    const auto base = baseline_fn(w);
    for (std::size_t x = 0; x < w.pattern_count(); ++x) {
      w.treatment_model.push_back(rho);
      const PotentialOutcomeProbs po{std::min(1.0, base[x] + tau), base[x]};
      w.outcome_model.push_back({po, po});
    }
    add_interventions(w, "alpha", base, true);
  }
  // Spurious side: propensity rises with X1, no effect.
  {
    SyntheticWorld& w = d.spurious;
    const auto base = baseline_fn(w);
    for (std::size_t x = 0; x < w.pattern_count(); ++x) {
      const double tilt = SyntheticWorld::bit(x, 0) ? 1.0 : -1.0;
      w.treatment_model.push_back(std::clamp(rho_spurious * (1.0 + 0.9 * gamma * tilt), 0.0, 1.0));
      const PotentialOutcomeProbs po{base[x], base[x]};
      w.outcome_model.push_back({po, po});
    }
    add_interventions(w, "beta", base, false);
  }
  d.causal.validate();
  d.spurious.validate();
  return d;
}

inline BenchmarkInstance suite_instance(const SuiteSpec& spec, const SuiteDraw& d, bool causal_first,
                                        std::string source_id) {
  // Pick the question type that puts the choices in the E1 slot.
  const AskFor asks = spec.convention == RoleConvention::PremiseAsCause ? AskFor::Effect : AskFor::Cause;
  const Event& first = causal_first ? d.causal.treatment : d.spurious.treatment;
  const Event& second = causal_first ? d.spurious.treatment : d.causal.treatment;
  return BenchmarkInstance(d.causal.outcome, first, second, asks, causal_first ? Choice::ChoiceA : Choice::ChoiceB,
                           std::move(source_id));
}

inline InstanceCertificate certify_instance(const BenchmarkInstance& inst, const StubBackend& backend,
                                            const std::vector<std::pair<std::string, EstimatorConfig>>& configs,
                                            const PipelineOptions& options) {
  const StubBackend* b = &backend;
  ScoringPipeline<const StubBackend> pipeline(*b, options);
  pipeline.prepare(pipeline.queries_for({inst}));
  InstanceCertificate cert;
  cert.source_id = inst.source_id;
  for (const auto& [name, cfg] : configs) {
    const ChoiceOutcome out = pipeline.choose(inst, cfg);
    cert.scores.push_back({out.score_a.value, out.score_b.value});
    cert.correct.push_back(out.choice == inst.label);
  }
  return cert;
}

}  // namespace detail

/// Build and certify a suite. Instance i draws from its own stream of the
/// seed, so instances do not depend on each other.
inline ConfoundedSuite confounded_pair_suite(const SuiteSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto configs = certified_configs(spec);
  const PipelineOptions options = suite_pipeline_options(spec);

  auto universe = std::make_shared<StubUniverse>();
  universe->backend_id = "rock-stub-suite-" + to_hex(seed);
  universe->seed = seed;

  std::vector<BenchmarkInstance> instances;
  std::vector<std::size_t> attempts_used;
  for (std::size_t i = 0; i < spec.instances; ++i) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < spec.max_attempts && !accepted; ++attempt) {
      const std::uint64_t stream = hash_combine(hash_combine(seed, i), attempt);
      detail::SuiteDraw draw = detail::draw_instance_worlds(spec, i, stream);
      const bool causal_first = (SplitMix64(stream ^ 0x5bd1e995u).next() & 1u) != 0;
      BenchmarkInstance inst =
          detail::suite_instance(spec, draw, causal_first, "suite-" + to_hex(seed).substr(8) + "-" + std::to_string(i));

      StubUniverse local;
      local.seed = seed;
      local.add_world(draw.causal);
      local.add_world(draw.spurious);
      const StubBackend local_backend(std::move(local));
      const auto cert = detail::certify_instance(inst, local_backend, configs, options);
      // temporal, unbalanced wrong; l1, l2 right
      if (cert.correct[0] || cert.correct[1] || !cert.correct[2] || !cert.correct[3]) continue;

      universe->add_world(std::move(draw.causal));
      universe->add_world(std::move(draw.spurious));
      instances.push_back(std::move(inst));
      attempts_used.push_back(attempt + 1);
      accepted = true;
    }
    if (!accepted)
      throw SuiteConstructionFailed("instance " + std::to_string(i) + " found no certified world in " +
                                    std::to_string(spec.max_attempts) + " attempts (confounding " +
                                    std::to_string(spec.confounding) + ")");
  }

  ConfoundedSuite suite{spec, seed, Dataset("confounded-suite-" + to_hex(seed).substr(8), std::move(instances)),
                        universe, {}};

  // Certificate over the full universe, exactly as an evaluator will see it.
  const StubBackend backend(suite.universe);
  suite.certificate.kinds.clear();
  for (const auto& [name, cfg] : configs) suite.certificate.kinds.push_back(name);
  std::vector<std::size_t> correct(configs.size(), 0);
  const auto& worlds = suite.universe->worlds();
  for (std::size_t i = 0; i < suite.dataset.size(); ++i) {
    const auto& inst = suite.dataset.instances()[i];
    auto cert = detail::certify_instance(inst, backend, configs, options);
    const double ate_causal = true_ate(worlds[2 * i]);
    const double ate_spurious = true_ate(worlds[2 * i + 1]);
    const bool causal_first = inst.label == Choice::ChoiceA;
    cert.true_ate_a = causal_first ? ate_causal : ate_spurious;
    cert.true_ate_b = causal_first ? ate_spurious : ate_causal;
    cert.attempts = attempts_used[i];
    for (std::size_t k = 0; k < configs.size(); ++k) correct[k] += cert.correct[k] ? 1 : 0;
    suite.certificate.instances.push_back(std::move(cert));
  }
  for (std::size_t k = 0; k < configs.size(); ++k)
    suite.certificate.accuracy.push_back(static_cast<double>(correct[k]) / static_cast<double>(suite.dataset.size()));

  const auto& acc = suite.certificate.accuracy;
  if (acc[0] > spec.max_unbalanced_accuracy || acc[1] > spec.max_unbalanced_accuracy ||
      acc[2] < spec.min_balanced_accuracy || acc[3] < spec.min_balanced_accuracy)
    throw SuiteConstructionFailed("suite certificate misses its thresholds");
  return suite;
}

}  // namespace rock
