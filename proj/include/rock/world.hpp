#pragma once

// Finite discrete worlds with known causal ground truth.
//
// A unit draws covariate indicators x (independent Bernoulli, pattern bit j
// is x_j) at time 0. At time 1 the treatment E1 occurs with probability
// treatment_model[x]; each intervention A_k occurs with probability
// occurs[x]. The outcome E2 follows at time 2: after E1 with the r1
// probability, otherwise per the r0 probability; after A_k with
// followed[x]. The precedence law Pr(A < B) is the joint probability that
// both occur with A first.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/hash.hpp"
#include "rock/matching.hpp"
#include "rock/protocol.hpp"

namespace rock {

struct CovariateSpec {
  Event event;
  double marginal = 0.5;
};

struct PotentialOutcomeProbs {
  double r1 = 0.0;  // Pr(r1 = 1)
  double r0 = 0.0;  // Pr(r0 = 1)
};

struct InterventionSpec {
  Event event;
  ControlCode code = ControlCode::Lexical;
  std::vector<double> occurs;    // per pattern
  std::vector<double> followed;  // Pr(E2 after A | pattern, A occurred)
};

class SyntheticWorld {
 public:
  SyntheticWorld(Event treatment, Event outcome) : treatment(std::move(treatment)), outcome(std::move(outcome)) {}

  std::vector<CovariateSpec> covariates;
  Event treatment;
  Event outcome;
  std::vector<double> treatment_model;                               // Pr(E1 | x)
  std::vector<std::array<PotentialOutcomeProbs, 2>> outcome_model;   // [x][t]
  std::vector<InterventionSpec> interventions;
  double null_mass = 0.05;
  std::uint64_t seed = 0;

  std::size_t covariate_count() const noexcept { return covariates.size(); }
  std::size_t pattern_count() const noexcept { return std::size_t{1} << covariates.size(); }

  static bool bit(std::size_t pattern, std::size_t j) noexcept { return ((pattern >> j) & 1u) != 0; }

  double pattern_probability(std::size_t pattern) const {
    double p = 1.0;
    for (std::size_t j = 0; j < covariates.size(); ++j)
      p *= bit(pattern, j) ? covariates[j].marginal : 1.0 - covariates[j].marginal;
    return p;
  }

  /// Pr(E2 follows the time-1 slot | x) as observed.
  double observed_outcome(std::size_t pattern) const {
    const double p = treatment_model[pattern];
    return p * outcome_model[pattern][1].r1 + (1.0 - p) * outcome_model[pattern][0].r0;
  }

  double treatment_rate() const {
    double s = 0.0;
    for (std::size_t x = 0; x < pattern_count(); ++x) s += pattern_probability(x) * treatment_model[x];
    return s;
  }

  /// Outcome rows equal across treatment arms: potential outcomes are
  /// independent of treatment given the covariates.
  bool strongly_ignorable() const {
    for (const auto& row : outcome_model)
      if (row[0].r1 != row[1].r1 || row[0].r0 != row[1].r0) return false;
    return true;
  }

  bool contains(const Event& e) const { return role_of(e).has_value(); }

  /// Pr(a < b), or nullopt when either event is foreign to this world.
  std::optional<double> precedence(const Event& a, const Event& b) const {
    const auto ra = role_of(a);
    const auto rb = role_of(b);
    if (!ra || !rb) return std::nullopt;
    if (a == b) return 0.0;
    if (ra->kind == Role::Null || rb->kind == Role::Null) return null_mass;

    auto sum_over = [&](auto&& term) {
      double s = 0.0;
      for (std::size_t x = 0; x < pattern_count(); ++x) s += pattern_probability(x) * term(x);
      return s;
    };
    if (ra->kind == Role::Covariate) {
      const std::size_t j = ra->index;
      auto with_x = [&](auto&& g) { return sum_over([&](std::size_t x) { return bit(x, j) ? g(x) : 0.0; }); };
      switch (rb->kind) {
        case Role::Treatment: return with_x([&](std::size_t x) { return treatment_model[x]; });
        case Role::Intervention:
          return with_x([&](std::size_t x) { return interventions[rb->index].occurs[x]; });
        case Role::Outcome: return with_x([&](std::size_t x) { return observed_outcome(x); });
        default: return 0.0;
      }
    }
    if (rb->kind == Role::Outcome) {
      if (ra->kind == Role::Treatment)
        return sum_over([&](std::size_t x) { return treatment_model[x] * outcome_model[x][1].r1; });
      if (ra->kind == Role::Intervention) {
        const auto& iv = interventions[ra->index];
        return sum_over([&](std::size_t x) { return iv.occurs[x] * iv.followed[x]; });
      }
    }
    return 0.0;
  }

  void validate() const {
    if (covariates.size() > 16) throw PreconditionError("world has too many covariates to enumerate");
    const std::size_t n = pattern_count();
    auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
    auto check_rows = [&](const std::vector<double>& v, const std::string& what) {
      if (v.size() != n) throw PreconditionError(what + " needs " + std::to_string(n) + " rows");
      for (double p : v)
        if (!prob(p)) throw PreconditionError(what + " has a value outside [0,1]");
    };
    for (const auto& c : covariates)
      if (!prob(c.marginal)) throw PreconditionError("covariate marginal outside [0,1]");
    check_rows(treatment_model, "treatment_model");
    if (outcome_model.size() != n) throw PreconditionError("outcome_model needs one row per pattern");
    for (const auto& row : outcome_model)
      for (const auto& o : row)
        if (!prob(o.r1) || !prob(o.r0)) throw PreconditionError("outcome_model has a value outside [0,1]");
    for (const auto& iv : interventions) {
      check_rows(iv.occurs, "intervention occurs");
      check_rows(iv.followed, "intervention followed");
    }
    if (!(null_mass >= 0.0 && null_mass <= 0.5)) throw PreconditionError("null_mass must lie in [0, 0.5]");
    std::unordered_set<EventId> ids{treatment.id(), outcome.id()};
    if (treatment.is_null() || outcome.is_null() || ids.size() != 2)
      throw PreconditionError("treatment and outcome must be distinct non-null events");
    for (const auto& c : covariates)
      if (!ids.insert(c.event.id()).second) throw PreconditionError("duplicate world event \"" + c.event.text() + '"');
    for (const auto& iv : interventions)
      if (!ids.insert(iv.event.id()).second) throw PreconditionError("duplicate world event \"" + iv.event.text() + '"');
  }

  std::vector<Event> events() const {
    std::vector<Event> out;
    for (const auto& c : covariates) out.push_back(c.event);
    out.push_back(treatment);
    for (const auto& iv : interventions) out.push_back(iv.event);
    out.push_back(outcome);
    return out;
  }

 private:
  enum class Role { Null, Covariate, Treatment, Intervention, Outcome };
  struct RoleRef {
    Role kind;
    std::size_t index;
  };

  std::optional<RoleRef> role_of(const Event& e) const {
    if (e.is_null()) return RoleRef{Role::Null, 0};
    if (e == treatment) return RoleRef{Role::Treatment, 0};
    if (e == outcome) return RoleRef{Role::Outcome, 0};
    for (std::size_t j = 0; j < covariates.size(); ++j)
      if (covariates[j].event == e) return RoleRef{Role::Covariate, j};
    for (std::size_t k = 0; k < interventions.size(); ++k)
      if (interventions[k].event == e) return RoleRef{Role::Intervention, k};
    return std::nullopt;
  }
};

/// Delta = E[r1 - r0], by enumeration over patterns and treatment arms.
inline double true_ate(const SyntheticWorld& w) {
  double ate = 0.0;
  for (std::size_t x = 0; x < w.pattern_count(); ++x) {
    const double px = w.pattern_probability(x);
    const double p = w.treatment_model[x];
    const auto& row = w.outcome_model[x];
    ate += px * (p * (row[1].r1 - row[1].r0) + (1.0 - p) * (row[0].r1 - row[0].r0));
  }
  return ate;
}

/// Temporal propensity of a covariate pattern: coordinate j is
/// Pr(E1 | X_j = x_j) read off the precedence law (Conditional), or its
/// floored reciprocal.
inline std::vector<double> pattern_propensity(const SyntheticWorld& w, std::size_t pattern, QForm form) {
  const double rate = w.treatment_rate();
  std::vector<double> q(w.covariate_count());
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double pi = w.covariates[j].marginal;
    const double joint = *w.precedence(w.covariates[j].event, w.treatment);
    double cond = 0.0;
    if (SyntheticWorld::bit(pattern, j)) cond = pi > 0.0 ? joint / pi : 0.0;
    else cond = pi < 1.0 ? (rate - joint) / (1.0 - pi) : 0.0;
    q[j] = form == QForm::Conditional ? cond : floored_ratio(1.0, cond);
  }
  return q;
}

struct PropositionReport {
  double delta_true = 0.0;
  double lhs = 0.0;                  // E[(E[r|q] - Delta)^2], direct
  double lhs_total_variance = 0.0;   // Var(r) - E[Var(r|q)]
  double rho = 0.0;
  double bound = 1.0;                // 1 - rho^2
  std::size_t groups = 0;
  bool holds = false;
};

inline constexpr double kPropositionSlack = 1e-12;

/// Check E[(E[r|q(x)] - Delta)^2] <= 1 - rho^2 by exact enumeration, with
/// r = r1 - r0, r1 and r0 independent given (x, t), and q-vectors grouped
/// after rounding to 12 decimals.
inline PropositionReport verify_proposition(const SyntheticWorld& w, QForm form = QForm::Reciprocal) {
  w.validate();
  struct Point {
    double prob;
    int r;
    std::size_t group;
  };
  std::map<std::vector<double>, std::size_t> group_index;
  std::vector<double> group_mass, group_sum;
  std::vector<Point> support;

  for (std::size_t x = 0; x < w.pattern_count(); ++x) {
    const double px = w.pattern_probability(x);
    if (px <= 0.0) continue;
    std::vector<double> key = pattern_propensity(w, x, form);
    for (double& v : key) v = std::nearbyint(v * 1e12) / 1e12;
    auto [it, inserted] = group_index.try_emplace(std::move(key), group_mass.size());
    if (inserted) {
      group_mass.push_back(0.0);
      group_sum.push_back(0.0);
    }
    const std::size_t g = it->second;
    for (int t = 0; t <= 1; ++t) {
      const double pt = t == 1 ? w.treatment_model[x] : 1.0 - w.treatment_model[x];
      if (pt <= 0.0) continue;
      const auto& o = w.outcome_model[x][static_cast<std::size_t>(t)];
      for (int r1 = 0; r1 <= 1; ++r1) {
        const double p1 = r1 ? o.r1 : 1.0 - o.r1;
        for (int r0 = 0; r0 <= 1; ++r0) {
          const double p0 = r0 ? o.r0 : 1.0 - o.r0;
          const double p = px * pt * p1 * p0;
          if (p <= 0.0) continue;
          support.push_back({p, r1 - r0, g});
          group_mass[g] += p;
          group_sum[g] += p * (r1 - r0);
        }
      }
    }
  }

  PropositionReport rep;
  rep.groups = group_mass.size();
  for (const auto& pt : support) rep.delta_true += pt.prob * pt.r;

  std::vector<double> cond_mean(group_mass.size(), 0.0);
  for (std::size_t g = 0; g < group_mass.size(); ++g) {
    if (group_mass[g] > 0.0) cond_mean[g] = group_sum[g] / group_mass[g];
    rep.lhs += group_mass[g] * (cond_mean[g] - rep.delta_true) * (cond_mean[g] - rep.delta_true);
  }

  double var_r = 0.0, within = 0.0;
  rep.rho = support.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const auto& pt : support) {
    const double dev = pt.r - rep.delta_true;
    const double res = pt.r - cond_mean[pt.group];
    var_r += pt.prob * dev * dev;
    within += pt.prob * res * res;
    rep.rho = std::min(rep.rho, std::abs(res));
  }
  rep.lhs_total_variance = var_r - within;
  rep.bound = 1.0 - rep.rho * rep.rho;
  rep.holds = rep.lhs <= rep.bound + kPropositionSlack;
  return rep;
}

/// A random enumerable world. Roughly one in five worlds gets
/// deterministic outcome rows, and one in four is strongly ignorable.
inline SyntheticWorld random_world(std::uint64_t seed, std::size_t max_covariates = 4,
                                   std::size_t max_interventions = 3) {
  SplitMix64 rng(seed);
  const std::string tag = "w" + to_hex(seed).substr(8);
  SyntheticWorld w(Event("Treatment event of " + tag + "."), Event("Outcome event of " + tag + "."));
  w.seed = seed;
  const std::size_t k = 1 + rng.below(std::max<std::size_t>(max_covariates, 1));
  for (std::size_t j = 0; j < k; ++j)
    w.covariates.push_back({Event("Covariate " + std::to_string(j) + " of " + tag + "."), rng.uniform(0.05, 0.95)});
  const bool deterministic = rng.uniform() < 0.2;
  const bool ignorable = rng.uniform() < 0.25;
  auto outcome_prob = [&] { return deterministic ? static_cast<double>(rng.below(2)) : rng.uniform(); };
  for (std::size_t x = 0; x < w.pattern_count(); ++x) {
    w.treatment_model.push_back(rng.uniform(0.02, 0.98));
    std::array<PotentialOutcomeProbs, 2> row{};
    row[0] = {outcome_prob(), outcome_prob()};
    row[1] = ignorable ? row[0] : PotentialOutcomeProbs{outcome_prob(), outcome_prob()};
    w.outcome_model.push_back(row);
  }
  const std::size_t m = rng.below(max_interventions + 1);
  for (std::size_t i = 0; i < m; ++i) {
    InterventionSpec iv{Event("Intervention " + std::to_string(i) + " of " + tag + "."),
                        all_control_codes()[rng.below(all_control_codes().size())],
                        {},
                        {}};
    for (std::size_t x = 0; x < w.pattern_count(); ++x) {
      iv.occurs.push_back(rng.uniform());
      iv.followed.push_back(rng.uniform());
    }
    w.interventions.push_back(std::move(iv));
  }
  w.validate();
  return w;
}

// ---- JSON ----------------------------------------------------------------

inline constexpr int kWorldFormatVersion = 1;

inline json to_json(const SyntheticWorld& w) {
  json covs = json::array();
  for (const auto& c : w.covariates) covs.push_back({{"text", c.event.text()}, {"marginal", c.marginal}});
  json outcomes = json::array();
  for (const auto& row : w.outcome_model)
    outcomes.push_back(json::array({json::array({row[0].r1, row[0].r0}), json::array({row[1].r1, row[1].r0})}));
  json ivs = json::array();
  for (const auto& iv : w.interventions)
    ivs.push_back({{"text", iv.event.text()}, {"code", to_string(iv.code)}, {"occurs", iv.occurs}, {"followed", iv.followed}});
  return json{{"format", "rock-world"},
              {"version", kWorldFormatVersion},
              {"seed", w.seed},
              {"null_mass", w.null_mass},
              {"treatment", w.treatment.text()},
              {"outcome", w.outcome.text()},
              {"covariates", covs},
              {"treatment_model", w.treatment_model},
              {"outcome_model", outcomes},
              {"interventions", ivs}};
}

inline SyntheticWorld world_from_json(const json& j) {
  try {
    if (j.at("format") != "rock-world") throw ParseError("not a world file");
    if (j.at("version").get<int>() != kWorldFormatVersion)
      throw ParseError("unsupported world format version " + j.at("version").dump());
    SyntheticWorld w(Event(j.at("treatment").get<std::string>()), Event(j.at("outcome").get<std::string>()));
    w.seed = j.at("seed").get<std::uint64_t>();
    w.null_mass = j.at("null_mass").get<double>();
    for (const auto& c : j.at("covariates"))
      w.covariates.push_back({Event(c.at("text").get<std::string>()), c.at("marginal").get<double>()});
    w.treatment_model = j.at("treatment_model").get<std::vector<double>>();
    for (const auto& row : j.at("outcome_model")) {
      std::array<PotentialOutcomeProbs, 2> r{};
      for (std::size_t t = 0; t < 2; ++t) r[t] = {row.at(t).at(0).get<double>(), row.at(t).at(1).get<double>()};
      w.outcome_model.push_back(r);
    }
    for (const auto& iv : j.at("interventions")) {
      auto code = try_parse_control_code(iv.at("code").get<std::string>());
      if (!code) throw ParseError("unknown control code in world file");
      w.interventions.push_back({Event(iv.at("text").get<std::string>()), *code,
                                 iv.at("occurs").get<std::vector<double>>(),
                                 iv.at("followed").get<std::vector<double>>()});
    }
    w.validate();
    return w;
  } catch (const json::exception& e) {
    throw ParseError(std::string("world file: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ParseError(std::string("world file: ") + e.what());
  }
}

}  // namespace rock
