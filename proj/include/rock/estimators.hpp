#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/matching.hpp"
#include "rock/temporal.hpp"

namespace rock {

enum class EstimatorKind { BalancedL1, BalancedL2, Temporal, Unbalanced, Misspecified };

inline bool is_balanced(EstimatorKind k) noexcept {
  return k == EstimatorKind::BalancedL1 || k == EstimatorKind::BalancedL2;
}

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::BalancedL1: return "l1";
    case EstimatorKind::BalancedL2: return "l2";
    case EstimatorKind::Temporal: return "temporal";
    case EstimatorKind::Unbalanced: return "unbalanced";
    case EstimatorKind::Misspecified: return "misspecified";
  }
  return "?";
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
  for (auto k : {EstimatorKind::BalancedL1, EstimatorKind::BalancedL2, EstimatorKind::Temporal,
                 EstimatorKind::Unbalanced, EstimatorKind::Misspecified})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown estimator kind '" + std::string(s) + "'");
}

/// One point of the normalization lattice:
///  D direct matching, F temporality pre-filter, S score normalization,
///  Q propensity normalization, C co-occurrence stabilization, E estimand
///  normalization. D excludes S and Q; C excludes E.
struct NormalizationCombo {
  bool d = false, f = false, s = false, q = false, c = false, e = false;

  friend bool operator==(const NormalizationCombo&, const NormalizationCombo&) = default;

  /// Name of the first violated exclusion rule, or empty when valid.
  std::string violation() const {
    if (d && (s || q)) return "D (direct matching) excludes S and Q";
    if (c && e) return "C (co-occurrence stabilization) excludes E";
    return {};
  }
  bool valid() const { return violation().empty(); }

  std::string label() const {
    std::string out;
    if (d) out += 'D';
    if (f) out += 'F';
    if (s) out += 'S';
    if (q) out += 'Q';
    if (c) out += 'C';
    if (e) out += 'E';
    return out.empty() ? "none" : out;
  }

  /// Parse a subset string such as "FSQ" (or "none"). Does not validate.
  static NormalizationCombo parse(std::string_view text) {
    NormalizationCombo combo;
    if (text.empty() || text == "none") return combo;
    for (char ch : text) {
      bool* slot = nullptr;
      switch (ch) {
        case 'D': case 'd': slot = &combo.d; break;
        case 'F': case 'f': slot = &combo.f; break;
        case 'S': case 's': slot = &combo.s; break;
        case 'Q': case 'q': slot = &combo.q; break;
        case 'C': case 'c': slot = &combo.c; break;
        case 'E': case 'e': slot = &combo.e; break;
        default: throw ConfigError("unknown normalization flag '" + std::string(1, ch) + "' in '" + std::string(text) + "'");
      }
      if (*slot) throw ConfigError("normalization flag '" + std::string(1, ch) + "' repeated in '" + std::string(text) + "'");
      *slot = true;
    }
    return combo;
  }
};

/// All valid combos, ordered lexicographically on (D, F, S, Q, C, E) with
/// false before true.
inline std::vector<NormalizationCombo> enumerate_combos() {
  std::vector<NormalizationCombo> out;
  for (unsigned mask = 0; mask < 64; ++mask) {
    NormalizationCombo c{(mask & 32u) != 0, (mask & 16u) != 0, (mask & 8u) != 0,
                         (mask & 4u) != 0,  (mask & 2u) != 0,  (mask & 1u) != 0};
    if (c.valid()) out.push_back(c);
  }
  return out;
}

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::BalancedL2;
  MatchConfig match;
  ScoreNormFlags score_flags;
  std::size_t n_covariates = 100;

  NormalizationCombo combo() const {
    return {match.mode == MatchMode::Direct, match.f_prefilter, score_flags.s_enabled,
            match.q_normalized, score_flags.c_enabled, score_flags.e_enabled};
  }

  EstimatorConfig with_combo(const NormalizationCombo& c) const {
    EstimatorConfig out = *this;
    out.match.mode = c.d ? MatchMode::Direct : MatchMode::Propensity;
    out.match.f_prefilter = c.f;
    out.score_flags.s_enabled = c.s;
    out.match.q_normalized = c.q;
    out.score_flags.c_enabled = c.c;
    out.score_flags.e_enabled = c.e;
    return out;
  }

  /// The match config actually used: the norm follows the kind.
  MatchConfig effective_match() const {
    MatchConfig m = match;
    if (kind == EstimatorKind::BalancedL1) m.norm = Norm::L1;
    if (kind == EstimatorKind::BalancedL2) m.norm = Norm::L2;
    return m;
  }
};

inline void validate(const EstimatorConfig& cfg) {
  if (auto v = cfg.combo().violation(); !v.empty())
    throw LatticeViolation("normalizations '" + cfg.combo().label() + "' are invalid: " + v);
  if (!(cfg.match.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (cfg.n_covariates == 0) throw ConfigError("n_covariates must be positive");
}

/// Everything delta_score looked at, for reporting.
struct DeltaExplanation {
  ScoreResult result;
  double f_e1_e2 = 0.0;
  std::vector<Event> covariates;            // after prefix and pre-filter
  std::vector<Event> candidates;            // A (or X for the misspecified score)
  std::vector<double> distances;            // balanced kinds only
  std::vector<bool> kept;                   // membership in A'
  std::vector<double> f_candidate_e2;       // f(A, E2) per candidate
};

namespace detail {
template <PrecedenceFunction F>
double mean_precedence_to(const std::vector<Event>& events, const Event& e2, const F& f) {
  double sum = 0.0;
  for (const auto& a : events) sum += f(a, e2);
  return sum / static_cast<double>(events.size());
}
}  // namespace detail

/// Score one (E1, E2) query.
///
/// Flag routing: S and C apply to every precedence lookup; E only to the
/// f(., E2) terms of the estimand; the F pre-filter compares S-only
/// estimates (C would make f(X,E1) and f(E1,X) equal and empty the set).
///
/// Balanced kinds return f(E1,E2) with fallback_used when A' is empty,
/// including when the pre-filter leaves no covariates.
inline DeltaExplanation explain_delta(const CausalQuery& query, const CovariateSet& x_full,
                                      const InterventionSet& a_set, const TemporalScoreTable& table,
                                      const EstimatorConfig& cfg) {
  validate(cfg);
  const Event& e1 = query.e1();
  const Event& e2 = query.e2();

  ScoreNormFlags est_flags = cfg.score_flags;
  ScoreNormFlags match_flags = cfg.score_flags;
  match_flags.e_enabled = false;
  ScoreNormFlags filter_flags = match_flags;
  filter_flags.c_enabled = false;
  const TablePrecedence f_est{&table, est_flags};
  const TablePrecedence f_match{&table, match_flags};
  const TablePrecedence f_filter{&table, filter_flags};

  DeltaExplanation ex;
  ex.f_e1_e2 = f_est(e1, e2);
  ex.result.value = ex.f_e1_e2;

  const CovariateSet x_set = x_full.prefix(cfg.n_covariates);

  auto finish_with = [&](const std::vector<Event>& chosen, std::size_t candidates) {
    ex.result.candidate_count = candidates;
    ex.result.matched_count = chosen.size();
    if (chosen.empty()) {
      ex.result.value = ex.f_e1_e2;
      ex.result.fallback_used = true;
    } else {
      ex.result.value = ex.f_e1_e2 - detail::mean_precedence_to(chosen, e2, f_est);
    }
  };

  switch (cfg.kind) {
    case EstimatorKind::Temporal:
      return ex;
    case EstimatorKind::Unbalanced: {
      ex.candidates = a_set.events();
      ex.kept.assign(ex.candidates.size(), true);
      for (const auto& a : ex.candidates) ex.f_candidate_e2.push_back(f_est(a, e2));
      finish_with(ex.candidates, ex.candidates.size());
      return ex;
    }
    case EstimatorKind::Misspecified: {
      ex.covariates = x_set.events();
      ex.candidates = x_set.events();
      ex.kept.assign(ex.candidates.size(), true);
      for (const auto& x : ex.candidates) ex.f_candidate_e2.push_back(f_est(x, e2));
      finish_with(ex.candidates, ex.candidates.size());
      return ex;
    }
    case EstimatorKind::BalancedL1:
    case EstimatorKind::BalancedL2:
      break;
  }

  if (x_set.empty()) throw EmptyCovariates();
  ex.candidates = a_set.events();
  for (const auto& a : ex.candidates) ex.f_candidate_e2.push_back(f_est(a, e2));

  CovariateSet filtered;
  try {
    filtered = prefilter_covariates(x_set, e1, f_filter, cfg.match.f_prefilter);
  } catch (const EmptyAfterFilter&) {
    ex.kept.assign(ex.candidates.size(), false);
    finish_with({}, ex.candidates.size());
    return ex;
  }
  ex.covariates = filtered.events();

  const MatchResult m = matched_set(a_set, e1, filtered, f_match, cfg.effective_match());
  ex.distances = m.distances;
  ex.kept = m.kept;
  finish_with(m.matched.events(), a_set.size());
  return ex;
}

inline ScoreResult delta_score(const CausalQuery& query, const CovariateSet& x_set, const InterventionSet& a_set,
                               const TemporalScoreTable& table, const EstimatorConfig& cfg) {
  return explain_delta(query, x_set, a_set, table, cfg).result;
}

struct ChoiceOutcome {
  Choice choice = Choice::ChoiceA;
  ScoreResult score_a;
  ScoreResult score_b;
  bool tie = false;
};

/// Strictly higher score wins; an exact tie picks choice A and sets `tie`.
inline ChoiceOutcome decide(const ScoreResult& a, const ScoreResult& b) {
  ChoiceOutcome out{Choice::ChoiceA, a, b, false};
  if (b.value > a.value) out.choice = Choice::ChoiceB;
  else if (!(a.value > b.value)) out.tie = true;
  return out;
}

/// `scorer` maps a CausalQuery to a ScoreResult.
template <class Scorer>
ChoiceOutcome choose(const BenchmarkInstance& instance, Scorer&& scorer,
                     RoleConvention convention = RoleConvention::PremiseAsCause) {
  const ScoreResult a = scorer(query_roles(instance, Choice::ChoiceA, convention));
  const ScoreResult b = scorer(query_roles(instance, Choice::ChoiceB, convention));
  return decide(a, b);
}

}  // namespace rock
