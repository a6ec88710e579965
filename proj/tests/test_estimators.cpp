#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "rock/estimators.hpp"
#include "support/oracles.hpp"

using namespace rock;

namespace {

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

EstimatorConfig config(EstimatorKind kind, double eps, const char* norms = "none") {
  EstimatorConfig c;
  c.kind = kind;
  c.match.epsilon = eps;
  return c.with_combo(NormalizationCombo::parse(norms));
}

// Delta-hat straight from its definition, with the flag routing applied by
// hand: estimand terms use every flag, matching drops E, the pre-filter
// uses S alone.
struct OracleScore {
  double value;
  bool fallback;
};

OracleScore oracle_delta(const oracle::RandomTable& rt, const EstimatorConfig& cfg) {
  const auto combo = cfg.combo();
  const oracle::Flags est{combo.s, combo.c, combo.e, true};
  const oracle::Flags match{combo.s, combo.c, false, true};
  const oracle::Flags filter{combo.s, false, false, true};
  const double head = oracle::f(rt, rt.e1, rt.e2, est);
  auto mean_to_e2 = [&](const std::vector<Event>& v) {
    double s = 0.0;
    for (const auto& a : v) s += oracle::f(rt, a, rt.e2, est);
    return s / static_cast<double>(v.size());
  };
  std::vector<Event> xs(rt.xs.begin(), rt.xs.begin() + static_cast<long>(std::min(cfg.n_covariates, rt.xs.size())));
  switch (cfg.kind) {
    case EstimatorKind::Temporal: return {head, false};
    case EstimatorKind::Unbalanced: return rt.as.empty() ? OracleScore{head, true} : OracleScore{head - mean_to_e2(rt.as), false};
    case EstimatorKind::Misspecified: return {head - mean_to_e2(xs), false};
    default: break;
  }
  if (combo.f) {
    std::vector<Event> kept;
    for (const auto& x : xs)
      if (oracle::f(rt, x, rt.e1, filter) > oracle::f(rt, rt.e1, x, filter)) kept.push_back(x);
    xs = kept;
  }
  if (xs.empty()) return {head, true};
  const oracle::MatchSpec spec{cfg.match.epsilon, cfg.kind == EstimatorKind::BalancedL1, combo.d, combo.q,
                               cfg.match.q_form == QForm::Reciprocal};
  std::vector<Event> chosen;
  for (const auto& a : rt.as)
    if (oracle::distance(rt, xs, a, match, spec) <= spec.epsilon) chosen.push_back(a);
  if (chosen.empty()) return {head, true};
  return {head - mean_to_e2(chosen), false};
}

ScoreResult run(const oracle::RandomTable& rt, const TemporalScoreTable& t, const EstimatorConfig& cfg) {
  return delta_score(CausalQuery(rt.e1, rt.e2), CovariateSet(rt.xs), InterventionSet(rt.as), t, cfg);
}

}  // namespace

TEST(Lattice, ThirtyValidCombos) {
  const auto combos = enumerate_combos();
  EXPECT_EQ(combos.size(), 30u);
  std::set<std::string> labels;
  for (const auto& c : combos) {
    EXPECT_TRUE(c.valid());
    labels.insert(c.label());
  }
  EXPECT_EQ(labels.size(), 30u);
  EXPECT_TRUE(labels.count("none"));
  EXPECT_FALSE(labels.count("DS"));
  EXPECT_FALSE(labels.count("CE"));
  EXPECT_FALSE(labels.count("DQ"));
}

TEST(Lattice, CountMatchesIndependentEnumeration) {
  // Brute force over all 64 subsets with the two exclusion rules spelled out.
  int n = 0;
  for (int m = 0; m < 64; ++m) {
    const bool d = m & 1, s = m & 4, q = m & 8, c = m & 16, e = m & 32;
    if (d && (s || q)) continue;
    if (c && e) continue;
    ++n;
  }
  EXPECT_EQ(n, 30);
}

TEST(Lattice, ParseAndValidate) {
  EXPECT_EQ(NormalizationCombo::parse("fsq").label(), "FSQ");
  EXPECT_THROW(NormalizationCombo::parse("X"), ConfigError);
  EXPECT_THROW(NormalizationCombo::parse("SS"), ConfigError);
  EXPECT_THROW(validate(config(EstimatorKind::BalancedL2, 0.1, "DS")), LatticeViolation);
  EXPECT_THROW(validate(config(EstimatorKind::BalancedL2, 0.1, "CE")), LatticeViolation);
  EXPECT_THROW(validate(config(EstimatorKind::BalancedL2, -1.0)), ConfigError);
  EXPECT_NO_THROW(validate(config(EstimatorKind::BalancedL2, 0.1, "DFC")));
}

TEST(Lattice, ComboRoundTripsThroughConfig) {
  for (const auto& c : enumerate_combos()) EXPECT_EQ(EstimatorConfig{}.with_combo(c).combo(), c);
}

TEST(DeltaScore, HandExample) {
  const Event e1("The river flooded."), e2("The harvest was lost."), x1("Rain fell."), a1("The river held."),
      a2("The lake flooded.");
  TemporalScoreTable t;
  t.set_precedence(x1, e1, 0.5);
  t.set_precedence(x1, a1, 0.5);
  t.set_precedence(x1, a2, 0.25);
  t.set_precedence(e1, e2, 0.8);
  t.set_precedence(a1, e2, 0.2);
  t.set_precedence(a2, e2, 0.6);
  for (const auto& [a, b] : std::vector<std::pair<Event, Event>>{{e1, x1}, {a1, x1}, {a2, x1}, {e2, e1}, {e2, a1}, {e2, a2}})
    t.set_precedence(a, b, 0.0);
  const auto r = delta_score(CausalQuery(e1, e2), CovariateSet({x1}), InterventionSet({a1, a2}), t,
                             config(EstimatorKind::BalancedL1, 0.5));
  EXPECT_NEAR(r.value, 0.6, 1e-12);
  EXPECT_EQ(r.matched_count, 1u);
  EXPECT_EQ(r.candidate_count, 2u);
  EXPECT_FALSE(r.fallback_used);

  const auto zero = delta_score(CausalQuery(e1, e2), CovariateSet({x1}), InterventionSet({a2}), t,
                                config(EstimatorKind::BalancedL1, 0.0));
  EXPECT_EQ(zero.value, 0.8);
  EXPECT_TRUE(zero.fallback_used);
}

TEST(DeltaScore, IndistinguishableInterventionGivesZero) {
  const Event e1("e one"), e2("e two"), x1("x one"), a1("a one");
  TemporalScoreTable t;
  for (const auto& [a, b] : std::vector<std::pair<Event, Event>>{{x1, e1}, {x1, a1}, {e1, x1}, {a1, x1}})
    t.set_precedence(a, b, 0.3);
  t.set_precedence(e1, e2, 0.8);
  t.set_precedence(a1, e2, 0.8);
  t.set_precedence(e2, e1, 0.0);
  t.set_precedence(e2, a1, 0.0);
  const auto r = delta_score(CausalQuery(e1, e2), CovariateSet({x1}), InterventionSet({a1}), t,
                             config(EstimatorKind::BalancedL2, 0.0));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.matched_count, 1u);
}

TEST(DeltaScore, EmptyCovariatesForBalancedKinds) {
  const Event e1("e one"), e2("e two");
  TemporalScoreTable t;
  t.set_precedence(e1, e2, 0.5);
  t.set_precedence(e2, e1, 0.5);
  EXPECT_THROW(delta_score(CausalQuery(e1, e2), CovariateSet{}, InterventionSet{}, t, config(EstimatorKind::BalancedL2, 1)),
               EmptyCovariates);
  EXPECT_NO_THROW(delta_score(CausalQuery(e1, e2), CovariateSet{}, InterventionSet{}, t, config(EstimatorKind::Temporal, 1)));
}

TEST(Choose, DecisionAndTieBreak) {
  auto s = [](double v) { return ScoreResult{v, 0, 0, false}; };
  EXPECT_EQ(decide(s(0.6), s(0.1)).choice, Choice::ChoiceA);
  EXPECT_FALSE(decide(s(0.6), s(0.1)).tie);
  EXPECT_EQ(decide(s(0.1), s(0.6)).choice, Choice::ChoiceB);
  const auto tie = decide(s(0.3), s(0.3));
  EXPECT_EQ(tie.choice, Choice::ChoiceA);
  EXPECT_TRUE(tie.tie);
}

TEST(Choose, ArgmaxInvariantUnderPositiveAffineMaps) {
  oracle::Gen g(99);
  for (int i = 0; i < 2000; ++i) {
    const double a = g.coin(0.1) ? 0.25 : g.range(-1, 1);
    const double b = g.coin(0.1) ? a : g.range(-1, 1);
    const double alpha = std::ldexp(1.0, static_cast<int>(g.pick(9)) - 4);  // powers of two keep ties exact
    const double beta = static_cast<double>(g.pick(5)) - 2.0;
    const auto base = decide({a, 0, 0, false}, {b, 0, 0, false});
    const auto mapped = decide({alpha * a + beta, 0, 0, false}, {alpha * b + beta, 0, 0, false});
    if (std::fabs(a - b) < 1e-9 && a != b) continue;  // rounding of the shift may merge near-ties
    ASSERT_EQ(base.choice, mapped.choice);
    ASSERT_EQ(base.tie, mapped.tie);
  }
}

TEST(QueryRoles, ConventionsSwapSlots) {
  const BenchmarkInstance cause(Event("premise"), Event("alt one"), Event("alt two"), AskFor::Cause, Choice::ChoiceA, "1");
  const BenchmarkInstance effect(Event("premise"), Event("alt one"), Event("alt two"), AskFor::Effect, Choice::ChoiceA, "2");
  EXPECT_EQ(query_roles(cause, Choice::ChoiceA).e1(), Event("premise"));
  EXPECT_EQ(query_roles(effect, Choice::ChoiceB).e1(), Event("alt two"));
  EXPECT_EQ(query_roles(cause, Choice::ChoiceA, RoleConvention::ChoiceAsCause).e1(), Event("alt one"));
  EXPECT_EQ(query_roles(effect, Choice::ChoiceA, RoleConvention::ChoiceAsCause).e2(), Event("alt one"));
}

// ---- properties over random tables ----------------------------------------

TEST(EstimatorProperties, MatchesOracleOnEveryComboAndKind) {
  const EstimatorKind kinds[] = {EstimatorKind::BalancedL1, EstimatorKind::BalancedL2, EstimatorKind::Temporal,
                                 EstimatorKind::Unbalanced, EstimatorKind::Misspecified};
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto rt = oracle::random_table(seed);
    const auto t = rt.table();
    oracle::Gen g(seed);
    for (const auto& combo : enumerate_combos())
      for (auto kind : kinds) {
        EstimatorConfig cfg = config(kind, g.range(0.0, 0.6)).with_combo(combo);
        cfg.n_covariates = 1 + g.pick(rt.xs.size() + 1);
        cfg.match.q_form = g.coin(0.5) ? QForm::Reciprocal : QForm::Conditional;
        const auto got = run(rt, t, cfg);
        const auto want = oracle_delta(rt, cfg);
        ASSERT_NEAR(got.value, want.value, 1e-9) << "seed " << seed << " " << combo.label() << " " << to_string(kind);
        if (is_balanced(kind)) {
          ASSERT_EQ(got.fallback_used, want.fallback) << "seed " << seed << " " << combo.label();
        }
      }
  }
}

TEST(EstimatorProperties, LimitIdentitiesBitForBit) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto rt = oracle::random_table(seed);
    const auto t = rt.table();
    for (const auto& combo : enumerate_combos()) {
      if (combo.f) continue;  // an emptied pre-filter routes to the fallback instead
      for (auto kind : {EstimatorKind::BalancedL1, EstimatorKind::BalancedL2}) {
        EstimatorConfig cfg = config(kind, 0.0).with_combo(combo);
        const auto ex = explain_delta(CausalQuery(rt.e1, rt.e2), CovariateSet(rt.xs), InterventionSet(rt.as), t, cfg);
        const double max_d = *std::max_element(ex.distances.begin(), ex.distances.end());
        const double min_d = *std::min_element(ex.distances.begin(), ex.distances.end());

        EstimatorConfig wide = cfg;
        wide.match.epsilon = max_d;
        EstimatorConfig unb = cfg;
        unb.kind = EstimatorKind::Unbalanced;
        ASSERT_TRUE(bit_equal(run(rt, t, wide).value, run(rt, t, unb).value)) << seed << ' ' << combo.label();

        if (min_d > 0.0) {
          EstimatorConfig tmp = cfg;
          tmp.kind = EstimatorKind::Temporal;
          const auto r = run(rt, t, cfg);
          ASSERT_TRUE(r.fallback_used);
          ASSERT_TRUE(bit_equal(r.value, run(rt, t, tmp).value)) << seed << ' ' << combo.label();
        }
      }
    }
  }
}

TEST(EstimatorProperties, UnbalancedAndMisspecifiedIgnoreEpsilonAndNorm) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto rt = oracle::random_table(seed);
    const auto t = rt.table();
    oracle::Gen g(seed);
    for (auto kind : {EstimatorKind::Unbalanced, EstimatorKind::Misspecified}) {
      EstimatorConfig a = config(kind, 0.0), b = config(kind, g.range(0.0, 5.0));
      b.match.norm = Norm::L1;
      b.match.q_form = QForm::Conditional;
      ASSERT_TRUE(bit_equal(run(rt, t, a).value, run(rt, t, b).value));
    }
  }
}

TEST(EstimatorProperties, ValueInUnitIntervalForNormalizedTables) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto rt = oracle::random_table(seed);
    const auto t = rt.table();
    for (const auto& combo : enumerate_combos()) {
      if (!combo.s && !combo.e) continue;
      for (auto kind : {EstimatorKind::BalancedL2, EstimatorKind::Unbalanced, EstimatorKind::Misspecified}) {
        const double v = run(rt, t, config(kind, 0.3).with_combo(combo)).value;
        ASSERT_GE(v, -1.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
}
