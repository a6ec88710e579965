#include <gtest/gtest.h>

#include <algorithm>

#include "rock/matching.hpp"
#include "support/oracles.hpp"

using namespace rock;

namespace {

struct Hand {
  Event e1{"The river flooded."};
  Event x1{"Rain fell."};
  Event x2{"Snow melted."};
  Event a1{"The river did not flood."};
  Event a2{"The lake flooded."};
  TemporalScoreTable t;
  TablePrecedence f{&t, {}};
};

MatchConfig l1(double eps) {
  MatchConfig m;
  m.norm = Norm::L1;
  m.epsilon = eps;
  return m;
}

}  // namespace

TEST(Prefilter, StrictInequality) {
  Hand h;
  h.t.set_precedence(h.x1, h.e1, 0.7);
  h.t.set_precedence(h.e1, h.x1, 0.3);
  h.t.set_precedence(h.x2, h.e1, 0.5);
  h.t.set_precedence(h.e1, h.x2, 0.5);
  const CovariateSet xs({h.x1, h.x2});
  const auto kept = prefilter_covariates(xs, h.e1, h.f, true);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept.events()[0], h.x1);
  EXPECT_EQ(prefilter_covariates(xs, h.e1, h.f, false).size(), 2u);
}

TEST(Prefilter, EmptyResultThrows) {
  Hand h;
  h.t.set_precedence(h.x1, h.e1, 0.5);
  h.t.set_precedence(h.e1, h.x1, 0.5);
  EXPECT_THROW(prefilter_covariates(CovariateSet({h.x1}), h.e1, h.f, true), EmptyAfterFilter);
}

TEST(PropensityVector, SubjectE1IsAllOnes) {
  const auto rt = oracle::random_table(7);
  const auto table = rt.table();
  const TablePrecedence f{&table, {}};
  for (bool q : {false, true})
    for (QForm form : {QForm::Reciprocal, QForm::Conditional}) {
      MatchConfig m;
      m.q_normalized = q;
      m.q_form = form;
      const auto v = propensity_vector(rt.e1, rt.e1, CovariateSet(rt.xs), f, m);
      for (double c : v.coords) EXPECT_EQ(c, 1.0);
    }
}

TEST(PropensityVector, ReciprocalCoordinate) {
  Hand h;
  h.t.set_precedence(h.x1, h.e1, 0.5);
  h.t.set_precedence(h.x1, h.a1, 0.25);
  const auto v = propensity_vector(h.a1, h.e1, CovariateSet({h.x1}), h.f, MatchConfig{});
  EXPECT_DOUBLE_EQ(v.coords.at(0), 2.0);
}

TEST(PropensityVector, QNormalizationOfProportionalRows) {
  Hand h;
  h.t.set_precedence(h.x1, h.e1, 0.2);
  h.t.set_precedence(h.x2, h.e1, 0.6);
  h.t.set_precedence(h.x1, h.a1, 0.1);
  h.t.set_precedence(h.x2, h.a1, 0.3);
  MatchConfig m;
  m.q_normalized = true;
  const auto v = propensity_vector(h.a1, h.e1, CovariateSet({h.x1, h.x2}), h.f, m);
  EXPECT_NEAR(v.coords[0], 1.0, 1e-15);
  EXPECT_NEAR(v.coords[1], 1.0, 1e-15);
}

TEST(DirectVector, ReadsRowAndRejectsEmpty) {
  Hand h;
  h.t.set_precedence(h.a1, h.x1, 0.3);
  h.t.set_precedence(h.a1, h.x2, 0.9);
  const auto v = direct_vector(h.a1, CovariateSet({h.x1, h.x2}), h.f);
  EXPECT_EQ(v.coords, (std::vector<double>{0.3, 0.9}));
  EXPECT_THROW(direct_vector(h.a1, CovariateSet{}, h.f), EmptyCovariates);
}

TEST(MatchedSet, HandExample) {
  Hand h;
  h.t.set_precedence(h.x1, h.e1, 0.5);
  h.t.set_precedence(h.x1, h.a1, 0.5);
  h.t.set_precedence(h.x1, h.a2, 0.25);
  const auto m = matched_set(InterventionSet({h.a1, h.a2}), h.e1, CovariateSet({h.x1}), h.f, l1(0.5));
  EXPECT_EQ(m.distances, (std::vector<double>{0.0, 1.0}));
  ASSERT_EQ(m.matched.size(), 1u);
  EXPECT_EQ(m.matched.events()[0], h.a1);
}

TEST(MatchedSet, BoundaryIsInclusive) {
  Hand h;
  h.t.set_precedence(h.x1, h.e1, 0.5);
  h.t.set_precedence(h.x1, h.a2, 0.25);
  EXPECT_EQ(matched_set(InterventionSet({h.a2}), h.e1, CovariateSet({h.x1}), h.f, l1(1.0)).matched.size(), 1u);
  EXPECT_EQ(matched_set(InterventionSet({h.a2}), h.e1, CovariateSet({h.x1}), h.f, l1(0.999)).matched.size(), 0u);
}

TEST(MatchedSet, EmptyCovariatesThrows) {
  Hand h;
  EXPECT_THROW(matched_set(InterventionSet({h.a1}), h.e1, CovariateSet{}, h.f, MatchConfig{}), EmptyCovariates);
}

TEST(ScaledDistance, DivisorIsCovariateCountForBothNorms) {
  const PropensityVector a{{3.0, 4.0}, 0}, b{{0.0, 0.0}, 0};
  EXPECT_DOUBLE_EQ(scaled_distance(a, b, Norm::L1), 3.5);
  EXPECT_DOUBLE_EQ(scaled_distance(a, b, Norm::L2), 2.5);
}

TEST(Sets, RejectDuplicates) {
  const Event a("same"), b("  same ");
  EXPECT_THROW(CovariateSet({a, b}), PreconditionError);
  EXPECT_THROW(InterventionSet({a, b}), PreconditionError);
}

// ---- properties: 1000 random tables ----------------------------------------

namespace {

std::vector<bool> kept_for(const oracle::RandomTable& rt, const TemporalScoreTable& table, const std::vector<Event>& xs,
                           const MatchConfig& m, const ScoreNormFlags& fl) {
  return matched_set(InterventionSet(rt.as), rt.e1, CovariateSet(xs), TablePrecedence{&table, fl}, m).kept;
}

MatchConfig random_match(oracle::Gen& g) {
  MatchConfig m;
  m.norm = g.coin(0.5) ? Norm::L1 : Norm::L2;
  m.mode = g.coin(0.3) ? MatchMode::Direct : MatchMode::Propensity;
  m.q_normalized = m.mode == MatchMode::Propensity && g.coin(0.5);
  m.q_form = g.coin(0.5) ? QForm::Reciprocal : QForm::Conditional;
  return m;
}

}  // namespace

TEST(MatchingProperties, AgreesWithOracleDistance) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    oracle::Gen g(seed * 31);
    const auto rt = oracle::random_table(seed);
    const auto table = rt.table();
    MatchConfig m = random_match(g);
    ScoreNormFlags fl;
    fl.s_enabled = m.mode == MatchMode::Propensity && g.coin(0.5);
    fl.c_enabled = g.coin(0.3);
    const oracle::MatchSpec spec{0.0, m.norm == Norm::L1, m.mode == MatchMode::Direct, m.q_normalized,
                                 m.q_form == QForm::Reciprocal};
    const auto res = matched_set(InterventionSet(rt.as), rt.e1, CovariateSet(rt.xs), TablePrecedence{&table, fl}, m);
    for (std::size_t i = 0; i < rt.as.size(); ++i) {
      const double want = oracle::distance(rt, rt.xs, rt.as[i], {fl.s_enabled, fl.c_enabled, false, true}, spec);
      ASSERT_NEAR(res.distances[i], want, 1e-9 * std::max(1.0, want)) << "seed " << seed;
    }
  }
}

TEST(MatchingProperties, MonotoneInEpsilonAndPermutationInvariant) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    oracle::Gen g(seed);
    const auto rt = oracle::random_table(seed);
    const auto table = rt.table();
    MatchConfig m = random_match(g);
    ScoreNormFlags fl;
    fl.s_enabled = g.coin(0.5) && m.mode == MatchMode::Propensity;

    std::vector<double> eps{0.0};
    for (int i = 0; i < 6; ++i) eps.push_back(eps.back() + g.range(0.0, 0.4));
    std::vector<bool> prev(rt.as.size(), false);
    for (double e : eps) {
      m.epsilon = e;
      const auto kept = kept_for(rt, table, rt.xs, m, fl);
      for (std::size_t i = 0; i < kept.size(); ++i) ASSERT_TRUE(!prev[i] || kept[i]) << "seed " << seed;
      prev = kept;
    }

    m.epsilon = g.range(0.0, 1.0);
    auto shuffled = rt.xs;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[g.pick(i)]);
    ASSERT_EQ(kept_for(rt, table, rt.xs, m, fl), kept_for(rt, table, shuffled, m, fl)) << "seed " << seed;
  }
}

TEST(MatchingProperties, SelfMatchAndL1InsideL2) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    oracle::Gen g(seed + 5000);
    auto rt = oracle::random_table(seed);
    rt.as.push_back(rt.e1);
    const auto table = rt.table();
    MatchConfig m = random_match(g);
    m.epsilon = g.coin(0.3) ? 0.0 : g.range(0.0, 0.5);
    const TablePrecedence f{&table, {}};
    const auto res = matched_set(InterventionSet(rt.as), rt.e1, CovariateSet(rt.xs), f, m);
    ASSERT_TRUE(res.kept.back());
    ASSERT_EQ(res.distances.back(), 0.0);

    MatchConfig m1 = m, m2 = m;
    m1.norm = Norm::L1;
    m2.norm = Norm::L2;
    const auto k1 = matched_set(InterventionSet(rt.as), rt.e1, CovariateSet(rt.xs), f, m1).kept;
    const auto k2 = matched_set(InterventionSet(rt.as), rt.e1, CovariateSet(rt.xs), f, m2).kept;
    for (std::size_t i = 0; i < k1.size(); ++i) ASSERT_TRUE(!k1[i] || k2[i]);
  }
}

TEST(MatchingProperties, QNormalizationMakesScaledRowsMatchExactly) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    oracle::Gen g(seed);
    const Event e1("treatment"), a("scaled twin");
    std::vector<Event> xs;
    TemporalScoreTable t;
    const double scale = g.range(0.1, 3.0);
    for (int i = 0; i < 1 + static_cast<int>(g.pick(6)); ++i) {
      xs.emplace_back("cov " + std::to_string(i));
      const double v = g.range(0.05, 0.3);
      t.set_precedence(xs.back(), e1, v);
      t.set_precedence(xs.back(), a, v * scale);
    }
    MatchConfig m;
    m.q_normalized = true;
    m.epsilon = 0.0;
    m.q_form = g.coin(0.5) ? QForm::Reciprocal : QForm::Conditional;
    const auto res = matched_set(InterventionSet({a}), e1, CovariateSet(xs), TablePrecedence{&t, {}}, m);
    ASSERT_NEAR(res.distances[0], 0.0, 1e-15) << "seed " << seed;
  }
}
