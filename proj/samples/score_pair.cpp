// Score one hand-built pair against an in-process stub: a flood that is
// either followed by a lost harvest or not, with two perturbed versions of
// the flood as interventions.

#include <cstdio>

#include "rock/rock.hpp"

using namespace rock;

int main() {
  const Event rain("Heavy rain fell for days.");
  const Event flood("The river flooded the valley.");
  const Event no_flood("The river did not flood the valley.");
  const Event lake("The lake flooded the valley.");
  const Event harvest("The harvest was lost.");

  StubUniverse u;
  u.backend_id = "sample-stub";
  u.add_scenario({flood, {rain}, {{no_flood.text(), ControlCode::Negation}, {lake.text(), ControlCode::Lexical}}});
  u.set_precedence(rain, flood, 0.5);
  u.set_precedence(rain, no_flood, 0.5);
  u.set_precedence(rain, lake, 0.25);
  u.set_precedence(flood, harvest, 0.8);
  u.set_precedence(no_flood, harvest, 0.2);
  u.set_precedence(lake, harvest, 0.6);
  StubBackend backend(std::move(u));

  PipelineOptions opts;
  opts.sampler.n = 10;
  opts.include_null = false;
  ScoringPipeline<StubBackend> pipeline(backend, opts);
  const CausalQuery q(flood, harvest);
  pipeline.prepare(std::vector<CausalQuery>{q});

  for (auto kind : {EstimatorKind::Temporal, EstimatorKind::Unbalanced, EstimatorKind::BalancedL1}) {
    EstimatorConfig cfg;
    cfg.kind = kind;
    cfg.match.epsilon = 0.5;
    const ScoreResult r = pipeline.score(q, cfg);
    std::printf("%-12s %.4f  matched %zu of %zu%s\n", to_string(kind), r.value, r.matched_count, r.candidate_count,
                r.fallback_used ? "  (fallback)" : "");
  }
}
