#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rock/datasets.hpp"
#include "rock/errors.hpp"
#include "rock/estimators.hpp"
#include "rock/pipeline.hpp"

namespace rock {

inline double random_baseline_std(std::size_t n) { return std::sqrt(0.25 / static_cast<double>(n)); }

/// Fixed-point rendering used in CSV and printed reports.
inline std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline json config_to_json(const EstimatorConfig& cfg) {
  const MatchConfig m = cfg.effective_match();
  return json{{"kind", to_string(cfg.kind)},
              {"norms", cfg.combo().label()},
              {"epsilon", m.epsilon},
              {"p", m.norm == Norm::L1 ? 1 : 2},
              {"n_covariates", cfg.n_covariates},
              {"q_form", to_string(m.q_form)},
              {"orientation", to_string(cfg.score_flags.orientation)}};
}

struct InstanceRecord {
  std::string source_id;
  Choice chosen = Choice::ChoiceA;
  bool correct = false;
  bool tie = false;
  ScoreResult score_a;
  ScoreResult score_b;
};

struct EvalReport {
  std::string dataset;
  std::string dataset_hash;
  std::string backend_id;
  json config;
  std::string config_fingerprint;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double random_baseline_std = 0.0;
  std::vector<InstanceRecord> per_instance;

  json to_json() const {
    json rows = json::array();
    for (const auto& r : per_instance) {
      auto score = [](const ScoreResult& s) {
        return json{{"value", s.value},
                    {"matched", s.matched_count},
                    {"candidates", s.candidate_count},
                    {"fallback", s.fallback_used}};
      };
      rows.push_back({{"source_id", r.source_id},
                      {"chosen", to_string(r.chosen)},
                      {"correct", r.correct},
                      {"tie", r.tie},
                      {"a", score(r.score_a)},
                      {"b", score(r.score_b)}});
    }
    return json{{"dataset", dataset},
                {"dataset_hash", dataset_hash},
                {"backend_id", backend_id},
                {"config", config},
                {"config_fingerprint", config_fingerprint},
                {"n", n},
                {"correct", correct},
                {"accuracy", accuracy},
                {"random_baseline_std", random_baseline_std},
                {"per_instance", rows}};
  }

  /// Stable text: identical inputs give identical bytes.
  std::string serialize() const { return to_json().dump(2) + "\n"; }
};

inline void write_instances_csv(std::ostream& out, const EvalReport& r) {
  out << "source_id,chosen,correct,tie,score_a,score_b,matched_a,matched_b,fallback_a,fallback_b\n";
  for (const auto& i : r.per_instance)
    out << i.source_id << ',' << to_string(i.chosen) << ',' << i.correct << ',' << i.tie << ','
        << fixed(i.score_a.value, 6) << ',' << fixed(i.score_b.value, 6) << ',' << i.score_a.matched_count << ','
        << i.score_b.matched_count << ',' << i.score_a.fallback_used << ',' << i.score_b.fallback_used << '\n';
}

enum class SweepAxis { Epsilon, CovariateCount };

inline const char* to_string(SweepAxis a) { return a == SweepAxis::Epsilon ? "epsilon" : "n_covariates"; }

/// {0} followed by 50 log-spaced points from 1e-4 to 1.
inline std::vector<double> default_epsilon_grid() {
  std::vector<double> grid{0.0};
  for (int i = 0; i < 50; ++i) grid.push_back(std::pow(10.0, -4.0 + 4.0 * i / 49.0));
  return grid;
}

struct SweepPoint {
  double x = 0.0;
  EvalReport report;
};

/// Binomial standard error of an accuracy over n instances.
inline double accuracy_std(double acc, std::size_t n) {
  return std::sqrt(acc * (1.0 - acc) / static_cast<double>(n));
}

inline void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points) {
  out << to_string(axis) << ",accuracy,std_band,n\n";
  for (const auto& p : points) {
    std::ostringstream x;
    if (axis == SweepAxis::Epsilon) x << fixed(p.x, 6);
    else x << static_cast<std::size_t>(p.x);
    out << x.str() << ',' << fixed(p.report.accuracy, 6) << ',' << fixed(accuracy_std(p.report.accuracy, p.report.n), 6)
        << ',' << p.report.n << '\n';
  }
}

struct ComboSweep {
  std::vector<double> grid;
  std::vector<NormalizationCombo> combos;
  std::vector<std::vector<double>> accuracy;  // [combo][grid point]
  std::vector<double> best;                   // per grid point, max over combos
  std::vector<std::size_t> best_combo;        // first combo reaching it
};

inline void write_combo_sweep_csv(std::ostream& out, const ComboSweep& s) {
  out << "epsilon";
  for (const auto& c : s.combos) out << ',' << c.label();
  out << ",best,best_combo\n";
  for (std::size_t g = 0; g < s.grid.size(); ++g) {
    out << fixed(s.grid[g], 6);
    for (std::size_t c = 0; c < s.combos.size(); ++c) out << ',' << fixed(s.accuracy[c][g], 6);
    out << ',' << fixed(s.best[g], 6) << ',' << s.combos[s.best_combo[g]].label() << '\n';
  }
}

struct AblationTable {
  std::vector<NormalizationCombo> combos;
  std::vector<EstimatorKind> kinds;
  std::vector<std::vector<double>> accuracy;  // [combo][kind]
  std::vector<std::size_t> best;              // per kind, first combo with the max
  std::vector<std::size_t> worst;             // per kind, first combo with the min
};

/// One row per combo, one column per kind, then the kinds for which the row
/// is best and worst.
inline void write_ablation_csv(std::ostream& out, const AblationTable& t) {
  out << "norms";
  for (auto k : t.kinds) out << ',' << to_string(k);
  out << ",best_for,worst_for\n";
  for (std::size_t c = 0; c < t.combos.size(); ++c) {
    out << t.combos[c].label();
    for (std::size_t k = 0; k < t.kinds.size(); ++k) out << ',' << fixed(t.accuracy[c][k], 6);
    std::string best, worst;
    for (std::size_t k = 0; k < t.kinds.size(); ++k) {
      if (t.best[k] == c) best += std::string(best.empty() ? "" : ";") + to_string(t.kinds[k]);
      if (t.worst[k] == c) worst += std::string(worst.empty() ? "" : ";") + to_string(t.kinds[k]);
    }
    out << ',' << best << ',' << worst << '\n';
  }
}

/// Runs evaluations of one dataset against one prepared pipeline. The first
/// evaluation fetches everything; later ones (other kinds, epsilons, combos,
/// prefixes) reuse the frozen table.
template <ProtocolBackend B>
class Evaluator {
 public:
  Evaluator(B& backend, const Dataset& dataset, PipelineOptions options, std::size_t workers = 0)
      : pipeline_(backend, std::move(options)), dataset_(&dataset), workers_(workers) {
    if (workers_ == 0) workers_ = std::max(1u, std::thread::hardware_concurrency());
  }

  /// Sample, perturb and fetch every score the dataset needs. Backend
  /// failures propagate; nothing is skipped.
  void prepare() {
    if (prepared_) return;
    pipeline_.prepare(pipeline_.queries_for(dataset_->instances()));
    prepared_ = true;
  }

  EvalReport evaluate(const EstimatorConfig& cfg) {
    validate(cfg);
    prepare();
    const auto& instances = dataset_->instances();
    std::vector<InstanceRecord> records(instances.size());
    parallel_for(instances.size(), [&](std::size_t i) {
      const auto& inst = instances[i];
      const ChoiceOutcome out = pipeline_.choose(inst, cfg);
      records[i] = InstanceRecord{inst.source_id, out.choice, out.choice == inst.label, out.tie,
                                  out.score_a, out.score_b};
    });

    EvalReport r;
    r.dataset = dataset_->name();
    r.dataset_hash = dataset_->content_hash();
    r.backend_id = pipeline_.backend_id();
    r.config = config_to_json(cfg);
    r.config["pipeline"] = pipeline_.options().to_json();
    r.config["backend_id"] = r.backend_id;
    r.config_fingerprint = to_hex(fnv1a64(canonical(r.config)));
    r.n = records.size();
    for (const auto& rec : records) r.correct += rec.correct ? 1 : 0;
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
    r.random_baseline_std = random_baseline_std(r.n);
    r.per_instance = std::move(records);
    return r;
  }

  std::vector<SweepPoint> sweep(const EstimatorConfig& base, SweepAxis axis, const std::vector<double>& grid) {
    if (grid.empty()) throw PreconditionError("sweep grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1])) throw PreconditionError("sweep grid must be strictly increasing");
    std::vector<SweepPoint> out;
    for (double x : grid) {
      EstimatorConfig cfg = base;
      if (axis == SweepAxis::Epsilon) {
        cfg.match.epsilon = x;
      } else {
        if (x < 1.0 || x != std::floor(x)) throw PreconditionError("covariate counts must be positive integers");
        cfg.n_covariates = static_cast<std::size_t>(x);
      }
      out.push_back({x, evaluate(cfg)});
    }
    return out;
  }

  ComboSweep sweep_combos(const EstimatorConfig& base, const std::vector<double>& grid) {
    ComboSweep s;
    s.grid = grid;
    s.combos = enumerate_combos();
    for (const auto& combo : s.combos) {
      std::vector<double> curve;
      for (const auto& p : sweep(base.with_combo(combo), SweepAxis::Epsilon, grid)) curve.push_back(p.report.accuracy);
      s.accuracy.push_back(std::move(curve));
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      std::size_t arg = 0;
      for (std::size_t c = 1; c < s.combos.size(); ++c)
        if (s.accuracy[c][g] > s.accuracy[arg][g]) arg = c;
      s.best.push_back(s.accuracy[arg][g]);
      s.best_combo.push_back(arg);
    }
    return s;
  }

  /// Every valid combo against every kind. `epsilons`, when given, holds
  /// one epsilon per kind (only the balanced kinds read it).
  AblationTable ablate(const EstimatorConfig& base, const std::vector<EstimatorKind>& kinds,
                       const std::vector<double>& epsilons = {}) {
    if (kinds.empty()) throw PreconditionError("ablation needs at least one kind");
    if (!epsilons.empty() && epsilons.size() != kinds.size())
      throw PreconditionError("ablation needs one epsilon per kind");
    AblationTable t;
    t.combos = enumerate_combos();
    t.kinds = kinds;
    for (const auto& combo : t.combos) {
      std::vector<double> row;
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        EstimatorConfig cfg = base.with_combo(combo);
        cfg.kind = kinds[k];
        if (!epsilons.empty()) cfg.match.epsilon = epsilons[k];
        row.push_back(evaluate(cfg).accuracy);
      }
      t.accuracy.push_back(std::move(row));
    }
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      std::size_t best = 0, worst = 0;
      for (std::size_t c = 1; c < t.combos.size(); ++c) {
        if (t.accuracy[c][k] > t.accuracy[best][k]) best = c;
        if (t.accuracy[c][k] < t.accuracy[worst][k]) worst = c;
      }
      t.best.push_back(best);
      t.worst.push_back(worst);
    }
    return t;
  }

  ScoringPipeline<B>& pipeline() noexcept { return pipeline_; }
  const Dataset& dataset() const noexcept { return *dataset_; }

 private:
  template <class Fn>
  void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(workers_, n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
              fn(i);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
              next.store(n);
              return;
            }
          }
        });
    }
    if (failure) std::rethrow_exception(failure);
  }

  ScoringPipeline<B> pipeline_;
  const Dataset* dataset_;
  std::size_t workers_;
  bool prepared_ = false;
};

/// Run manifest: what a report was computed from, plus wall-clock timings.
/// Timings live here rather than in the report so reports stay comparable.
inline json run_manifest(const EvalReport& r, const std::string& command, double seconds) {
  return json{{"command", command},
              {"config_fingerprint", r.config_fingerprint},
              {"config", r.config},
              {"dataset", r.dataset},
              {"dataset_hash", r.dataset_hash},
              {"backend_id", r.backend_id},
              {"timings", {{"seconds", seconds}}}};
}

}  // namespace rock
