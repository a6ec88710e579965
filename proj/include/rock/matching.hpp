#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/temporal.hpp"

namespace rock {

enum class CovariateOrigin { Sampled, Injected };

namespace detail {
inline void require_unique(const std::vector<Event>& events, const char* what) {
  std::unordered_set<EventId> seen;
  for (const auto& e : events)
    if (!seen.insert(e.id()).second) throw PreconditionError(std::string(what) + " contains duplicate event \"" + e.text() + '"');
}
}  // namespace detail

/// The sampled covariate events X, in sampling order.
class CovariateSet {
 public:
  CovariateSet() = default;
  explicit CovariateSet(std::vector<Event> events, CovariateOrigin origin = CovariateOrigin::Injected)
      : events_(std::move(events)), origin_(origin) {
    detail::require_unique(events_, "covariate set");
  }

  const std::vector<Event>& events() const noexcept { return events_; }
  CovariateOrigin origin() const noexcept { return origin_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  /// First n covariates in sampling order.
  CovariateSet prefix(std::size_t n) const {
    if (n >= events_.size()) return *this;
    return CovariateSet(std::vector<Event>(events_.begin(), events_.begin() + static_cast<std::ptrdiff_t>(n)),
                        origin_);
  }

 private:
  std::vector<Event> events_;
  CovariateOrigin origin_ = CovariateOrigin::Injected;
};

/// Candidate interventions of E1. The pipeline keeps E1 itself out; matching
/// accepts it so the self-match property can be exercised.
class InterventionSet {
 public:
  InterventionSet() = default;
  explicit InterventionSet(std::vector<Event> events) : events_(std::move(events)) {
    detail::require_unique(events_, "intervention set");
  }

  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  bool contains(const Event& e) const {
    for (const auto& a : events_)
      if (a == e) return true;
    return false;
  }

 private:
  std::vector<Event> events_;
};

struct PropensityVector {
  std::vector<double> coords;
  EventId subject = 0;
};

enum class Norm { L1, L2 };
enum class MatchMode { Propensity, Direct };

/// Reciprocal:  q_X = P(X(0)) / P(X(0), A(1))
/// Conditional: q_X = P(X(0), A(1)) / P(X(0))
enum class QForm { Reciprocal, Conditional };

struct MatchConfig {
  double epsilon = 0.05;
  Norm norm = Norm::L2;
  MatchMode mode = MatchMode::Propensity;
  bool q_normalized = false;  // Q
  bool f_prefilter = false;   // F
  QForm q_form = QForm::Reciprocal;
};

/// Keep X iff f(X, e1) > f(e1, X). Identity when `enabled` is false.
template <PrecedenceFunction F>
CovariateSet prefilter_covariates(const CovariateSet& x_set, const Event& e1, const F& f, bool enabled) {
  if (!enabled) return x_set;
  std::vector<Event> kept;
  for (const auto& x : x_set.events())
    if (f(x, e1) > f(e1, x)) kept.push_back(x);
  if (kept.empty() && !x_set.empty()) throw EmptyAfterFilter();
  return CovariateSet(std::move(kept), x_set.origin());
}

/// Ratio with the denominator floored. 0/0 is read as "both absent" and
/// maps to 1 so that a subject always matches itself exactly.
inline double floored_ratio(double num, double den) noexcept {
  if (den < kDenominatorFloor) {
    if (num < kDenominatorFloor) return 1.0;
    return num / kDenominatorFloor;
  }
  return num / den;
}

template <PrecedenceFunction F>
PropensityVector propensity_vector(const Event& subject, const Event& e1, const CovariateSet& x_set, const F& f,
                                   const MatchConfig& cfg) {
  const std::size_t n = x_set.size();
  std::vector<double> base(n), joint(n);  // P(X(0)), P(X(0), A(1))
  for (std::size_t i = 0; i < n; ++i) {
    const Event& x = x_set.events()[i];
    base[i] = f(x, e1);
    joint[i] = f(x, subject);
  }
  if (cfg.q_normalized) {
    double base_sum = 0.0, joint_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      base_sum += base[i];
      joint_sum += joint[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      base[i] = base_sum < kDenominatorFloor ? 0.0 : base[i] / base_sum;
      joint[i] = joint_sum < kDenominatorFloor ? 0.0 : joint[i] / joint_sum;
    }
  }
  PropensityVector q{std::vector<double>(n), subject.id()};
  for (std::size_t i = 0; i < n; ++i)
    q.coords[i] = cfg.q_form == QForm::Reciprocal ? floored_ratio(base[i], joint[i]) : floored_ratio(joint[i], base[i]);
  return q;
}

/// (f(subject, X))_X, matched without forming propensities.
template <PrecedenceFunction F>
PropensityVector direct_vector(const Event& subject, const CovariateSet& x_set, const F& f) {
  if (x_set.empty()) throw EmptyCovariates();
  PropensityVector v{{}, subject.id()};
  v.coords.reserve(x_set.size());
  for (const auto& x : x_set.events()) v.coords.push_back(f(subject, x));
  return v;
}

/// (1/|X|) * ||a - b||_p. The divisor is |X| for both norms.
inline double scaled_distance(const PropensityVector& a, const PropensityVector& b, Norm norm) {
  if (a.coords.size() != b.coords.size()) throw PreconditionError("propensity vectors differ in length");
  if (a.coords.empty()) throw EmptyCovariates();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    const double d = std::abs(a.coords[i] - b.coords[i]);
    acc += norm == Norm::L1 ? d : d * d;
  }
  const double len = norm == Norm::L1 ? acc : std::sqrt(acc);
  return len / static_cast<double>(a.coords.size());
}

struct MatchResult {
  InterventionSet matched;
  std::vector<double> distances;  // one per candidate, in candidate order
  std::vector<bool> kept;
};

template <PrecedenceFunction F>
PropensityVector matching_vector(const Event& subject, const Event& e1, const CovariateSet& x_set, const F& f,
                                 const MatchConfig& cfg) {
  return cfg.mode == MatchMode::Direct ? direct_vector(subject, x_set, f)
                                       : propensity_vector(subject, e1, x_set, f, cfg);
}

/// A' = {A in candidates : (1/|X|) ||q(x; A) - q(x; E1)||_p <= epsilon}, order kept.
template <PrecedenceFunction F>
MatchResult matched_set(const InterventionSet& candidates, const Event& e1, const CovariateSet& x_set, const F& f,
                        const MatchConfig& cfg) {
  if (x_set.empty()) throw EmptyCovariates();
  const PropensityVector reference = matching_vector(e1, e1, x_set, f, cfg);
  MatchResult out;
  std::vector<Event> matched;
  out.distances.reserve(candidates.size());
  out.kept.reserve(candidates.size());
  for (const auto& a : candidates.events()) {
    const double d = scaled_distance(matching_vector(a, e1, x_set, f, cfg), reference, cfg.norm);
    const bool keep = d <= cfg.epsilon;
    out.distances.push_back(d);
    out.kept.push_back(keep);
    if (keep) matched.push_back(a);
  }
  out.matched = InterventionSet(std::move(matched));
  return out;
}

inline const char* to_string(QForm q) { return q == QForm::Reciprocal ? "reciprocal" : "conditional"; }

inline QForm parse_q_form(std::string_view s) {
  if (s == "reciprocal" || s == "as-written-reciprocal") return QForm::Reciprocal;
  if (s == "conditional") return QForm::Conditional;
  throw ConfigError("unknown q-form '" + std::string(s) + "'");
}

}  // namespace rock
