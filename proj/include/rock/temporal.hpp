#pragma once

#include <cmath>
#include <concepts>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/hash.hpp"

namespace rock {

// Denominators below this make S, E and q coordinates fall back to their
// degenerate-case values instead of dividing.
inline constexpr double kDenominatorFloor = 1e-9;

/// Backend scores for the prompt "A <MASK> B".
struct RawDirectionalScores {
  double s_after = 0.0;
  double s_before = 0.0;

  bool valid() const noexcept {
    return std::isfinite(s_after) && std::isfinite(s_before) && s_after >= 0.0 && s_before >= 0.0;
  }
  friend bool operator==(const RawDirectionalScores&, const RawDirectionalScores&) = default;
};

struct PrecedenceEstimate {
  double value = 0.0;
  bool normalized = false;
};

/// Which raw coordinates feed s(A,B).
///  AfterForward:  s(A,B) = (s_after(A,B) + s_before(B,A)) / 2
///  BeforeForward: s(A,B) = (s_before(A,B) + s_after(B,A)) / 2
enum class Orientation { AfterForward, BeforeForward };

struct ScoreNormFlags {
  bool s_enabled = false;
  bool c_enabled = false;
  bool e_enabled = false;
  Orientation orientation = Orientation::AfterForward;
};

inline double symmetrize(const RawDirectionalScores& raw_ab, const RawDirectionalScores& raw_ba,
                         Orientation orientation = Orientation::AfterForward) noexcept {
  if (orientation == Orientation::AfterForward) return 0.5 * (raw_ab.s_after + raw_ba.s_before);
  return 0.5 * (raw_ab.s_before + raw_ba.s_after);
}

/// f(A,B) = s(A,B) / (s(A,B) + s(B,A) + s(A,N) + s(N,A)), N the null event.
inline PrecedenceEstimate score_normalize_S(double s_ab, double s_ba, double s_an, double s_na) noexcept {
  const double denom = s_ab + s_ba + s_an + s_na;
  if (denom < kDenominatorFloor) return {0.0, true};
  return {s_ab / denom, true};
}

inline double cooccurrence_stabilize_C(double f_xa, double f_ax) noexcept { return (f_ax + f_xa) / 2.0; }

inline double estimand_normalize_E(double f_ab, double f_ba) noexcept {
  const double denom = f_ab + f_ba;
  if (denom < kDenominatorFloor) return 0.0;
  return f_ab / denom;
}

struct EventPairHash {
  std::size_t operator()(const std::pair<EventId, EventId>& p) const noexcept {
    return static_cast<std::size_t>(hash_combine(p.first, p.second));
  }
};

/// Raw directional scores for every ordered pair a scoring run needs. Built
/// once from backend responses, then read-only.
class TemporalScoreTable {
 public:
  TemporalScoreTable() = default;
  explicit TemporalScoreTable(std::string provenance) : provenance_(std::move(provenance)) {}

  void insert(const Event& a, const Event& b, RawDirectionalScores raw) {
    if (!raw.valid()) throw MalformedResponse("raw scores must be finite and non-negative for " + describe(a, b));
    remember(a);
    remember(b);
    entries_[{a.id(), b.id()}] = raw;
  }

  /// Write raw coordinates so that flag-free precedence(a, b) equals `value`
  /// under `orientation`, leaving the coordinates read by (b, a) untouched.
  void set_precedence(const Event& a, const Event& b, double value,
                      Orientation orientation = Orientation::AfterForward) {
    auto& ab = slot(a, b);
    auto& ba = slot(b, a);
    if (orientation == Orientation::AfterForward) {
      ab.s_after = value;
      ba.s_before = value;
    } else {
      ab.s_before = value;
      ba.s_after = value;
    }
    if (!ab.valid() || !ba.valid()) throw PreconditionError("precedence must be finite and non-negative");
  }

  const RawDirectionalScores* find(const Event& a, const Event& b) const {
    auto it = entries_.find({a.id(), b.id()});
    return it == entries_.end() ? nullptr : &it->second;
  }

  const RawDirectionalScores& at(const Event& a, const Event& b) const {
    if (const auto* raw = find(a, b)) return *raw;
    throw MissingScore(describe(a, b));
  }

  bool contains(const Event& a, const Event& b) const { return find(a, b) != nullptr; }

  /// Add the other table's entries; existing entries win.
  void merge(const TemporalScoreTable& other) {
    for (const auto& [id, text] : other.texts_) texts_.try_emplace(id, text);
    for (const auto& [key, raw] : other.entries_) entries_.try_emplace(key, raw);
  }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  const std::unordered_map<std::pair<EventId, EventId>, RawDirectionalScores, EventPairHash>& entries() const {
    return entries_;
  }
  const std::string* text_of(EventId id) const {
    auto it = texts_.find(id);
    return it == texts_.end() ? nullptr : &it->second;
  }

 private:
  RawDirectionalScores& slot(const Event& a, const Event& b) {
    remember(a);
    remember(b);
    return entries_[{a.id(), b.id()}];
  }
  void remember(const Event& e) { texts_.try_emplace(e.id(), e.text()); }

  static std::string describe(const Event& a, const Event& b) {
    auto show = [](const Event& e) { return e.is_null() ? std::string("<null>") : '"' + e.text() + '"'; };
    return "(" + show(a) + ", " + show(b) + ")";
  }

  std::string provenance_;
  std::unordered_map<std::pair<EventId, EventId>, RawDirectionalScores, EventPairHash> entries_;
  std::unordered_map<EventId, std::string> texts_;
};

/// f(a, b) from the raw table. Stages run in a fixed order:
///   symmetrize -> S (score normalization) -> C (co-occurrence) -> E (estimand).
/// Each stage is skipped when its flag is off. S needs the (x, N) and (N, x)
/// entries for both a and b.
inline PrecedenceEstimate precedence(const TemporalScoreTable& table, const Event& a, const Event& b,
                                     const ScoreNormFlags& flags) {
  const Event null_event = Event::null();
  auto sym = [&](const Event& x, const Event& y) {
    return symmetrize(table.at(x, y), table.at(y, x), flags.orientation);
  };
  auto scored = [&](const Event& x, const Event& y) {
    if (!flags.s_enabled) return sym(x, y);
    return score_normalize_S(sym(x, y), sym(y, x), sym(x, null_event), sym(null_event, x)).value;
  };

  double value = scored(a, b);
  if (flags.c_enabled || flags.e_enabled) {
    double reverse = scored(b, a);
    if (flags.c_enabled) {
      // C is symmetric, so the reversed pair stabilizes to the same value.
      value = cooccurrence_stabilize_C(value, reverse);
      reverse = value;
    }
    if (flags.e_enabled) value = estimand_normalize_E(value, reverse);
  }
  return {value, flags.s_enabled || flags.e_enabled};
}

/// Anything that answers f(a, b) for a pair of events.
template <class F>
concept PrecedenceFunction = std::invocable<const F&, const Event&, const Event&> &&
                             std::convertible_to<std::invoke_result_t<const F&, const Event&, const Event&>, double>;

/// Binds a frozen table and a flag set into a PrecedenceFunction.
struct TablePrecedence {
  const TemporalScoreTable* table;
  ScoreNormFlags flags;

  double operator()(const Event& a, const Event& b) const { return precedence(*table, a, b, flags).value; }
};

inline const char* to_string(Orientation o) {
  return o == Orientation::AfterForward ? "after-forward" : "before-forward";
}

inline Orientation parse_orientation(std::string_view s) {
  // "as-written" and "swapped" name the same two readings.
  if (s == "after-forward" || s == "as-written") return Orientation::AfterForward;
  if (s == "before-forward" || s == "swapped") return Orientation::BeforeForward;
  throw ConfigError("unknown orientation '" + std::string(s) + "'");
}

}  // namespace rock
