#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "rock/errors.hpp"
#include "rock/hash.hpp"

namespace rock {

/// Trim both ends and collapse internal whitespace runs to one space.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

using EventId = std::uint64_t;

// Semantic-role triple; advisory metadata only, never used for equality.
struct EventStructure {
  std::string arg0;
  std::string verb;
  std::string arg1;

  friend bool operator==(const EventStructure&, const EventStructure&) = default;
};

/// A natural-language event. Identity is the normalized surface text; the
/// null event is the one event with empty text.
class Event {
 public:
  explicit Event(std::string text, std::optional<EventStructure> structure = std::nullopt)
      : text_(std::move(text)), structure_(std::move(structure)) {
    const std::string norm = normalize_text(text_);
    if (norm.empty()) throw PreconditionError("event text is empty; use Event::null() for the null event");
    id_ = fnv1a64(norm);
  }

  static Event null() { return Event(); }

  const std::string& text() const noexcept { return text_; }
  std::string normalized() const { return normalize_text(text_); }
  const std::optional<EventStructure>& structure() const noexcept { return structure_; }
  EventId id() const noexcept { return id_; }
  bool is_null() const noexcept { return id_ == null_id(); }

  static constexpr EventId null_id() noexcept { return fnv1a64(""); }

  friend bool operator==(const Event& a, const Event& b) noexcept { return a.id_ == b.id_; }

 private:
  Event() : id_(null_id()) {}

  std::string text_;
  std::optional<EventStructure> structure_;
  EventId id_;
};

enum class AskFor { Cause, Effect };
enum class Choice { ChoiceA, ChoiceB };

/// How benchmark questions map onto (E1, E2).
///  PremiseAsCause: a "cause" question puts the premise in the E1 slot and
///    the choice in E2; an "effect" question puts the choice in E1.
///  ChoiceAsCause: the swap of the above, so a "cause" question scores the
///    choice as E1.
enum class RoleConvention { PremiseAsCause, ChoiceAsCause };

struct BenchmarkInstance {
  Event premise;
  Event choice_a;
  Event choice_b;
  AskFor asks_for;
  Choice label;
  std::string source_id;

  BenchmarkInstance(Event premise_, Event choice_a_, Event choice_b_, AskFor asks_for_, Choice label_,
                    std::string source_id_)
      : premise(std::move(premise_)),
        choice_a(std::move(choice_a_)),
        choice_b(std::move(choice_b_)),
        asks_for(asks_for_),
        label(label_),
        source_id(std::move(source_id_)) {
    if (choice_a == choice_b) throw DataError("instance " + source_id + ": both choices are the same event");
  }

  const Event& choice(Choice c) const noexcept { return c == Choice::ChoiceA ? choice_a : choice_b; }
};

struct CausalQuery {
  Event cause_candidate;   // E1
  Event effect_candidate;  // E2

  CausalQuery(Event e1, Event e2) : cause_candidate(std::move(e1)), effect_candidate(std::move(e2)) {
    if (cause_candidate.is_null() || effect_candidate.is_null())
      throw PreconditionError("causal query events must be non-null");
  }

  const Event& e1() const noexcept { return cause_candidate; }
  const Event& e2() const noexcept { return effect_candidate; }
};

struct ScoreResult {
  double value = 0.0;
  std::size_t matched_count = 0;
  std::size_t candidate_count = 0;
  bool fallback_used = false;
};

inline CausalQuery query_roles(const BenchmarkInstance& instance, Choice choice,
                               RoleConvention convention = RoleConvention::PremiseAsCause) {
  const Event& picked = instance.choice(choice);
  bool premise_first = instance.asks_for == AskFor::Cause;
  if (convention == RoleConvention::ChoiceAsCause) premise_first = !premise_first;
  return premise_first ? CausalQuery(instance.premise, picked) : CausalQuery(picked, instance.premise);
}

inline const char* to_string(AskFor a) { return a == AskFor::Cause ? "cause" : "effect"; }
inline const char* to_string(Choice c) { return c == Choice::ChoiceA ? "A" : "B"; }
inline const char* to_string(RoleConvention r) {
  return r == RoleConvention::PremiseAsCause ? "premise-as-cause" : "choice-as-cause";
}

inline RoleConvention parse_role_convention(std::string_view s) {
  if (s == "premise-as-cause") return RoleConvention::PremiseAsCause;
  if (s == "choice-as-cause") return RoleConvention::ChoiceAsCause;
  throw ConfigError("unknown role convention '" + std::string(s) + "'");
}

}  // namespace rock
