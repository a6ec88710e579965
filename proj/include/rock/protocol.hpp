#pragma once

// HTTP+JSON wire protocol between the engine and a model backend.
//
//   POST /v1/generate   GenerateRequest  -> GenerateResponse
//   POST /v1/mask_fill  MaskFillRequest  -> MaskFillResponse
//   POST /v1/perturb    PerturbRequest   -> PerturbResponse
//   GET  /v1/info                        -> BackendInfo
//
// Field names are snake_case. The canonical serialization (used for cache
// keys) is compact JSON with lexicographically sorted keys, UTF-8.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rock/errors.hpp"
#include "rock/event.hpp"

namespace rock {

using json = nlohmann::json;

namespace endpoint {
inline constexpr std::string_view kGenerate = "/v1/generate";
inline constexpr std::string_view kMaskFill = "/v1/mask_fill";
inline constexpr std::string_view kPerturb = "/v1/perturb";
inline constexpr std::string_view kInfo = "/v1/info";
}  // namespace endpoint

inline constexpr std::string_view kMaskToken = "<MASK>";

enum class ControlCode { Negation, Lexical, Resemantic, Quantifier, Insert, Restructure, Shuffle, Delete };

inline const std::vector<ControlCode>& all_control_codes() {
  static const std::vector<ControlCode> codes{ControlCode::Negation,   ControlCode::Lexical,
                                              ControlCode::Resemantic, ControlCode::Quantifier,
                                              ControlCode::Insert,     ControlCode::Restructure,
                                              ControlCode::Shuffle,    ControlCode::Delete};
  return codes;
}

inline const char* to_string(ControlCode c) {
  switch (c) {
    case ControlCode::Negation: return "negation";
    case ControlCode::Lexical: return "lexical";
    case ControlCode::Resemantic: return "resemantic";
    case ControlCode::Quantifier: return "quantifier";
    case ControlCode::Insert: return "insert";
    case ControlCode::Restructure: return "restructure";
    case ControlCode::Shuffle: return "shuffle";
    case ControlCode::Delete: return "delete";
  }
  return "?";
}

inline std::optional<ControlCode> try_parse_control_code(std::string_view s) {
  for (auto c : all_control_codes())
    if (s == to_string(c)) return c;
  return std::nullopt;
}

inline std::string canonical(const json& j) { return j.dump(); }

struct GenerateRequest {
  std::string prompt;
  int n = 100;
  int max_new_tokens = 30;
  double temperature = 0.9;
  std::vector<std::string> stop;
  std::optional<std::int64_t> seed;
};

struct GenerateResponse {
  std::vector<std::string> completions;
};

struct MaskFillRequest {
  std::string template_text;  // "template" on the wire
  std::vector<std::string> candidates;
  int top_k = 5;
};

struct MaskFillResponse {
  std::map<std::string, double> scores;
  std::map<std::string, bool> covered;
};

struct PerturbRequest {
  std::string text;
  std::vector<ControlCode> control_codes;
  int n_per_code = 3;
};

struct Perturbation {
  std::string text;
  ControlCode code;
};

struct PerturbResponse {
  std::vector<Perturbation> perturbations;
};

struct BackendInfo {
  std::string backend_id;
  bool generate = true;
  bool mask_fill = true;
  bool perturb = true;
  std::string model_fingerprint;
};

// ---- serialization -------------------------------------------------------

namespace detail {
[[noreturn]] inline void schema_fail(std::string_view what, const std::string& msg) {
  throw MalformedResponse(std::string(what) + ": " + msg);
}

template <class T>
T field(const json& j, const char* key, std::string_view what) {
  if (!j.is_object()) schema_fail(what, "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) schema_fail(what, std::string("missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    schema_fail(what, std::string("field '") + key + "' has the wrong type");
  }
}
}  // namespace detail

inline json to_json(const GenerateRequest& r) {
  json j{{"prompt", r.prompt},
         {"n", r.n},
         {"max_new_tokens", r.max_new_tokens},
         {"temperature", r.temperature},
         {"stop", r.stop}};
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  return j;
}

inline GenerateRequest generate_request_from_json(const json& j) {
  constexpr std::string_view what = "generate request";
  GenerateRequest r;
  r.prompt = detail::field<std::string>(j, "prompt", what);
  r.n = detail::field<int>(j, "n", what);
  r.max_new_tokens = detail::field<int>(j, "max_new_tokens", what);
  r.temperature = detail::field<double>(j, "temperature", what);
  r.stop = detail::field<std::vector<std::string>>(j, "stop", what);
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) r.seed = detail::field<std::int64_t>(j, "seed", what);
  if (r.n < 1) detail::schema_fail(what, "n must be >= 1");
  if (r.max_new_tokens < 1) detail::schema_fail(what, "max_new_tokens must be >= 1");
  if (!(r.temperature > 0.0)) detail::schema_fail(what, "temperature must be > 0");
  return r;
}

inline json to_json(const GenerateResponse& r) { return json{{"completions", r.completions}}; }

inline GenerateResponse generate_response_from_json(const json& j) {
  return {detail::field<std::vector<std::string>>(j, "completions", "generate response")};
}

inline json to_json(const MaskFillRequest& r) {
  return json{{"template", r.template_text}, {"candidates", r.candidates}, {"top_k", r.top_k}};
}

inline std::size_t count_mask_tokens(std::string_view t) {
  std::size_t count = 0;
  for (auto pos = t.find(kMaskToken); pos != std::string_view::npos; pos = t.find(kMaskToken, pos + 1)) ++count;
  return count;
}

inline MaskFillRequest mask_fill_request_from_json(const json& j) {
  constexpr std::string_view what = "mask_fill request";
  MaskFillRequest r;
  r.template_text = detail::field<std::string>(j, "template", what);
  r.candidates = detail::field<std::vector<std::string>>(j, "candidates", what);
  r.top_k = detail::field<int>(j, "top_k", what);
  if (count_mask_tokens(r.template_text) != 1) detail::schema_fail(what, "template must contain exactly one <MASK>");
  if (r.candidates.empty()) detail::schema_fail(what, "candidates must be non-empty");
  if (r.top_k < 1) detail::schema_fail(what, "top_k must be >= 1");
  return r;
}

inline json to_json(const MaskFillResponse& r) { return json{{"scores", r.scores}, {"covered", r.covered}}; }

inline MaskFillResponse mask_fill_response_from_json(const json& j) {
  constexpr std::string_view what = "mask_fill response";
  MaskFillResponse r;
  r.scores = detail::field<std::map<std::string, double>>(j, "scores", what);
  r.covered = detail::field<std::map<std::string, bool>>(j, "covered", what);
  for (const auto& [k, v] : r.scores)
    if (!std::isfinite(v) || v < 0.0) detail::schema_fail(what, "score for '" + k + "' is not a finite non-negative number");
  return r;
}

inline json to_json(const PerturbRequest& r) {
  json codes = json::array();
  for (auto c : r.control_codes) codes.push_back(to_string(c));
  return json{{"text", r.text}, {"control_codes", codes}, {"n_per_code", r.n_per_code}};
}

inline ControlCode control_code_field(const std::string& s, std::string_view what) {
  auto c = try_parse_control_code(s);
  if (!c) detail::schema_fail(what, "unknown control code '" + s + "'");
  return *c;
}

inline PerturbRequest perturb_request_from_json(const json& j) {
  constexpr std::string_view what = "perturb request";
  PerturbRequest r;
  r.text = detail::field<std::string>(j, "text", what);
  for (const auto& s : detail::field<std::vector<std::string>>(j, "control_codes", what))
    r.control_codes.push_back(control_code_field(s, what));
  r.n_per_code = detail::field<int>(j, "n_per_code", what);
  if (r.control_codes.empty()) detail::schema_fail(what, "control_codes must be non-empty");
  if (r.n_per_code < 1) detail::schema_fail(what, "n_per_code must be >= 1");
  return r;
}

inline json to_json(const PerturbResponse& r) {
  json arr = json::array();
  for (const auto& p : r.perturbations) arr.push_back(json{{"text", p.text}, {"code", to_string(p.code)}});
  return json{{"perturbations", arr}};
}

inline PerturbResponse perturb_response_from_json(const json& j) {
  constexpr std::string_view what = "perturb response";
  PerturbResponse r;
  for (const auto& item : detail::field<json>(j, "perturbations", what)) {
    r.perturbations.push_back({detail::field<std::string>(item, "text", what),
                               control_code_field(detail::field<std::string>(item, "code", what), what)});
  }
  return r;
}

inline json to_json(const BackendInfo& i) {
  return json{{"backend_id", i.backend_id},
              {"capabilities", {{"generate", i.generate}, {"mask_fill", i.mask_fill}, {"perturb", i.perturb}}},
              {"model_fingerprint", i.model_fingerprint}};
}

inline BackendInfo backend_info_from_json(const json& j) {
  constexpr std::string_view what = "info response";
  BackendInfo i;
  i.backend_id = detail::field<std::string>(j, "backend_id", what);
  const auto caps = detail::field<json>(j, "capabilities", what);
  i.generate = detail::field<bool>(caps, "generate", what);
  i.mask_fill = detail::field<bool>(caps, "mask_fill", what);
  i.perturb = detail::field<bool>(caps, "perturb", what);
  i.model_fingerprint = detail::field<std::string>(j, "model_fingerprint", what);
  return i;
}

inline json parse_json_body(std::string_view body, std::string_view what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw MalformedResponse(std::string(what) + ": invalid JSON (" + e.what() + ")");
  }
}

// ---- prompt helpers ------------------------------------------------------

inline const std::vector<std::string>& default_stop_tokens() {
  static const std::vector<std::string> stops{".", "!", "?", "\n"};
  return stops;
}

inline constexpr std::string_view kCovariatePromptSuffix = " Before that,";

inline std::string covariate_prompt(const Event& e1) { return e1.text() + std::string(kCovariatePromptSuffix); }

/// Cut a generated suffix at its first stop token. Punctuation stops are
/// kept; a newline stop is dropped. The result is whitespace-normalized.
inline std::string crop_at_stop(std::string_view completion, const std::vector<std::string>& stops) {
  std::size_t best = std::string_view::npos;
  std::size_t keep = 0;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    const auto pos = completion.find(s);
    if (pos != std::string_view::npos && pos < best) {
      best = pos;
      keep = (s.find_first_not_of(" \t\r\n") == std::string::npos) ? 0 : s.size();
    }
  }
  if (best == std::string_view::npos) return normalize_text(completion);
  return normalize_text(completion.substr(0, best + keep));
}

/// "A <MASK> B"; an empty side (the null event) is omitted.
inline std::string mask_template(const Event& a, const Event& b) {
  std::string out;
  if (!a.is_null()) out += a.text() + ' ';
  out += kMaskToken;
  if (!b.is_null()) out += ' ' + b.text();
  return out;
}

/// Inverse of mask_template: normalized texts on each side of the mask.
inline std::pair<std::string, std::string> split_mask_template(std::string_view t) {
  if (count_mask_tokens(t) != 1) throw MalformedResponse("template must contain exactly one <MASK>");
  const auto pos = t.find(kMaskToken);
  return {normalize_text(t.substr(0, pos)), normalize_text(t.substr(pos + kMaskToken.size()))};
}

}  // namespace rock
