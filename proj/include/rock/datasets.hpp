#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "rock/errors.hpp"
#include "rock/event.hpp"
#include "rock/hash.hpp"
#include "rock/protocol.hpp"

namespace rock {

class Dataset {
 public:
  Dataset(std::string name, std::vector<BenchmarkInstance> instances)
      : name_(std::move(name)), instances_(std::move(instances)) {
    if (instances_.empty()) throw DataError("dataset '" + name_ + "' has no instances");
    std::unordered_set<std::string> ids;
    for (const auto& inst : instances_)
      if (!ids.insert(inst.source_id).second)
        throw DataError("dataset '" + name_ + "' repeats source id '" + inst.source_id + "'");
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<BenchmarkInstance>& instances() const noexcept { return instances_; }
  std::size_t size() const noexcept { return instances_.size(); }

  /// Content hash over every field of every instance, in order.
  std::string content_hash() const { return to_hex(fnv1a64(canonical(to_json()))); }

  json to_json() const {
    json items = json::array();
    for (const auto& i : instances_)
      items.push_back({{"source_id", i.source_id},
                       {"premise", i.premise.text()},
                       {"choice_a", i.choice_a.text()},
                       {"choice_b", i.choice_b.text()},
                       {"asks_for", to_string(i.asks_for)},
                       {"label", to_string(i.label)}});
    return json{{"name", name_}, {"instances", items}};
  }

  static Dataset from_json(const json& j) {
    try {
      std::vector<BenchmarkInstance> out;
      for (const auto& it : j.at("instances")) {
        const auto asks = it.at("asks_for").get<std::string>();
        const auto label = it.at("label").get<std::string>();
        if (asks != "cause" && asks != "effect") throw UnknownAttribute("asks_for '" + asks + "'");
        if (label != "A" && label != "B") throw UnknownAttribute("label '" + label + "'");
        out.emplace_back(Event(it.at("premise").get<std::string>()), Event(it.at("choice_a").get<std::string>()),
                         Event(it.at("choice_b").get<std::string>()), asks == "cause" ? AskFor::Cause : AskFor::Effect,
                         label == "A" ? Choice::ChoiceA : Choice::ChoiceB, it.at("source_id").get<std::string>());
      }
      return Dataset(j.at("name").get<std::string>(), std::move(out));
    } catch (const json::exception& e) {
      throw ParseError(std::string("dataset json: ") + e.what());
    } catch (const PreconditionError& e) {
      throw ParseError(std::string("dataset json: ") + e.what());
    }
  }

 private:
  std::string name_;
  std::vector<BenchmarkInstance> instances_;
};

inline bool operator==(const BenchmarkInstance& a, const BenchmarkInstance& b) {
  return a.source_id == b.source_id && a.premise.text() == b.premise.text() && a.choice_a.text() == b.choice_a.text() &&
         a.choice_b.text() == b.choice_b.text() && a.asks_for == b.asks_for && a.label == b.label;
}

inline bool operator==(const Dataset& a, const Dataset& b) {
  return a.name() == b.name() && a.instances() == b.instances();
}

// ---- COPA XML ------------------------------------------------------------
//
// <copa-corpus version="1.0">
//   <item id="1" asks-for="cause" most-plausible-alternative="1">
//     <p>...</p> <a1>...</a1> <a2>...</a2>
//   </item>
// </copa-corpus>

namespace detail {
namespace pt = boost::property_tree;

inline std::string required_text(const pt::ptree& item, const char* child, const std::string& id) {
  auto node = item.get_child_optional(child);
  if (!node) throw ParseError("item " + id + ": missing <" + child + "> element");
  std::string text = normalize_text(node->data());
  if (text.empty()) throw ParseError("item " + id + ": empty <" + child + "> element");
  return text;
}

inline BenchmarkInstance copa_item(const pt::ptree& item) {
  std::string id, asks, mpa;
  if (auto attrs = item.get_child_optional("<xmlattr>")) {
    for (const auto& [name, value] : *attrs) {
      if (name == "id") id = value.data();
      else if (name == "asks-for") asks = value.data();
      else if (name == "most-plausible-alternative") mpa = value.data();
      else throw UnknownAttribute("item " + (id.empty() ? std::string("?") : id) + ": attribute '" + name + "'");
    }
  }
  if (id.empty()) throw ParseError("item without an id attribute");
  if (asks != "cause" && asks != "effect")
    throw UnknownAttribute("item " + id + ": asks-for='" + asks + "' (want cause or effect)");
  if (mpa != "1" && mpa != "2")
    throw UnknownAttribute("item " + id + ": most-plausible-alternative='" + mpa + "' (want 1 or 2)");
  return BenchmarkInstance(Event(required_text(item, "p", id)), Event(required_text(item, "a1", id)),
                           Event(required_text(item, "a2", id)), asks == "cause" ? AskFor::Cause : AskFor::Effect,
                           mpa == "1" ? Choice::ChoiceA : Choice::ChoiceB, id);
}
}  // namespace detail

inline Dataset parse_copa(std::istream& in, std::string name) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(name + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto root = tree.get_child_optional("copa-corpus");
  if (!root) throw ParseError(name + ": root element <copa-corpus> not found");
  std::vector<BenchmarkInstance> out;
  for (const auto& [tag, node] : *root) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    if (tag != "item") throw ParseError(name + ": unexpected element <" + tag + ">");
    out.push_back(detail::copa_item(node));
  }
  return Dataset(std::move(name), std::move(out));
}

inline Dataset load_copa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_copa(in, path.stem().string());
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline void write_copa(std::ostream& out, const Dataset& d) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<copa-corpus version=\"1.0\">\n";
  for (const auto& i : d.instances()) {
    out << "<item id=\"" << xml_escape(i.source_id) << "\" asks-for=\"" << to_string(i.asks_for)
        << "\" most-plausible-alternative=\"" << (i.label == Choice::ChoiceA ? 1 : 2) << "\">\n"
        << "<p>" << xml_escape(i.premise.text()) << "</p>\n"
        << "<a1>" << xml_escape(i.choice_a.text()) << "</a1>\n"
        << "<a2>" << xml_escape(i.choice_b.text()) << "</a2>\n"
        << "</item>\n";
  }
  out << "</copa-corpus>\n";
}

// ---- GLUCOSE-D1 TSV --------------------------------------------------------
//
// Header "source_id<TAB>cause<TAB>effect<TAB>distractor", then one instance
// per line. The cause is the premise, the effect is choice A (correct) and
// the distractor choice B.

inline constexpr std::string_view kGlucoseHeader = "source_id\tcause\teffect\tdistractor";

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    cols.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cols;
}

inline Dataset parse_glucose_d1(std::istream& in, std::string name) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line()) throw ParseError(name + ": missing header line");
  if (line != kGlucoseHeader) throw ParseError(name + ": line 1: header must be '" + std::string(kGlucoseHeader) + "'");

  std::vector<BenchmarkInstance> out;
  while (next_line()) {
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 4) throw WrongColumnCount(line_no, cols.size(), 4);
    for (std::size_t c = 0; c < 4; ++c)
      if (normalize_text(cols[c]).empty())
        throw ParseError(name + ": line " + std::to_string(line_no) + ": column " + std::to_string(c + 1) + " is empty");
    try {
      out.emplace_back(Event(cols[1]), Event(cols[2]), Event(cols[3]), AskFor::Effect, Choice::ChoiceA, cols[0]);
    } catch (const DataError& e) {
      throw ParseError(name + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(name + ": no instances after the header");
  return Dataset(std::move(name), std::move(out));
}

inline Dataset load_glucose_d1(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_glucose_d1(in, path.stem().string());
}

inline void write_glucose_d1(std::ostream& out, const Dataset& d) {
  auto field = [](const std::string& s) {
    if (s.find_first_of("\t\r\n") != std::string::npos) throw DataError("GLUCOSE-D1 text contains a tab or newline");
    return s;
  };
  out << kGlucoseHeader << '\n';
  for (const auto& i : d.instances()) {
    if (i.asks_for != AskFor::Effect || i.label != Choice::ChoiceA)
      throw DataError("instance " + i.source_id + " cannot be written as GLUCOSE-D1 (needs asks_for=effect, label=A)");
    out << field(i.source_id) << '\t' << field(i.premise.text()) << '\t' << field(i.choice_a.text()) << '\t'
        << field(i.choice_b.text()) << '\n';
  }
}

/// Dispatch on extension: .xml is COPA, .tsv is GLUCOSE-D1, .json is a
/// dataset or suite file.
inline Dataset load_dataset(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xml") return load_copa(path);
  if (ext == ".tsv") return load_glucose_d1(path);
  if (ext == ".json") {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    return Dataset::from_json(j.contains("dataset") ? j.at("dataset") : j);
  }
  throw DataError("unrecognized dataset extension '" + ext + "' (want .xml, .tsv or .json)");
}

}  // namespace rock
