#include <gtest/gtest.h>

#include <fstream>

#include "rock/protocol.hpp"
#include "rock/stub.hpp"

using namespace rock;

TEST(Protocol, CanonicalFormIgnoresFieldOrder) {
  const json a = json::parse(R"({"top_k": 5, "template": "A <MASK> B", "candidates": ["before", "after"]})");
  const json b = json::parse(R"({"candidates": ["before", "after"], "template": "A <MASK> B", "top_k": 5})");
  EXPECT_EQ(canonical(a), canonical(b));
  EXPECT_EQ(canonical(a), R"({"candidates":["before","after"],"template":"A <MASK> B","top_k":5})");
}

TEST(Protocol, RequestRoundTrips) {
  GenerateRequest g{"E. Before that,", 7, 12, 0.5, {".", "\n"}, 42};
  const auto g2 = generate_request_from_json(to_json(g));
  EXPECT_EQ(g2.prompt, g.prompt);
  EXPECT_EQ(g2.n, 7);
  EXPECT_EQ(g2.stop, g.stop);
  EXPECT_EQ(g2.seed, 42);
  g.seed.reset();
  EXPECT_FALSE(generate_request_from_json(to_json(g)).seed.has_value());

  const PerturbRequest p{"text", {ControlCode::Negation, ControlCode::Delete}, 2};
  const auto p2 = perturb_request_from_json(to_json(p));
  EXPECT_EQ(p2.control_codes, p.control_codes);
  EXPECT_EQ(to_json(p)["control_codes"], json::parse(R"(["negation","delete"])"));
}

TEST(Protocol, SchemaViolationsAreMalformed) {
  EXPECT_THROW(mask_fill_request_from_json(json::parse(R"({"template":"no mask","candidates":["a"],"top_k":1})")),
               MalformedResponse);
  EXPECT_THROW(mask_fill_request_from_json(json::parse(R"({"template":"<MASK>","candidates":"a","top_k":1})")),
               MalformedResponse);
  EXPECT_THROW(mask_fill_response_from_json(json::parse(R"({"scores":{"a":-1},"covered":{"a":true}})")),
               MalformedResponse);
  EXPECT_THROW(perturb_response_from_json(json::parse(R"({"perturbations":[{"text":"x","code":"zap"}]})")),
               MalformedResponse);
  EXPECT_THROW(backend_info_from_json(json::parse(R"({"backend_id":"x"})")), MalformedResponse);
  EXPECT_THROW(parse_json_body("{", "test"), MalformedResponse);
}

TEST(Protocol, CropAtFirstStop) {
  EXPECT_EQ(crop_at_stop("She was hungry. Then she left", {"."}), "She was hungry.");
  EXPECT_EQ(crop_at_stop(" It rained\nall day.", default_stop_tokens()), "It rained");
  EXPECT_EQ(crop_at_stop("Wait! What? No.", default_stop_tokens()), "Wait!");
  EXPECT_EQ(crop_at_stop("no stop here", default_stop_tokens()), "no stop here");
}

TEST(Protocol, MaskTemplates) {
  const Event a("Rain fell."), b("The river rose.");
  EXPECT_EQ(mask_template(a, b), "Rain fell. <MASK> The river rose.");
  EXPECT_EQ(mask_template(Event::null(), b), "<MASK> The river rose.");
  EXPECT_EQ(mask_template(a, Event::null()), "Rain fell. <MASK>");
  EXPECT_EQ(split_mask_template(mask_template(a, b)), (std::pair<std::string, std::string>{"Rain fell.", "The river rose."}));
  EXPECT_THROW(split_mask_template("<MASK> <MASK>"), MalformedResponse);
}

TEST(Events, IdentityIsNormalizedText) {
  EXPECT_EQ(Event("  The cat   sat. "), Event("The cat sat."));
  EXPECT_FALSE(Event("The cat sat.") == Event("the cat sat."));
  EXPECT_TRUE(Event::null().is_null());
  EXPECT_THROW(Event("   "), PreconditionError);
  EXPECT_THROW(CausalQuery(Event::null(), Event("x")), PreconditionError);
}

// ---- golden conformance cases ------------------------------------------------

namespace {

void check_schema(const std::string& schema, const json& request, const json& response) {
  if (schema == "info") {
    const auto info = backend_info_from_json(response);
    EXPECT_FALSE(info.backend_id.empty());
  } else if (schema == "generate") {
    EXPECT_LE(generate_response_from_json(response).completions.size(), request.at("n").get<std::size_t>());
  } else if (schema == "mask_fill") {
    const auto r = mask_fill_response_from_json(response);
    for (const auto& c : request.at("candidates")) {
      EXPECT_TRUE(r.scores.count(c.get<std::string>())) << c;
      EXPECT_TRUE(r.covered.count(c.get<std::string>())) << c;
    }
  } else if (schema == "perturb") {
    const auto r = perturb_response_from_json(response);
    const auto asked = request.at("control_codes").get<std::vector<std::string>>();
    for (const auto& p : r.perturbations)
      EXPECT_NE(std::find(asked.begin(), asked.end(), to_string(p.code)), asked.end());
  } else {
    FAIL() << "unknown schema " << schema;
  }
}

json golden_cases() {
  std::ifstream in(std::string(ROCK_DATA_DIR) + "/conformance/golden.json");
  return json::parse(in).at("cases");
}

}  // namespace

TEST(Conformance, StubPassesGoldenCasesInProcess) {
  StubBackend stub(StubUniverse::load(std::string(ROCK_DATA_DIR) + "/derived_scenario.json"));
  const json cases = golden_cases();
  ASSERT_GE(cases.size(), 10u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c.at("name").get<std::string>());
    const std::string body = c.contains("raw_body") ? c.at("raw_body").get<std::string>()
                             : c.contains("body")   ? c.at("body").dump()
                                                    : std::string();
    const auto reply = stub.handle(c.at("method").get<std::string>(), c.at("path").get<std::string>(), body);
    ASSERT_EQ(reply.status, c.at("status").get<int>()) << reply.body;
    if (c.contains("schema")) check_schema(c.at("schema"), c.value("body", json::object()), json::parse(reply.body));
  }
}

TEST(Conformance, StubPassesGoldenCasesOverHttp) {
  StubBackend stub(StubUniverse::load(std::string(ROCK_DATA_DIR) + "/derived_scenario.json"));
  StubServer server(stub);
  httplib::Client http(server.url());
  for (const auto& c : golden_cases()) {
    SCOPED_TRACE(c.at("name").get<std::string>());
    httplib::Result res = c.at("method") == "GET"
                              ? http.Get(c.at("path").get<std::string>())
                              : http.Post(c.at("path").get<std::string>(),
                                          c.contains("raw_body") ? c.at("raw_body").get<std::string>() : c.at("body").dump(),
                                          "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, c.at("status").get<int>());
    if (c.contains("schema")) check_schema(c.at("schema"), c.value("body", json::object()), json::parse(res->body));
  }
  EXPECT_EQ(http.Get("/v1/nope")->status, 405);
  EXPECT_EQ(http.Post("/v1/nope", "{}", "application/json")->status, 404);
}
