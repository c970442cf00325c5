// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"
#include "chemamp/http.hpp"
#include "chemamp/toolkit.hpp"
#include "support/oracles.hpp"
#include "support/test_server.hpp"

using namespace chemamp;

namespace {

ToolDescriptor oracle_tool(std::string id, double p, std::string public_name = {}) {
  ToolDescriptor d;
  d.tool_id = std::move(id);
  d.public_name = std::move(public_name);
  d.backend = Backend::kNoisyOracle;
  d.backend_params["p"] = std::to_string(p);
  return d;
}

std::shared_ptr<Environment> numbered_env(int n, std::string alphabet = "CNOcno=#()") {
  auto env = std::make_shared<Environment>(alphabet);
  std::mt19937_64 rng(3);
  for (int i = 0; i < n; ++i) {
    env->set_gold("q" + std::to_string(i), oracle::random_string(rng, alphabet, 10, 4));
  }
  return env;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("chemamp_test_" + name);
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST(EstimateTokens, CeilOfCodePointsOverFour) {
  EXPECT_EQ(estimate_tokens(""), 0);
  EXPECT_EQ(estimate_tokens("a"), 1);
  EXPECT_EQ(estimate_tokens("abcd"), 1);
  EXPECT_EQ(estimate_tokens("abcde"), 2);
  EXPECT_EQ(estimate_tokens("\xc3\xa9\xc3\xa9\xc3\xa9\xc3\xa9"), 1);  // four code points, eight bytes
}

TEST(CostLedger, MergeIsFieldwiseSum) {
  CostLedger a{1, 2, 3, 4, 5};
  CostLedger b{10, 20, 30, 40, 50};
  auto c = a + b;
  EXPECT_EQ(c, (CostLedger{11, 22, 33, 44, 55}));
  EXPECT_EQ(c.all_tokens(), 66);
  EXPECT_EQ(a + CostLedger{}, a);
  EXPECT_EQ(a + b, b + a);
}

TEST(CostModel, PlannerTurnCharges) {
  CostModel model{200, 500, 2};
  CostLedger ledger;
  model.charge_planner_turn(ledger, 10, 3);
  EXPECT_EQ(ledger.prompt_tokens, 10);
  EXPECT_EQ(ledger.completion_tokens, 3);
  EXPECT_EQ(ledger.sim_time_ms, 500 + 2 * 13);
  EXPECT_EQ(ledger.calls, 0);
}

TEST(Names, SuffixedNamePattern) {
  EXPECT_TRUE(is_suffixed_name("Agent_0"));
  EXPECT_TRUE(is_suffixed_name("Chem_Former_12"));
  EXPECT_FALSE(is_suffixed_name("Agent"));
  EXPECT_FALSE(is_suffixed_name("_3"));
  EXPECT_FALSE(is_suffixed_name("Agent_x"));
  EXPECT_FALSE(is_suffixed_name("Agent_-1"));
}

TEST(Backend, NamesRoundTrip) {
  for (auto b : {Backend::kTable, Backend::kNoisyOracle, Backend::kExternalCommand, Backend::kHttp,
                 Backend::kComposite}) {
    EXPECT_EQ(parse_backend(to_string(b)), b);
  }
  EXPECT_THROW(parse_backend("grpc"), ConfigError);
}

TEST(Perturb, AlwaysDiffersFromGold) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 1000; ++i) {
    auto gold = oracle::random_string(rng, "CNOcno=#()123", 12, 1);
    for (auto kind : {Perturber::kSubstitute, Perturber::kDelete}) {
      auto out = perturb(gold, kind, "CNOcno=#()123", rng());
      ASSERT_NE(out, gold);
    }
  }
}

TEST(Perturb, SubstitutionDiffersCaseInsensitively) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 500; ++i) {
    auto gold = oracle::random_string(rng, "AaBb", 1, 1);
    auto out = perturb(gold, Perturber::kSubstitute, "AaBb", rng());
    ASSERT_EQ(out.size(), 1U);
    EXPECT_NE(std::tolower(out[0]), std::tolower(gold[0]));
  }
}

TEST(Perturb, EmptyGoldAndSingleLetterAlphabet) {
  EXPECT_FALSE(perturb("", Perturber::kSubstitute, "C", 1).empty());
  EXPECT_NE(perturb("C", Perturber::kSubstitute, "C", 1), "C");
  EXPECT_NE(perturb("", Perturber::kDelete, "C", 1), "");
}

TEST(Registry, RegisterLookupAndDuplicate) {
  ToolRegistry registry;
  registry.register_tool(ToolDescriptor{"t", "Tool_0", "", Backend::kTable, {}, 0},
                         make_table_backend({{"a", "1"}}));
  EXPECT_TRUE(registry.contains("t"));
  EXPECT_EQ(registry.descriptor("t").public_name, "Tool_0");
  EXPECT_THROW(registry.register_tool(ToolDescriptor{"t", "Tool_1", "", Backend::kTable, {}, 0},
                                      make_table_backend({})),
               RegistrationError);
  EXPECT_THROW(registry.descriptor("missing"), LookupError);
  CostLedger ledger;
  EXPECT_THROW(registry.invoke("missing", "a", ledger, 0), LookupError);
}

TEST(Registry, RejectsBadDescriptors) {
  ToolRegistry registry;
  EXPECT_THROW(registry.register_tool(ToolDescriptor{"", "", "", Backend::kTable, {}, 0},
                                      make_table_backend({})),
               RegistrationError);
  EXPECT_THROW(registry.register_tool(ToolDescriptor{"x", "bad name", "", Backend::kTable, {}, 0},
                                      make_table_backend({})),
               RegistrationError);
  EXPECT_THROW(registry.register_tool(ToolDescriptor{"y", "", "", Backend::kTable, {}, 2},
                                      make_table_backend({})),
               RegistrationError);
  EXPECT_THROW(registry.register_tool(ToolDescriptor{"z", "", "", Backend::kComposite, {}, 1}),
               RegistrationError);
  EXPECT_THROW(register_tool(registry, ToolDescriptor{"w", "", "", Backend::kHttp, {}, 0}),
               ConfigError);
}

TEST(Registry, AllocatesPublicNames) {
  ToolRegistry registry;
  registry.register_tool(ToolDescriptor{"a", "", "", Backend::kTable, {}, 0}, make_table_backend({}));
  registry.register_tool(ToolDescriptor{"b", "", "", Backend::kTable, {}, 0}, make_table_backend({}));
  EXPECT_EQ(registry.descriptor("a").public_name, "tool_0");
  EXPECT_EQ(registry.descriptor("b").public_name, "tool_1");
  EXPECT_EQ(registry.allocate_composite_id(), "agent_0");
}

TEST(Registry, InvokeChargesCallAndTokens) {
  ToolRegistry registry;
  registry.register_tool(ToolDescriptor{"t", "", "", Backend::kTable, {}, 0},
                         make_table_backend({{"abcdefgh", "CCO"}}));
  CostLedger ledger;
  EXPECT_EQ(registry.invoke("t", "abcdefgh", ledger, 0), "CCO");
  EXPECT_EQ(ledger.calls, 1);
  EXPECT_EQ(ledger.tool_tokens, 2 + 1);
  EXPECT_EQ(ledger.sim_time_ms, 200 + 3);
  EXPECT_EQ(registry.invoke("t", "zzz", ledger, 0), "UNKNOWN");
  EXPECT_EQ(ledger.calls, 2);
}

TEST(Registry, OverlaySeesParentAndKeepsItsOwnTools) {
  auto root = std::make_shared<ToolRegistry>();
  root->register_tool(ToolDescriptor{"base", "Base_0", "", Backend::kTable, {}, 0},
                      make_table_backend({{"x", "1"}}));
  root->set_fallback_answer("NONE");
  ToolRegistry overlay(root);
  overlay.register_tool(ToolDescriptor{"extra", "Extra_0", "", Backend::kTable, {}, 0},
                        make_table_backend({}));
  EXPECT_TRUE(overlay.contains("base"));
  EXPECT_FALSE(root->contains("extra"));
  EXPECT_EQ(overlay.tool_ids(), (std::vector<std::string>{"extra", "base"}));
  EXPECT_EQ(overlay.size(), 2U);
  EXPECT_EQ(overlay.fallback_answer(), "NONE");
  EXPECT_THROW(overlay.register_tool(ToolDescriptor{"base", "", "", Backend::kTable, {}, 0},
                                     make_table_backend({})),
               RegistrationError);
}

TEST(NoisyOracle, HitRateMatchesP) {
  auto env = numbered_env(2000);
  ToolRegistry registry;
  registry.set_environment(env);
  register_tool(registry, oracle_tool("t", 0.7));
  int hits = 0;
  CostLedger ledger;
  for (int i = 0; i < 2000; ++i) {
    auto q = "q" + std::to_string(i);
    hits += registry.invoke("t", q, ledger, 99) == *env->gold(q) ? 1 : 0;
  }
  const double rate = hits / 2000.0;
  EXPECT_GE(rate, 0.67);
  EXPECT_LE(rate, 0.73);
}

TEST(NoisyOracle, ReferentiallyTransparent) {
  auto env = numbered_env(200);
  ToolRegistry registry;
  registry.set_environment(env);
  register_tool(registry, oracle_tool("t", 0.5));
  CostLedger ledger;
  for (int i = 0; i < 200; ++i) {
    auto q = "q" + std::to_string(i);
    const std::uint64_t seed = hash::derive(7, i);
    EXPECT_EQ(registry.invoke("t", q, ledger, seed), registry.invoke("t", q, ledger, seed));
  }
}

TEST(NoisyOracle, ExtremesAndMissingGold) {
  auto env = numbered_env(50);
  ToolRegistry registry;
  registry.set_environment(env);
  register_tool(registry, oracle_tool("always", 1.0));
  register_tool(registry, oracle_tool("never", 0.0));
  CostLedger ledger;
  for (int i = 0; i < 50; ++i) {
    auto q = "q" + std::to_string(i);
    EXPECT_EQ(registry.invoke("always", q, ledger, 1), *env->gold(q));
    EXPECT_NE(registry.invoke("never", q, ledger, 1), *env->gold(q));
  }
  EXPECT_EQ(registry.invoke("always", "not a query", ledger, 1), "UNKNOWN");
  auto bad = oracle_tool("bad", 1.5);
  EXPECT_THROW(make_backend(bad), ConfigError);
}

TEST(TableBackend, ReadsJsonlFile) {
  auto path = temp_file("table.jsonl", "{\"input\":\"water\",\"gold\":\"O\"}\n\n"
                                       "{\"input\":\"ethanol\",\"gold\":\"CCO\"}\n");
  ToolRegistry registry;
  register_tool(registry, ToolDescriptor{"t", "", "", Backend::kTable,
                                         {{"table_path", path.string()}, {"fallback", "?"}}, 0});
  CostLedger ledger;
  EXPECT_EQ(registry.invoke("t", "ethanol", ledger, 0), "CCO");
  EXPECT_EQ(registry.invoke("t", "benzene", ledger, 0), "?");
  auto broken = temp_file("broken.jsonl", "{\"input\":\"water\"}\n");
  EXPECT_THROW(register_tool(registry, ToolDescriptor{"u", "", "", Backend::kTable,
                                                      {{"table_path", broken.string()}}, 0}),
               DataError);
}

TEST(ExternalCommand, AnswersWithFirstStdoutLine) {
  ToolRegistry registry;
  register_tool(registry, ToolDescriptor{"upper", "", "", Backend::kExternalCommand,
                                         {{"command", "tr a-z A-Z"}}, 0});
  CostLedger ledger;
  EXPECT_EQ(registry.invoke("upper", "ccO", ledger, 0), "CCO");
}

TEST(ExternalCommand, NonzeroExitIsToolFailureAndStillCharged) {
  ToolRegistry registry;
  register_tool(registry, ToolDescriptor{"fail", "", "", Backend::kExternalCommand,
                                         {{"command", "echo oops >&2; exit 3"}}, 0});
  CostLedger ledger;
  try {
    registry.invoke("fail", "abcd", ledger, 0);
    FAIL() << "expected ToolFailure";
  } catch (const ToolFailure& e) {
    EXPECT_NE(std::string(e.what()).find("oops"), std::string::npos);
    EXPECT_EQ(e.exit_code(), ExitCode::kToolFailure);
  }
  EXPECT_EQ(ledger.calls, 1);
  EXPECT_EQ(ledger.tool_tokens, 1);
}

TEST(ExternalCommand, TimeoutIsToolFailure) {
  ToolRegistry registry;
  register_tool(registry, ToolDescriptor{"slow", "", "", Backend::kExternalCommand,
                                         {{"command", "sleep 5"}, {"timeout_ms", "200"}}, 0});
  CostLedger ledger;
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(registry.invoke("slow", "x", ledger, 0), ToolFailure);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

TEST(HttpBackend, RoundTripWithReportedTokens) {
  testing_support::TestServer server;
  server.server().Post("/invoke", [](const httplib::Request& req, httplib::Response& res) {
    auto q = nlohmann::json::parse(req.body).at("query").get<std::string>();
    nlohmann::json out = {{"answer", q + "!"}, {"tokens", 42}};
    res.set_content(out.dump(), "application/json");
  });
  server.start();
  ToolRegistry registry;
  register_tool(registry,
                ToolDescriptor{"remote", "", "", Backend::kHttp, {{"url", server.url()}}, 0});
  CostLedger ledger;
  EXPECT_EQ(registry.invoke("remote", "CCO", ledger, 0), "CCO!");
  EXPECT_EQ(ledger.tool_tokens, 42);
  EXPECT_EQ(ledger.calls, 1);
}

TEST(HttpBackend, EstimatesTokensWhenNotReported) {
  testing_support::TestServer server;
  server.server().Post("/tool", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"answer":"CCCC"})", "application/json");
  });
  server.start();
  ToolRegistry registry;
  register_tool(registry, ToolDescriptor{"remote", "", "", Backend::kHttp,
                                         {{"url", server.url()}, {"path", "/tool"}}, 0});
  CostLedger ledger;
  EXPECT_EQ(registry.invoke("remote", "abcdefgh", ledger, 0), "CCCC");
  EXPECT_EQ(ledger.tool_tokens, 3);
}

TEST(HttpBackend, ErrorsMapToToolFailures) {
  testing_support::TestServer server;
  server.server().Post("/invoke", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"result":"x"})", "application/json");
  });
  server.server().Post("/down", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("busy", "text/plain");
  });
  server.start();
  ToolRegistry registry;
  register_tool(registry,
                ToolDescriptor{"malformed", "", "", Backend::kHttp, {{"url", server.url()}}, 0});
  register_tool(registry, ToolDescriptor{"status", "", "", Backend::kHttp,
                                         {{"url", server.url()}, {"path", "/down"}}, 0});
  CostLedger ledger;
  EXPECT_THROW(registry.invoke("malformed", "q", ledger, 0), ProtocolError);
  try {
    registry.invoke("status", "q", ledger, 0);
    FAIL() << "expected ToolFailure";
  } catch (const ToolFailure& e) {
    EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
  }
  const auto url = server.url();
  server.stop();
  EXPECT_THROW(post_json(url, "/invoke", "{}", 500), TransportError);
}

TEST(Descriptors, JsonRoundTrip) {
  std::vector<ToolDescriptor> tools = {oracle_tool("a", 0.6, "A_0"), oracle_tool("b", 0.7, "B_0")};
  tools[1].description = "second";
  auto path = temp_file("tools.json", tool_descriptors_to_json(tools));
  auto loaded = load_tool_descriptors(path.string());
  ASSERT_EQ(loaded.size(), 2U);
  EXPECT_EQ(loaded[1].tool_id, "b");
  EXPECT_EQ(loaded[1].description, "second");
  EXPECT_EQ(loaded[1].backend, Backend::kNoisyOracle);
  EXPECT_EQ(loaded[0].backend_params, tools[0].backend_params);
  EXPECT_EQ(tool_descriptors_to_json(loaded), tool_descriptors_to_json(tools));
  EXPECT_THROW(load_tool_descriptors(temp_file("obj.json", "{}").string()), ConfigError);
  EXPECT_THROW(load_tool_descriptors("/nonexistent/tools.json"), ConfigError);
}
