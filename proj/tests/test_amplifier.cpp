// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "chemamp/amplifier.hpp"
#include "chemamp/error.hpp"
#include "support/sim.hpp"

using namespace chemamp;
using testing_support::accuracy_spec;
using testing_support::make_sim;
using testing_support::search_for;

namespace {

std::shared_ptr<ToolRegistry> table_tools(const std::vector<std::string>& ids) {
  auto registry = std::make_shared<ToolRegistry>();
  for (const auto& id : ids) {
    registry->register_tool(ToolDescriptor{id, id + "_0", "", Backend::kTable, {}, 0},
                            make_table_backend({{"q", id}}));
  }
  return registry;
}

CandidateScore fixed_score(double s) {
  CandidateScore out;
  out.report.fitness = s;
  out.report.fitness_metric = MetricId::kAccuracy;
  out.report.count = 1;
  out.ledger.calls = 1;
  return out;
}

std::size_t distinct_bases(const CompositionTree& tree) {
  std::set<std::string> bases;
  for (const auto& leaf : leaves(tree)) bases.insert(leaf.base);
  return bases.size();
}

// Deterministic monotone environment: each additional distinct tool adds 0.1.
double monotone_score(const CompositionTree& tree) {
  return std::min(1.0, 0.5 + 0.1 * static_cast<double>(distinct_bases(tree) - 1));
}

SearchConfig synthetic_config() {
  SearchConfig config;
  config.fitness_metric = MetricId::kAccuracy;
  config.delta = 0.01;
  return config;
}

LibraryEntry entry(CompositionTree tree, double score) {
  LibraryEntry e;
  e.tree = std::move(tree);
  e.score = score;
  return e;
}

}  // namespace

TEST(SearchConfig, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.fitness_metric = MetricId::kLevenshtein;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.top_k = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.delta = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.m_decay = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SearchConfig, PolicyFactoryDecaysRepairProbability) {
  SearchConfig c;
  c.policy.m = 0.3;
  c.m_decay = 0.5;
  auto factory = c.policy_factory();
  EXPECT_DOUBLE_EQ(factory(1).m, 0.3);
  EXPECT_DOUBLE_EQ(factory(2).m, 0.15);
  EXPECT_DOUBLE_EQ(factory(3).m, 0.075);
  EXPECT_EQ(factory(3).layer, 3);
}

TEST(Ranking, ScoreThenDepthThenName) {
  auto a = entry(CompositionTree::leaf("A", 0), 0.5);
  auto b = entry(CompositionTree::leaf("B", 0), 0.5);
  auto a1 = entry(CompositionTree::leaf("A", 1), 0.5);
  auto c = entry(CompositionTree::leaf("C", 2), 0.6);
  EXPECT_TRUE(ranks_before(c, a));
  EXPECT_TRUE(ranks_before(a, a1));
  EXPECT_TRUE(ranks_before(b, a1));
  EXPECT_TRUE(ranks_before(a, b));
  EXPECT_FALSE(ranks_before(a, a));
}

TEST(ScoreTool, CountsFailuresAndReservedAnswers) {
  auto registry = std::make_shared<ToolRegistry>();
  registry->register_tool(ToolDescriptor{"t", "", "", Backend::kTable, {}, 0},
                          make_table_backend({{"a", "X"}, {"b", std::string(kReserveAnswer)}}, "Y"));
  register_tool(*registry, ToolDescriptor{"bad", "", "", Backend::kExternalCommand,
                                          {{"command", "exit 2"}}, 0});
  Dataset data = {{"1", "a", "X", TaskKind::kPropertyPrediction, {}},
                  {"2", "b", "X", TaskKind::kPropertyPrediction, {}},
                  {"3", "c", "Y", TaskKind::kPropertyPrediction, {}},
                  {"4", "d", "X", TaskKind::kPropertyPrediction, {}}};
  auto s = score_tool(*registry, "t", data, MetricId::kAccuracy, 0);
  EXPECT_DOUBLE_EQ(s.report.fitness, 0.5);
  EXPECT_EQ(s.report.reserved, 1U);
  EXPECT_EQ(s.report.failures, 0U);
  EXPECT_EQ(s.ledger.calls, 4);
  auto f = score_tool(*registry, "bad", data, MetricId::kAccuracy, 0);
  EXPECT_EQ(f.report.failures, 4U);
  EXPECT_DOUBLE_EQ(f.report.fitness, 0.0);
  EXPECT_THROW(score_tool(*registry, "nope", data, MetricId::kAccuracy, 0), LookupError);
  EXPECT_THROW(score_tool(*registry, "t", {}, MetricId::kAccuracy, 0), DataError);
}

TEST(ScoreTool, ThreadCountDoesNotChangeTheReport) {
  auto spec = accuracy_spec(300, {0.6, 0.6}, 4);
  spec.q = 0.8;
  auto sim = make_sim(spec);
  auto config = search_for(spec, MetricId::kAccuracy, 9);
  auto tree = CompositionTree::node({CompositionTree::leaf("ATool", 0), CompositionTree::leaf("BTool", 0)});
  auto serial = score_candidate(tree, sim.registry, sim.env.dataset, config);
  config.threads = 4;
  auto parallel = score_candidate(tree, sim.registry, sim.env.dataset, config);
  EXPECT_EQ(serial.report, parallel.report);
  EXPECT_EQ(serial.ledger, parallel.ledger);
}

TEST(ScoreCandidate, LeavesBaseRegistryUntouched) {
  auto spec = accuracy_spec(50, {0.7, 0.7}, 1);
  auto sim = make_sim(spec);
  const auto size = sim.registry->size();
  auto config = search_for(spec, MetricId::kAccuracy, 1);
  score_candidate(CompositionTree::node({CompositionTree::leaf("ATool", 0), CompositionTree::leaf("BTool", 0)}),
                  sim.registry, sim.env.dataset, config);
  EXPECT_EQ(sim.registry->size(), size);
}

TEST(Stage1, StopsAtFirstGainBelowDelta) {
  auto registry = table_tools({"X"});
  // 0.5, 0.6, 0.7, 0.7 -> layers 0..3 validated, layer 3 not an improvement
  CandidateScorer scorer = [](const CompositionTree& tree, const ToolRegistry&, const std::string&) {
    return fixed_score(0.5 + 0.1 * std::min(layer_depth(tree), 2));
  };
  Amplifier amp(registry, {}, synthetic_config(), scorer);
  auto entries = amp.stage1("X");
  ASSERT_EQ(entries.size(), 4U);
  EXPECT_EQ(entries[0].stage, Stage::kAtomic);
  EXPECT_EQ(entries[0].name(), "['X_0']");
  EXPECT_EQ(entries[3].name(), "['X_3']");
  EXPECT_EQ(entries[3].stage, Stage::kStage1);
  EXPECT_TRUE(registry->contains("X_1"));
  EXPECT_TRUE(registry->contains("X_3"));
  EXPECT_EQ(registry->descriptor("X_2").backend, Backend::kComposite);
}

TEST(Stage1, RespectsMaxLayers) {
  auto registry = table_tools({"X"});
  CandidateScorer scorer = [](const CompositionTree& tree, const ToolRegistry&, const std::string&) {
    return fixed_score(0.1 * layer_depth(tree));
  };
  auto config = synthetic_config();
  config.max_layers = 1;
  Amplifier amp(registry, {}, config, scorer);
  EXPECT_EQ(amp.stage1("X").size(), 2U);
  config.max_layers = 8;
  Amplifier amp8(table_tools({"X"}), {}, config, scorer);
  EXPECT_EQ(amp8.stage1("X").size(), 9U);
}

TEST(Stage1, LayerVariantsStackTheAtomicTool) {
  auto registry = table_tools({"X"});
  CandidateScorer scorer = [](const CompositionTree&, const ToolRegistry&, const std::string&) {
    return fixed_score(0.5);
  };
  auto config = synthetic_config();
  config.delta = 0.0;
  config.max_layers = 3;
  Amplifier amp(registry, {}, config, scorer);
  amp.stage1("X");
  CostLedger one, three;
  registry->invoke("X_1", "q", one, 0);
  registry->invoke("X_3", "q", three, 0);
  // X_1 = [X_0]; X_2 = [X_0, X_1]; X_3 = [X_0, X_2]
  EXPECT_EQ(one.calls, 2);
  EXPECT_EQ(three.calls, 6);
}

TEST(Stage1, DiminishingRepairFollowsRecursion) {
  auto spec = accuracy_spec(2000, {0.5}, 21);
  spec.q = 1.0;
  spec.m = 0.3;
  spec.m_decay = 0.5;
  auto sim = make_sim(spec);
  auto config = search_for(spec, MetricId::kAccuracy, 5);
  config.delta = 0.02;
  Amplifier amp(sim.registry, sim.env.dataset, config);
  auto entries = amp.stage1(sim.tool_ids[0]);
  ASSERT_GE(entries.size(), 3U);
  ASSERT_LE(entries.size(), 9U);
  double s = entries[0].score;
  EXPECT_NEAR(s, 0.5, 0.03);
  double m = 0.3;
  double analytic = 0.5;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    analytic += (1.0 - analytic) * m;
    m *= 0.5;
    EXPECT_NEAR(entries[i].score, analytic, 0.03) << "layer " << i;
    if (i + 1 < entries.size()) EXPECT_GE(entries[i].score - entries[i - 1].score, config.delta);
  }
}

TEST(Stage2, JudgeCompositeWins) {
  auto spec = accuracy_spec(800, {0.7, 0.7}, 2);
  spec.q = 0.9;
  auto sim = make_sim(spec);
  auto config = search_for(spec, MetricId::kAccuracy, 3);
  Amplifier amp(sim.registry, sim.env.dataset, config);
  auto result = amp.run(sim.tool_ids);
  EXPECT_EQ(result.best.stage, Stage::kStage2);
  EXPECT_EQ(distinct_bases(result.best.tree), 2U);
  EXPECT_NEAR(result.best.score, 0.868, 0.04);
  double best_atomic = 0.0;
  for (const auto& e : result.library) {
    if (e.stage == Stage::kAtomic) best_atomic = std::max(best_atomic, e.score);
  }
  EXPECT_GT(result.best.score, best_atomic);
}

TEST(Stage2, PerfectToolsLeaveNothingToGain) {
  auto spec = accuracy_spec(100, {1.0, 1.0}, 2);
  auto sim = make_sim(spec);
  Amplifier amp(sim.registry, sim.env.dataset, search_for(spec, MetricId::kAccuracy, 3));
  auto result = amp.run(sim.tool_ids);
  EXPECT_DOUBLE_EQ(result.best.score, 1.0);
  EXPECT_EQ(result.best.name(), "['ATool_0']");
}

TEST(Stage2, GreedyMatchesExhaustiveOnMonotoneEnvironment) {
  const std::vector<std::string> bases = {"A", "B", "C"};
  auto registry = table_tools(bases);
  CandidateScorer scorer = [](const CompositionTree& tree, const ToolRegistry&, const std::string&) {
    return fixed_score(monotone_score(tree));
  };
  Amplifier amp(registry, {}, synthetic_config(), scorer);
  auto result = amp.run(bases);

  // every arity-2 tree of depth <= 2 over the atomic leaves
  std::vector<CompositionTree> level0;
  for (const auto& b : bases) level0.push_back(CompositionTree::leaf(b, 0));
  std::vector<CompositionTree> level1 = level0;
  for (const auto& x : level0) {
    for (const auto& y : level0) level1.push_back(CompositionTree::node({x, y}));
  }
  double optimum = 0.0;
  for (const auto& x : level1) {
    for (const auto& y : level1) optimum = std::max(optimum, monotone_score(CompositionTree::node({x, y})));
  }
  EXPECT_DOUBLE_EQ(optimum, 0.7);
  EXPECT_DOUBLE_EQ(result.best.score, optimum);
  EXPECT_LE(depth(result.best.tree), 2);
}

TEST(Stage2, ValidationBudgetIsBounded) {
  auto registry = table_tools({"A", "B", "C", "D"});
  int stage2_calls = 0;
  CandidateScorer scorer = [&](const CompositionTree& tree, const ToolRegistry&, const std::string&) {
    if (!tree.is_leaf()) ++stage2_calls;
    return fixed_score(monotone_score(tree));
  };
  auto config = synthetic_config();
  config.top_k = 2;
  config.max_stage2_rounds = 3;
  Amplifier amp(registry, {}, config, scorer);
  auto result = amp.run({"A", "B", "C", "D"});
  EXPECT_LE(stage2_calls, config.top_k * config.max_stage2_rounds);
  std::set<std::string> names;
  for (const auto& e : result.library) EXPECT_TRUE(names.insert(e.name()).second) << e.name();
}

TEST(Stage2, NeedsTwoEntries) {
  auto registry = table_tools({"A"});
  CandidateScorer scorer = [](const CompositionTree&, const ToolRegistry&, const std::string&) {
    return fixed_score(0.5);
  };
  Amplifier amp(registry, {}, synthetic_config(), scorer);
  std::vector<LibraryEntry> lib = {entry(CompositionTree::leaf("A", 0), 0.5)};
  EXPECT_THROW(amp.stage2(lib), ConfigError);
}

TEST(Amplify, DeterministicAcrossRunsAndThreadCounts) {
  auto spec = accuracy_spec(300, {0.6, 0.7, 0.65}, 8);
  spec.q = 0.85;
  spec.m = 0.2;
  auto run = [&](unsigned threads) {
    auto sim = make_sim(spec);
    Amplifier amp(sim.registry, sim.env.dataset, search_for(spec, MetricId::kAccuracy, 17, threads));
    return library_to_jsonl(amp.run(sim.tool_ids).library);
  };
  const auto first = run(1);
  EXPECT_EQ(first, run(1));
  EXPECT_EQ(first, run(4));
}

TEST(Amplify, WinnerNeverWorseThanBestAtomic) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    auto spec = accuracy_spec(200, {0.5 + 0.05 * static_cast<double>(seed), 0.6, 0.4}, seed);
    spec.q = 0.6 + 0.05 * static_cast<double>(seed);
    spec.r = 0.1;
    auto sim = make_sim(spec);
    Amplifier amp(sim.registry, sim.env.dataset, search_for(spec, MetricId::kAccuracy, seed));
    auto result = amp.run(sim.tool_ids);
    for (const auto& e : result.library) {
      if (e.stage == Stage::kAtomic) EXPECT_GE(result.best.score, e.score) << "seed " << seed;
    }
  }
}

TEST(Library, JsonlRoundTrip) {
  auto registry = table_tools({"A", "B"});
  CandidateScorer scorer = [](const CompositionTree& tree, const ToolRegistry&, const std::string&) {
    return fixed_score(monotone_score(tree));
  };
  Amplifier amp(registry, {}, synthetic_config(), scorer);
  auto result = amp.run({"A", "B"});
  const auto text = library_to_jsonl(result.library);
  EXPECT_EQ(parse_library_jsonl(text), to_records(result.library));
  EXPECT_THROW(parse_library_jsonl("{\"name\":\"['A_x']\"}\n"), DataError);
  EXPECT_THROW(parse_library_jsonl("not json\n"), DataError);
  for (std::size_t i = 0; i < result.library.size(); ++i) {
    EXPECT_EQ(result.library[i].created_step, static_cast<int>(i));
  }
}

TEST(Library, NamedToolReproducesValidationScore) {
  auto spec = accuracy_spec(300, {0.7, 0.6}, 12);
  spec.q = 0.9;
  spec.m = 0.2;
  auto sim = make_sim(spec);
  auto config = search_for(spec, MetricId::kAccuracy, 6);
  Amplifier amp(sim.registry, sim.env.dataset, config);
  auto result = amp.run(sim.tool_ids);
  for (const auto& e : result.library) {
    auto fresh = make_sim(spec);
    auto id = build_named_tool(parse_name(e.name()), *fresh.registry, config);
    auto s = score_tool(*fresh.registry, id, fresh.env.dataset, MetricId::kAccuracy, config.seed);
    EXPECT_DOUBLE_EQ(s.report.fitness, e.score) << e.name();
  }
}
