// SPDX-License-Identifier: Apache-2.0
#include "chemamp/topology.hpp"

#include <algorithm>
#include <map>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"
#include "chemamp/prompts.hpp"

namespace chemamp {

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kChain:
      return "chain";
    case TopologyKind::kRandom:
      return "random";
    case TopologyKind::kFullConnected:
      return "full_connected";
    case TopologyKind::kLayered:
      return "layered";
    case TopologyKind::kStar:
      return "star";
    case TopologyKind::kDebate:
      return "debate";
  }
  return "unknown";
}

const std::vector<TopologyKind>& all_topology_kinds() {
  static const std::vector<TopologyKind> kinds = {
      TopologyKind::kChain, TopologyKind::kRandom, TopologyKind::kFullConnected,
      TopologyKind::kLayered, TopologyKind::kStar, TopologyKind::kDebate};
  return kinds;
}

TopologyKind parse_topology_kind(std::string_view name) {
  for (auto k : all_topology_kinds()) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown topology kind '" + std::string(name) + "'");
}

int default_rounds(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kRandom:
    case TopologyKind::kStar:
    case TopologyKind::kDebate:
      return 2;
    default:
      return 1;
  }
}

std::size_t TopologySpec::message_count() const {
  std::size_t n = 0;
  for (const auto& stage : stages) n += stage.sends.size();
  return n;
}

std::size_t TopologySpec::activation_count() const {
  std::size_t n = 0;
  for (const auto& stage : stages) n += stage.agents.size();
  return n;
}

bool same_graph(const TopologySpec& a, const TopologySpec& b) {
  return a.num_agents == b.num_agents && a.stages == b.stages;
}

namespace {

std::vector<int> agent_range(int first, int last) {
  std::vector<int> out;
  for (int a = first; a <= last; ++a) out.push_back(a);
  return out;
}

void all_to_final(TopologyStage& stage, const std::vector<int>& agents) {
  for (int a : agents) stage.sends.push_back({a, kFinal});
}

void chain(TopologySpec& spec) {
  const int n = spec.num_agents;
  spec.stages.push_back({1, {}, {{kUser, 1}}});
  for (int r = 1; r <= spec.rounds; ++r) {
    for (int a = 1; a <= n; ++a) {
      TopologyStage stage{r, {a}, {}};
      if (a < n) {
        stage.sends.push_back({a, a + 1});
      } else if (r < spec.rounds) {
        stage.sends.push_back({n, 1});
      } else {
        stage.sends.push_back({n, kFinal});
      }
      spec.stages.push_back(std::move(stage));
    }
  }
}

void full_connected(TopologySpec& spec) {
  const int n = spec.num_agents;
  for (int r = 1; r <= spec.rounds; ++r) {
    for (int a = 1; a <= n; ++a) {
      TopologyStage stage{r, {a}, {}};
      for (int later = a + 1; later <= n; ++later) stage.sends.push_back({a, later});
      spec.stages.push_back(std::move(stage));
    }
  }
  TopologyStage fan_in{spec.rounds, {}, {}};
  all_to_final(fan_in, agent_range(1, n));
  spec.stages.push_back(std::move(fan_in));
}

void layered(TopologySpec& spec) {
  const int n = spec.num_agents;
  const auto first = agent_range(1, (n + 1) / 2);
  const auto second = agent_range((n + 1) / 2 + 1, n);
  for (int r = 1; r <= spec.rounds; ++r) {
    TopologyStage front{r, first, {}};
    for (int a : first) {
      for (int b : second) front.sends.push_back({a, b});
    }
    spec.stages.push_back(std::move(front));
    TopologyStage back{r, second, {}};
    if (r < spec.rounds) {
      for (int b : second) {
        for (int a : first) back.sends.push_back({b, a});
      }
    } else {
      all_to_final(back, second);
    }
    spec.stages.push_back(std::move(back));
  }
}

void star(TopologySpec& spec) {
  const auto leaves = agent_range(1, spec.num_agents);
  for (int r = 1; r <= spec.rounds; ++r) {
    TopologyStage stage{r, leaves, {}};
    all_to_final(stage, leaves);
    spec.stages.push_back(std::move(stage));
  }
}

void debate(TopologySpec& spec) {
  const auto agents = agent_range(1, spec.num_agents);
  for (int r = 0; r <= spec.rounds; ++r) {
    TopologyStage stage{r, agents, {}};
    if (r < spec.rounds) {
      for (int a : agents) {
        for (int b : agents) {
          if (a != b) stage.sends.push_back({a, b});
        }
      }
    } else {
      all_to_final(stage, agents);
    }
    spec.stages.push_back(std::move(stage));
  }
}

void random_graph(TopologySpec& spec) {
  const int n = spec.num_agents;
  const auto agents = agent_range(1, n);
  for (int r = 0; r <= spec.rounds; ++r) {
    TopologyStage stage{r, agents, {}};
    if (r < spec.rounds) {
      for (int a : agents) {
        // uniform over the n - 1 other agents
        auto pick = static_cast<int>(hash::derive(spec.seed, "random-edge", static_cast<std::uint64_t>(r),
                                                  static_cast<std::uint64_t>(a)) %
                                     static_cast<std::uint64_t>(n - 1)) + 1;
        if (pick >= a) ++pick;
        stage.sends.push_back({a, pick});
      }
    } else {
      all_to_final(stage, agents);
    }
    spec.stages.push_back(std::move(stage));
  }
}

}  // namespace

TopologySpec build_topology(TopologyKind kind, int num_agents, int rounds, std::uint64_t seed) {
  if (num_agents < 0) throw ConfigError("NUM must be non-negative");
  if (rounds < 0) throw ConfigError("rounds must be positive");
  TopologySpec spec;
  spec.kind = kind;
  spec.num_agents = num_agents;
  spec.rounds = rounds == 0 ? default_rounds(kind) : rounds;
  spec.seed = seed;
  if (num_agents == 0) return spec;
  if (num_agents == 1) {
    spec.stages.push_back({1, {1}, {{1, kFinal}}});
    return spec;
  }
  switch (kind) {
    case TopologyKind::kChain:
      chain(spec);
      break;
    case TopologyKind::kRandom:
      random_graph(spec);
      break;
    case TopologyKind::kFullConnected:
      full_connected(spec);
      break;
    case TopologyKind::kLayered:
      layered(spec);
      break;
    case TopologyKind::kStar:
      star(spec);
      break;
    case TopologyKind::kDebate:
      debate(spec);
      break;
  }
  return spec;
}

std::size_t closed_form_message_count(TopologyKind kind, int num_agents, int rounds) {
  const auto n = static_cast<std::size_t>(num_agents);
  const auto r = static_cast<std::size_t>(rounds == 0 ? default_rounds(kind) : rounds);
  switch (kind) {
    case TopologyKind::kChain:
      return n * r + 1;
    case TopologyKind::kFullConnected:
      return n * (n - 1) / 2 * r + n;
    case TopologyKind::kStar:
      return n * r;
    case TopologyKind::kDebate:
      return n * (n - 1) * r + n;
    case TopologyKind::kLayered: {
      const auto upper = (n + 1) / 2;
      const auto lower = n / 2;
      return (2 * r - 1) * upper * lower + lower;
    }
    case TopologyKind::kRandom:
      return n * r + n;
  }
  return 0;
}

std::string final_refer(std::string_view question, const std::vector<std::string>& answers,
                        const PlannerPolicy& policy, std::optional<std::string_view> gold,
                        std::uint64_t seed, CostLedger* ledger, const CostModel& cost_model) {
  if (answers.empty()) throw ConfigError("final_refer needs at least one answer");
  std::map<std::string, int> votes;
  for (const auto& a : answers) ++votes[metrics::strip_whitespace(a).value_or(a)];
  int top = 0;
  for (const auto& [answer, count] : votes) top = std::max(top, count);
  std::vector<std::string> tied;
  for (const auto& [answer, count] : votes) {
    if (count == top) tied.push_back(answer);
  }
  std::string chosen = tied.front();
  if (tied.size() > 1) {
    auto judge = policy;
    judge.r = 0.0;
    judge.m = 0.0;
    chosen = decide(judge, question, tied, gold, hash::derive(seed, "final-refer")).answer;
  }
  if (ledger != nullptr) {
    std::string listing;
    for (std::size_t i = 0; i < answers.size(); ++i) {
      listing += "Agent " + std::to_string(i + 1) + ": " + answers[i] + "\n";
    }
    const auto prompt = prompts::render_prompt(
        "final_refer", {{"question", std::string(question)}, {"answers", listing}});
    cost_model.charge_planner_turn(*ledger, estimate_tokens(prompt),
                                   estimate_tokens("The final answer is '" + chosen + "'"));
  }
  return chosen;
}

namespace {

struct Message {
  std::string text;
  bool usable = true;  // false for failures and reserved answers
};

}  // namespace

NetworkOutcome run_network(const TopologySpec& spec, std::string_view query,
                           const PlannerPolicy& policy, const ToolRegistry& registry,
                           const NetworkOptions& options, std::uint64_t seed) {
  policy.validate();
  if (!(options.native_p >= 0.0 && options.native_p <= 1.0)) {
    throw ConfigError("native_p must lie in [0,1]");
  }
  const auto& cost = registry.cost_model();
  const auto gold = registry.environment().gold(query);
  const auto& env = registry.environment();
  NetworkOutcome out;

  // Answer an agent produces on its own, before reading its inbox.
  const auto own_answer = [&](int agent, int round, CostLedger& ledger) -> std::string {
    const auto agent_seed = hash::derive(seed, static_cast<std::uint64_t>(agent + 1),
                                         static_cast<std::uint64_t>(round));
    if (options.toolset) {
      auto outcome = run_react(policy, *options.toolset, query, registry, agent_seed);
      ledger += outcome.ledger;
      return outcome.answer;
    }
    if (!gold) return registry.fallback_answer();
    const auto key = hash::derive(agent_seed, "native", query);
    if (hash::unit_interval(key) < options.native_p) return std::string(*gold);
    return perturb(*gold, Perturber::kSubstitute, env.alphabet(), hash::mix64(key));
  };

  const auto task_prompt = prompts::render_prompt(prompts::task_template_id(policy.task),
                                                  {{"input", std::string(query)}});
  std::map<int, Message> latest;
  std::map<int, std::vector<Message>> inbox;
  latest[kUser] = {std::string(query), false};

  for (const auto& stage : spec.stages) {
    for (int agent : stage.agents) {
      auto received = std::move(inbox[agent]);
      inbox[agent].clear();
      Message result;
      try {
        std::vector<std::string> candidates;
        auto own = own_answer(agent, stage.round, out.ledger);
        if (own != kReserveAnswer) candidates.push_back(own);
        std::string listing;
        for (const auto& m : received) {
          listing += m.text + "\n";
          if (m.usable) candidates.push_back(m.text);
        }
        const auto prompt = prompts::render_prompt(
            "mas_agent", {{"task_prompt", task_prompt}, {"messages", listing}});
        if (candidates.empty()) {
          result = {std::string(kReserveAnswer), false};
        } else {
          const auto agent_seed = hash::derive(seed, static_cast<std::uint64_t>(agent + 1),
                                               static_cast<std::uint64_t>(stage.round));
          auto decision = decide(policy, query, candidates, gold, agent_seed);
          result = {decision.answer, decision.answer != kReserveAnswer};
        }
        cost.charge_planner_turn(out.ledger, estimate_tokens(prompt), estimate_tokens(result.text));
      } catch (const ToolFailure& e) {
        ++out.agent_failures;
        result = {std::string("Agent failure: ") + e.what(), false};
      }
      latest[agent] = std::move(result);
    }
    for (const auto& edge : stage.sends) {
      const auto& message = latest.at(edge.from);
      const auto tokens = estimate_tokens(message.text);
      out.ledger.prompt_tokens += tokens;
      out.ledger.sim_time_ms += cost.per_token_ms * tokens;
      inbox[edge.to].push_back(message);
    }
  }

  std::vector<std::string> answers;
  for (const auto& m : inbox[kFinal]) {
    if (m.usable) answers.push_back(m.text);
  }
  if (answers.empty()) {
    // No agents (or none with a usable answer): FinalRefer answers alone.
    try {
      answers.push_back(own_answer(kFinal, 0, out.ledger));
    } catch (const ToolFailure&) {
      ++out.agent_failures;
      answers.push_back(registry.fallback_answer());
    }
  }
  out.answer = final_refer(query, answers, policy, gold, seed, &out.ledger, cost);
  return out;
}

MasRow evaluate_network(const TopologySpec& spec, const Dataset& dataset,
                        const PlannerPolicy& policy, const ToolRegistry& registry,
                        const NetworkOptions& options, MetricId metric, std::uint64_t seed) {
  if (dataset.empty()) throw DataError("dataset is empty");
  MasRow row{std::string(to_string(spec.kind)), spec.num_agents, spec.rounds, 0.0, 0.0, 0.0};
  for (const auto& inst : dataset) {
    auto outcome = run_network(spec, inst.input, policy, registry, options,
                               hash::derive(seed, inst.id));
    auto scores = outcome.answer == kReserveAnswer
                      ? metrics::zero_scores(inst.task_kind, inst.gold)
                      : metrics::score_instance(inst.task_kind, outcome.answer, inst.gold);
    auto it = scores.find(metric);
    if (it == scores.end()) {
      throw ConfigError("metric '" + std::string(to_string(metric)) + "' is not scored for " +
                        std::string(to_string(inst.task_kind)));
    }
    row.score += it->second;
    row.all_tokens += static_cast<double>(outcome.ledger.all_tokens());
    row.sim_time_ms += static_cast<double>(outcome.ledger.sim_time_ms);
  }
  const auto n = static_cast<double>(dataset.size());
  row.score /= n;
  row.all_tokens /= n;
  row.sim_time_ms /= n;
  return row;
}

}  // namespace chemamp
