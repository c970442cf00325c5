// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chemamp/agent.hpp"
#include "chemamp/dataset.hpp"
#include "chemamp/toolkit.hpp"

namespace chemamp {

enum class TopologyKind { kChain, kRandom, kFullConnected, kLayered, kStar, kDebate };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);
const std::vector<TopologyKind>& all_topology_kinds();

/// Rounds used when a caller passes 0: two for random, star and debate, one
/// otherwise.
int default_rounds(TopologyKind kind);

inline constexpr int kUser = 0;
inline constexpr int kFinal = -1;

/// A directed message. Agents are numbered 1..NUM; kUser injects the
/// question, kFinal is the FinalRefer agent (the root, for star).
struct Edge {
  int from = kUser;
  int to = kFinal;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// One barrier step: the listed agents act on their inboxes, then every edge
/// delivers its sender's latest output to the receiver's inbox.
struct TopologyStage {
  int round = 0;
  std::vector<int> agents;
  std::vector<Edge> sends;
  friend bool operator==(const TopologyStage&, const TopologyStage&) = default;
};

struct TopologySpec {
  TopologyKind kind = TopologyKind::kChain;
  int num_agents = 0;
  int rounds = 1;
  std::uint64_t seed = 0;
  std::vector<TopologyStage> stages;

  std::size_t message_count() const;
  std::size_t activation_count() const;
};

/// Same stages and edges, ignoring kind, rounds and seed.
bool same_graph(const TopologySpec& a, const TopologySpec& b);

/// Builds the communication schedule. NUM = 0 leaves FinalRefer to answer
/// alone; NUM = 1 is a single agent reporting to FinalRefer for every kind.
/// `rounds` = 0 selects default_rounds(kind).
TopologySpec build_topology(TopologyKind kind, int num_agents, int rounds = 0,
                            std::uint64_t seed = 0);

/// Message totals of the constructions for NUM >= 2.
std::size_t closed_form_message_count(TopologyKind kind, int num_agents, int rounds);

struct NetworkOptions {
  /// Tools every agent drives with run_react; none means agents answer from
  /// their own knowledge.
  std::optional<std::vector<std::string>> toolset;
  /// Chance an agent without tools knows the gold answer.
  double native_p = 0.5;
};

struct NetworkOutcome {
  std::string answer;
  CostLedger ledger;
  int agent_failures = 0;
};

/// Majority vote over whitespace-stripped answers; ties go to the judge
/// branch of `policy`. Renders and charges the FinalRefer prompt when
/// `ledger` is given.
std::string final_refer(std::string_view question, const std::vector<std::string>& answers,
                        const PlannerPolicy& policy, std::optional<std::string_view> gold,
                        std::uint64_t seed, CostLedger* ledger = nullptr,
                        const CostModel& cost_model = {});

NetworkOutcome run_network(const TopologySpec& spec, std::string_view query,
                           const PlannerPolicy& policy, const ToolRegistry& registry,
                           const NetworkOptions& options, std::uint64_t seed);

/// One Table-5 style row, averaged per query.
struct MasRow {
  std::string kind;
  int num = 0;
  int rounds = 0;
  double score = 0.0;
  double all_tokens = 0.0;
  double sim_time_ms = 0.0;
  friend bool operator==(const MasRow&, const MasRow&) = default;
};

MasRow evaluate_network(const TopologySpec& spec, const Dataset& dataset,
                        const PlannerPolicy& policy, const ToolRegistry& registry,
                        const NetworkOptions& options, MetricId metric, std::uint64_t seed);

}  // namespace chemamp
