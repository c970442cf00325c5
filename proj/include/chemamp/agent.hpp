// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chemamp/metrics.hpp"
#include "chemamp/toolkit.hpp"

namespace chemamp {

inline constexpr std::string_view kReserveAnswer = "UNABLE_TO_ANSWER";

enum class StepKind { kThought, kAction, kObservation, kFinal };

std::string_view to_string(StepKind kind);
StepKind parse_step_kind(std::string_view name);

struct ReActStep {
  StepKind kind = StepKind::kThought;
  std::string text;
  std::optional<std::string> tool_id;
  std::optional<std::string> tool_input;

  friend bool operator==(const ReActStep&, const ReActStep&) = default;
};

enum class PlannerKind { kScripted, kSimulated, kRemote };

std::string_view to_string(PlannerKind kind);
PlannerKind parse_planner_kind(std::string_view name);

/// The behavior a simulated planner showed on one query.
enum class Pattern { kCorrect, kModify, kJudge, kReserve };

std::string_view to_string(Pattern pattern);

struct PlannerPolicy {
  PlannerKind kind = PlannerKind::kSimulated;
  /// Tools to call, in order. Empty means every tool of the toolset.
  std::vector<std::string> call_order;
  double q = 1.0;  // judge accuracy
  double m = 0.0;  // repair probability for a wrong consensus
  double r = 0.0;  // reserve probability after disagreement
  int max_steps = 10;
  /// Salt for the repair draw, so stacked layers repair independently.
  int layer = 1;
  TaskKind task = TaskKind::kMoleculeDesign;

  /// Scripted planners replay these action/final steps. An action without
  /// tool_input sends the query; a final with empty text answers with the
  /// last observation. An empty script calls call_order then finalizes.
  std::vector<ReActStep> script;

  /// Remote planners POST to endpoint + "/plan".
  std::string endpoint;
  int timeout_ms = 30000;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct AgentOutcome {
  std::string answer;
  std::vector<ReActStep> trace;
  CostLedger ledger;
  bool reserved = false;
  bool budget_exhausted = false;
  std::optional<Pattern> pattern;
  int tool_failures = 0;
};

struct Decision {
  std::string answer;
  Pattern pattern = Pattern::kCorrect;
};

/// Simulated planner choice over the collected answers. Draws are keyed by
/// (seed, query, branch, what the planner saw) so the same observations
/// always lead to the same choice. `gold` is the environment's answer when
/// known. Requires a nonempty `answers`.
Decision decide(const PlannerPolicy& policy, std::string_view query,
                const std::vector<std::string>& answers, std::optional<std::string_view> gold,
                std::uint64_t seed);

/// Runs one ReAct episode over `toolset` through `registry`. All token and
/// call costs land in the returned ledger.
AgentOutcome run_react(const PlannerPolicy& policy, const std::vector<std::string>& toolset,
                       std::string_view query, const ToolRegistry& registry, std::uint64_t seed);

/// Asks a remote planner for the next step.
ReActStep remote_plan(const std::string& endpoint, const std::vector<ReActStep>& trace_so_far,
                      const std::vector<ToolDescriptor>& tools, std::string_view query,
                      int timeout_ms = 30000);

/// Parses one step object; missing or ill-typed fields are a ProtocolError.
ReActStep parse_step(std::string_view json_text);
std::string step_to_json(const ReActStep& step);

/// JSON Lines trace files, one step per line.
void write_trace(std::ostream& out, const std::vector<ReActStep>& trace);
std::vector<ReActStep> read_trace(std::istream& in);

/// "Thought: ..." / "Action: ..." transcript used as the prompt scratchpad.
std::string render_scratchpad(const std::vector<ReActStep>& trace);

}  // namespace chemamp
