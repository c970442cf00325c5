// SPDX-License-Identifier: Apache-2.0
#include "chemamp/agent.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"
#include "chemamp/http.hpp"
#include "chemamp/prompts.hpp"

namespace chemamp {

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::kThought:
      return "thought";
    case StepKind::kAction:
      return "action";
    case StepKind::kObservation:
      return "observation";
    case StepKind::kFinal:
      return "final";
  }
  return "unknown";
}

StepKind parse_step_kind(std::string_view name) {
  for (auto k : {StepKind::kThought, StepKind::kAction, StepKind::kObservation, StepKind::kFinal}) {
    if (to_string(k) == name) return k;
  }
  throw ProtocolError("unknown step kind '" + std::string(name) + "'");
}

std::string_view to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::kScripted:
      return "scripted";
    case PlannerKind::kSimulated:
      return "simulated";
    case PlannerKind::kRemote:
      return "remote";
  }
  return "unknown";
}

PlannerKind parse_planner_kind(std::string_view name) {
  for (auto k : {PlannerKind::kScripted, PlannerKind::kSimulated, PlannerKind::kRemote}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown planner kind '" + std::string(name) + "'");
}

std::string_view to_string(Pattern pattern) {
  switch (pattern) {
    case Pattern::kCorrect:
      return "correct";
    case Pattern::kModify:
      return "modify";
    case Pattern::kJudge:
      return "judge";
    case Pattern::kReserve:
      return "reserve";
  }
  return "unknown";
}

void PlannerPolicy::validate() const {
  for (double p : {q, m, r}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("planner probabilities must lie in [0,1]");
  }
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (kind == PlannerKind::kRemote && endpoint.empty()) {
    throw ConfigError("remote planner needs an endpoint");
  }
}

Decision decide(const PlannerPolicy& policy, std::string_view query,
                const std::vector<std::string>& answers, std::optional<std::string_view> gold,
                std::uint64_t seed) {
  if (answers.empty()) throw ConfigError("decide needs at least one answer");
  std::vector<std::string> distinct = answers;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  if (distinct.size() == 1) {
    const auto& consensus = distinct.front();
    if (gold && consensus != *gold && policy.m > 0.0 &&
        hash::unit_interval(hash::derive(seed, query, "modify", static_cast<std::uint64_t>(
                                                                    policy.layer))) < policy.m) {
      return {std::string(*gold), Pattern::kModify};
    }
    return {consensus, Pattern::kCorrect};
  }

  std::string seen;
  for (const auto& a : distinct) {
    seen += a;
    seen.push_back('\x1f');
  }
  if (policy.r > 0.0 &&
      hash::unit_interval(hash::derive(seed, query, "reserve", seen)) < policy.r) {
    return {std::string(kReserveAnswer), Pattern::kReserve};
  }
  const auto key = hash::derive(seed, query, "judge", seen);
  auto gold_it = gold ? std::find(distinct.begin(), distinct.end(), *gold) : distinct.end();
  if (gold_it == distinct.end()) {
    return {distinct[hash::mix64(key) % distinct.size()], Pattern::kJudge};
  }
  if (hash::unit_interval(key) < policy.q) return {*gold_it, Pattern::kJudge};
  distinct.erase(gold_it);
  return {distinct[hash::mix64(key) % distinct.size()], Pattern::kJudge};
}

std::string render_scratchpad(const std::vector<ReActStep>& trace) {
  std::string out;
  for (const auto& step : trace) {
    switch (step.kind) {
      case StepKind::kThought:
        out += "Thought: " + step.text + "\n";
        break;
      case StepKind::kAction:
        out += "Action: " + step.tool_id.value_or("") + "\nAction Input: " +
               step.tool_input.value_or("") + "\n";
        break;
      case StepKind::kObservation:
        out += "Observation: " + step.text + "\n";
        break;
      case StepKind::kFinal:
        out += "Final Answer: " + step.text + "\n";
        break;
    }
  }
  return out;
}

namespace {

// One episode's mutable state: the trace, its ledger, and the cost model used
// to charge each step.
class Episode {
 public:
  Episode(const PlannerPolicy& policy, const std::vector<std::string>& toolset,
          std::string_view query, const ToolRegistry& registry, std::uint64_t seed)
      : policy_(policy), query_(query), registry_(registry), seed_(seed),
        cost_(registry.cost_model()) {
    std::string tools;
    std::string names;
    for (const auto& id : toolset) {
      const auto& d = registry.descriptor(id);
      tools += "- " + d.public_name + ": " + d.description + "\n";
      if (!names.empty()) names += ", ";
      names += d.public_name;
    }
    header_vars_ = {{"task_prompt", prompts::render_prompt(prompts::task_template_id(policy.task),
                                                           {{"input", std::string(query)}})},
                    {"tools", tools},
                    {"tool_names", names}};
  }

  std::int64_t prompt_tokens() const {
    auto vars = header_vars_;
    vars["scratchpad"] = render_scratchpad(out_.trace);
    return estimate_tokens(prompts::render_prompt("react", vars));
  }

  void thought(std::string text) {
    cost_.charge_planner_turn(out_.ledger, prompt_tokens(), estimate_tokens(text));
    out_.trace.push_back({StepKind::kThought, std::move(text), std::nullopt, std::nullopt});
  }

  // Records an action and its observation. Returns the answer, or nullopt
  // when the tool failed.
  std::optional<std::string> call(const std::string& tool_id, const std::string& input) {
    const auto& name = registry_.descriptor(tool_id).public_name;
    ReActStep action{StepKind::kAction, "Call " + name, tool_id, input};
    const auto tokens = estimate_tokens(action.text) + estimate_tokens(input);
    out_.ledger.completion_tokens += tokens;
    out_.ledger.sim_time_ms += cost_.per_token_ms * tokens;
    out_.trace.push_back(std::move(action));
    ++calls_;
    try {
      auto answer = registry_.invoke(tool_id, input, out_.ledger, seed_);
      out_.trace.push_back({StepKind::kObservation, answer, std::nullopt, std::nullopt});
      last_observation_ = answer;
      return answer;
    } catch (const ToolFailure& e) {
      ++out_.tool_failures;
      std::string text = std::string("Tool failure: ") + e.what();
      out_.trace.push_back({StepKind::kObservation, text, std::nullopt, std::nullopt});
      last_observation_ = std::move(text);
      return std::nullopt;
    }
  }

  bool budget_left() const { return calls_ < policy_.max_steps; }

  AgentOutcome finish(std::string answer) {
    const auto prompt = prompt_tokens();
    cost_.charge_planner_turn(out_.ledger, prompt, estimate_tokens("Final Answer: " + answer));
    out_.trace.push_back({StepKind::kFinal, answer, std::nullopt, std::nullopt});
    out_.answer = std::move(answer);
    return std::move(out_);
  }

  AgentOutcome exhaust() {
    out_.budget_exhausted = true;
    return finish(last_observation_.value_or(registry_.fallback_answer()));
  }

  AgentOutcome& outcome() { return out_; }
  const std::optional<std::string>& last_observation() const { return last_observation_; }
  std::string_view query() const { return query_; }

 private:
  const PlannerPolicy& policy_;
  std::string query_;
  const ToolRegistry& registry_;
  std::uint64_t seed_;
  const CostModel& cost_;
  prompts::Variables header_vars_;
  AgentOutcome out_;
  int calls_ = 0;
  std::optional<std::string> last_observation_;
};

std::vector<std::string> calls_for(const PlannerPolicy& policy,
                                   const std::vector<std::string>& toolset) {
  if (policy.call_order.empty()) return toolset;
  for (const auto& id : policy.call_order) {
    if (std::find(toolset.begin(), toolset.end(), id) == toolset.end()) {
      throw ConfigError("call_order names '" + id + "', which is not in the toolset");
    }
  }
  return policy.call_order;
}

AgentOutcome run_simulated(const PlannerPolicy& policy, const std::vector<std::string>& toolset,
                           std::string_view query, const ToolRegistry& registry,
                           std::uint64_t seed) {
  if (toolset.empty()) throw ConfigError("simulated planner needs a nonempty toolset");
  Episode episode(policy, toolset, query, registry, seed);
  std::vector<std::string> answers;
  bool saw_reserve = false;
  for (const auto& id : calls_for(policy, toolset)) {
    if (!episode.budget_left()) return episode.exhaust();
    episode.thought("I should ask " + registry.descriptor(id).public_name + " for its answer.");
    auto answer = episode.call(id, std::string(query));
    if (!answer) continue;
    if (*answer == kReserveAnswer) {
      saw_reserve = true;
    } else {
      answers.push_back(std::move(*answer));
    }
  }
  if (answers.empty()) {
    if (!saw_reserve) {
      throw ToolFailure("every tool failed for query '" + std::string(query) + "'");
    }
    episode.outcome().reserved = true;
    episode.outcome().pattern = Pattern::kReserve;
    return episode.finish(std::string(kReserveAnswer));
  }
  auto decision = decide(policy, query, answers, registry.environment().gold(query), seed);
  episode.outcome().pattern = decision.pattern;
  episode.outcome().reserved = decision.pattern == Pattern::kReserve;
  return episode.finish(std::move(decision.answer));
}

AgentOutcome run_scripted(const PlannerPolicy& policy, const std::vector<std::string>& toolset,
                          std::string_view query, const ToolRegistry& registry,
                          std::uint64_t seed) {
  Episode episode(policy, toolset, query, registry, seed);
  std::vector<ReActStep> script = policy.script;
  if (script.empty()) {
    for (const auto& id : calls_for(policy, toolset)) {
      script.push_back({StepKind::kAction, "", id, std::nullopt});
    }
    script.push_back({StepKind::kFinal, "", std::nullopt, std::nullopt});
  }
  for (const auto& step : script) {
    if (step.kind == StepKind::kFinal) {
      if (!step.text.empty()) return episode.finish(step.text);
      return episode.finish(episode.last_observation().value_or(registry.fallback_answer()));
    }
    if (step.kind != StepKind::kAction || !step.tool_id) {
      throw ConfigError("scripted planners accept only action and final steps");
    }
    if (!episode.budget_left()) return episode.exhaust();
    episode.thought("Next I call " + registry.descriptor(*step.tool_id).public_name + ".");
    episode.call(*step.tool_id, step.tool_input.value_or(std::string(query)));
  }
  return episode.finish(episode.last_observation().value_or(registry.fallback_answer()));
}

AgentOutcome run_remote(const PlannerPolicy& policy, const std::vector<std::string>& toolset,
                        std::string_view query, const ToolRegistry& registry,
                        std::uint64_t seed) {
  Episode episode(policy, toolset, query, registry, seed);
  std::vector<ToolDescriptor> descriptors;
  for (const auto& id : toolset) descriptors.push_back(registry.descriptor(id));
  const auto resolve = [&](const std::string& name) -> const std::string& {
    for (const auto& d : descriptors) {
      if (d.tool_id == name || d.public_name == name) return d.tool_id;
    }
    throw ProtocolError("remote planner chose unknown tool '" + name + "'");
  };
  // Thoughts do not consume the tool budget, so cap planner turns separately.
  const int max_turns = 4 * policy.max_steps;
  for (int turn = 0; turn < max_turns; ++turn) {
    auto step = remote_plan(policy.endpoint, episode.outcome().trace, descriptors, query,
                            policy.timeout_ms);
    switch (step.kind) {
      case StepKind::kThought:
        episode.thought(std::move(step.text));
        break;
      case StepKind::kAction:
        if (!episode.budget_left()) return episode.exhaust();
        episode.call(resolve(*step.tool_id), *step.tool_input);
        break;
      case StepKind::kFinal:
        return episode.finish(std::move(step.text));
      case StepKind::kObservation:
        throw ProtocolError("remote planner returned an observation step");
    }
  }
  return episode.exhaust();
}

}  // namespace

AgentOutcome run_react(const PlannerPolicy& policy, const std::vector<std::string>& toolset,
                       std::string_view query, const ToolRegistry& registry, std::uint64_t seed) {
  policy.validate();
  switch (policy.kind) {
    case PlannerKind::kSimulated:
      return run_simulated(policy, toolset, query, registry, seed);
    case PlannerKind::kScripted:
      return run_scripted(policy, toolset, query, registry, seed);
    case PlannerKind::kRemote:
      return run_remote(policy, toolset, query, registry, seed);
  }
  throw ConfigError("unknown planner kind");
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json step_json(const ReActStep& step) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(step.kind);
  j["text"] = step.text;
  if (step.tool_id) j["tool_id"] = *step.tool_id;
  if (step.tool_input) j["tool_input"] = *step.tool_input;
  return j;
}

ReActStep step_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProtocolError("step must be a JSON object");
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw ProtocolError("step is missing a string 'kind'");
  }
  ReActStep step;
  step.kind = parse_step_kind(j.at("kind").get<std::string>());
  const auto optional_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) throw ProtocolError(std::string("step field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
  };
  step.text = optional_string("text").value_or("");
  step.tool_id = optional_string("tool_id");
  step.tool_input = optional_string("tool_input");
  if (step.kind == StepKind::kAction && (!step.tool_id || !step.tool_input)) {
    throw ProtocolError("action step needs tool_id and tool_input");
  }
  return step;
}

}  // namespace

ReActStep parse_step(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("step is not valid JSON: ") + e.what());
  }
  return step_from_json(j);
}

std::string step_to_json(const ReActStep& step) { return step_json(step).dump(); }

ReActStep remote_plan(const std::string& endpoint, const std::vector<ReActStep>& trace_so_far,
                      const std::vector<ToolDescriptor>& tools, std::string_view query,
                      int timeout_ms) {
  nlohmann::ordered_json request;
  request["trace"] = nlohmann::ordered_json::array();
  for (const auto& step : trace_so_far) request["trace"].push_back(step_json(step));
  request["tools"] = nlohmann::ordered_json::array();
  for (const auto& d : tools) {
    request["tools"].push_back({{"name", d.public_name}, {"description", d.description}});
  }
  request["query"] = std::string(query);
  return parse_step(post_json(endpoint, "/plan", request.dump(), timeout_ms));
}

void write_trace(std::ostream& out, const std::vector<ReActStep>& trace) {
  for (const auto& step : trace) out << step_to_json(step) << '\n';
}

std::vector<ReActStep> read_trace(std::istream& in) {
  std::vector<ReActStep> trace;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    try {
      trace.push_back(parse_step(line));
    } catch (const ProtocolError& e) {
      throw DataError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace chemamp
