// SPDX-License-Identifier: Apache-2.0
#include "chemamp/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"

namespace chemamp {

using json = nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

SimEnvSpec sim_env_from(const json& j) {
  check_keys(j, "env", {"n_instances", "alphabet", "answer_length", "task_kind", "tools", "q",
                        "m", "r", "m_decay", "seed", "policy"});
  SimEnvSpec spec;
  read(j, "n_instances", spec.n_instances, "env");
  read(j, "alphabet", spec.alphabet, "env");
  read(j, "answer_length", spec.answer_length, "env");
  read(j, "q", spec.q, "env");
  read(j, "m", spec.m, "env");
  read(j, "r", spec.r, "env");
  read(j, "m_decay", spec.m_decay, "env");
  read(j, "seed", spec.seed, "env");
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    check_keys(p, "env.policy", {"q", "m", "r", "m_decay"});
    read(p, "q", spec.q, "env.policy");
    read(p, "m", spec.m, "env.policy");
    read(p, "r", spec.r, "env.policy");
    read(p, "m_decay", spec.m_decay, "env.policy");
  }
  if (j.contains("task_kind")) {
    std::string kind;
    read(j, "task_kind", kind, "env");
    spec.task_kind = parse_task_kind(kind);
  }
  if (j.contains("tools")) {
    if (!j.at("tools").is_array()) throw ConfigError("env.tools must be a list");
    for (const auto& t : j.at("tools")) {
      check_keys(t, "env.tools[]", {"name", "p_correct", "perturber"});
      SimToolSpec tool;
      read(t, "name", tool.name, "env.tools[]");
      read(t, "p_correct", tool.p_correct, "env.tools[]");
      if (t.contains("perturber")) {
        std::string perturber;
        read(t, "perturber", perturber, "env.tools[]");
        tool.perturber = parse_perturber(perturber);
      }
      spec.tools.push_back(std::move(tool));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace

void SimEnvSpec::validate() const {
  if (n_instances < 1) throw ConfigError("env.n_instances must be at least 1");
  if (answer_length < 1) throw ConfigError("env.answer_length must be at least 1");
  if (alphabet.size() < 2) throw ConfigError("env.alphabet needs at least two symbols");
  for (double p : {q, m, r, m_decay}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("env probabilities must lie in [0,1]");
  }
  std::set<std::string> names;
  for (const auto& t : tools) {
    if (t.name.empty()) throw ConfigError("env tool names must not be empty");
    if (!names.insert(t.name).second) throw ConfigError("duplicate env tool '" + t.name + "'");
    if (!(t.p_correct >= 0.0 && t.p_correct <= 1.0)) {
      throw ConfigError("env tool '" + t.name + "': p_correct outside [0,1]");
    }
  }
}

SimEnvSpec parse_sim_env_spec(const std::string& json_text) {
  return sim_env_from(parse_json(json_text, "environment spec"));
}

std::string sim_env_spec_to_json(const SimEnvSpec& spec) {
  nlohmann::ordered_json j;
  j["n_instances"] = spec.n_instances;
  j["alphabet"] = spec.alphabet;
  j["answer_length"] = spec.answer_length;
  j["task_kind"] = to_string(spec.task_kind);
  j["tools"] = nlohmann::ordered_json::array();
  for (const auto& t : spec.tools) {
    j["tools"].push_back(
        {{"name", t.name}, {"p_correct", t.p_correct}, {"perturber", to_string(t.perturber)}});
  }
  j["q"] = spec.q;
  j["m"] = spec.m;
  j["r"] = spec.r;
  j["m_decay"] = spec.m_decay;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

SimEnv gen_simenv(const SimEnvSpec& spec) {
  spec.validate();
  SimEnv env;
  const auto width = std::to_string(spec.n_instances - 1).size();
  for (int i = 0; i < spec.n_instances; ++i) {
    auto index = std::to_string(i);
    index.insert(0, width - index.size(), '0');
    ValidationInstance inst;
    inst.id = "sim-" + index;
    inst.input = "query " + index;
    inst.task_kind = spec.task_kind;
    for (int c = 0; c < spec.answer_length; ++c) {
      const auto draw = hash::derive(spec.seed, "gold", static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(c));
      inst.gold.push_back(spec.alphabet[draw % spec.alphabet.size()]);
    }
    env.dataset.push_back(std::move(inst));
  }
  for (const auto& t : spec.tools) {
    ToolDescriptor d;
    d.tool_id = t.name + "_0";
    d.public_name = t.name + "_0";
    d.description = "Simulated tool " + t.name + " (answers correctly with probability " +
                    json(t.p_correct).dump() + ").";
    d.backend = Backend::kNoisyOracle;
    d.backend_params = {{"p", json(t.p_correct).dump()},
                        {"perturber", std::string(to_string(t.perturber))},
                        {"alphabet", spec.alphabet}};
    env.tools.push_back(std::move(d));
  }
  return env;
}

std::shared_ptr<Environment> environment_from(const Dataset& dataset, std::string alphabet) {
  auto env = std::make_shared<Environment>(std::move(alphabet));
  for (const auto& inst : dataset) env->set_gold(inst.input, inst.gold);
  return env;
}

std::shared_ptr<ToolRegistry> make_registry(const std::vector<ToolDescriptor>& descriptors,
                                            std::shared_ptr<const Environment> environment,
                                            const CostModel& cost_model,
                                            std::optional<std::string> fallback) {
  auto registry = std::make_shared<ToolRegistry>();
  registry->set_environment(std::move(environment));
  registry->set_cost_model(cost_model);
  if (fallback) registry->set_fallback_answer(*fallback);
  for (const auto& d : descriptors) registry->register_tool(d);
  return registry;
}

RunConfig parse_run_config(const std::string& json_text) {
  const auto doc = parse_json(json_text, "config");
  check_keys(doc, "config", {"search", "metrics", "tools", "mas", "env"});
  RunConfig config;
  if (doc.contains("search")) {
    const auto& s = doc.at("search");
    check_keys(s, "search", {"delta", "k", "top_k", "max_layers", "max_stage2_rounds", "metric",
                             "seed", "threads", "m_decay", "public_prefix", "policy"});
    auto& sc = config.search;
    read(s, "delta", sc.delta, "search");
    read(s, "k", sc.top_k, "search");
    read(s, "top_k", sc.top_k, "search");
    read(s, "max_layers", sc.max_layers, "search");
    read(s, "max_stage2_rounds", sc.max_stage2_rounds, "search");
    read(s, "seed", sc.seed, "search");
    read(s, "threads", sc.threads, "search");
    read(s, "m_decay", sc.m_decay, "search");
    read(s, "public_prefix", sc.public_prefix, "search");
    if (s.contains("metric")) {
      std::string metric;
      read(s, "metric", metric, "search");
      sc.fitness_metric = parse_metric_id(metric);
    }
    if (s.contains("policy")) {
      const auto& p = s.at("policy");
      check_keys(p, "search.policy",
                 {"kind", "q", "m", "r", "max_steps", "endpoint", "timeout_ms", "task"});
      auto& policy = sc.policy;
      if (p.contains("kind")) {
        std::string kind;
        read(p, "kind", kind, "search.policy");
        policy.kind = parse_planner_kind(kind);
      }
      if (p.contains("task")) {
        std::string task;
        read(p, "task", task, "search.policy");
        policy.task = parse_task_kind(task);
      }
      read(p, "q", policy.q, "search.policy");
      read(p, "m", policy.m, "search.policy");
      read(p, "r", policy.r, "search.policy");
      read(p, "max_steps", policy.max_steps, "search.policy");
      read(p, "endpoint", policy.endpoint, "search.policy");
      read(p, "timeout_ms", policy.timeout_ms, "search.policy");
    }
  }
  if (doc.contains("metrics")) {
    const auto& m = doc.at("metrics");
    check_keys(m, "metrics", {"fingerprint_command", "validity_command"});
    if (m.contains("fingerprint_command")) {
      std::string command;
      read(m, "fingerprint_command", command, "metrics");
      config.fingerprint_command = command;
    }
    if (m.contains("validity_command")) {
      std::string command;
      read(m, "validity_command", command, "metrics");
      config.validity_command = command;
    }
  }
  if (doc.contains("tools")) {
    const auto& t = doc.at("tools");
    check_keys(t, "tools", {"tool_call_ms", "planner_turn_ms", "per_token_ms", "fallback"});
    read(t, "tool_call_ms", config.cost_model.tool_call_ms, "tools");
    read(t, "planner_turn_ms", config.cost_model.planner_turn_ms, "tools");
    read(t, "per_token_ms", config.cost_model.per_token_ms, "tools");
    if (t.contains("fallback")) {
      std::string fallback;
      read(t, "fallback", fallback, "tools");
      config.fallback_answer = fallback;
    }
  }
  if (doc.contains("mas")) {
    const auto& m = doc.at("mas");
    check_keys(m, "mas", {"kind", "num", "rounds", "with_tools", "native_p"});
    if (m.contains("kind")) {
      std::string kind;
      read(m, "kind", kind, "mas");
      config.mas_kind = parse_topology_kind(kind);
    }
    read(m, "num", config.mas_num, "mas");
    read(m, "rounds", config.mas_rounds, "mas");
    read(m, "with_tools", config.mas_with_tools, "mas");
    read(m, "native_p", config.mas_native_p, "mas");
  }
  if (doc.contains("env")) {
    config.env = sim_env_from(doc.at("env"));
    // The simulated planner follows the env's behavior unless search says otherwise.
    const json empty = json::object();
    const auto& s = doc.contains("search") ? doc.at("search") : empty;
    const auto& p = s.contains("policy") ? s.at("policy") : empty;
    auto& policy = config.search.policy;
    if (!p.contains("q")) policy.q = config.env->q;
    if (!p.contains("m")) policy.m = config.env->m;
    if (!p.contains("r")) policy.r = config.env->r;
    if (!p.contains("task")) policy.task = config.env->task_kind;
    if (!s.contains("m_decay")) config.search.m_decay = config.env->m_decay;
  }
  return config;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

void apply_metric_plugins(RunConfig& config) {
  auto context = metrics::MetricContext::defaults();
  if (config.fingerprint_command) {
    context.fingerprint = std::make_shared<metrics::CommandFingerprint>(*config.fingerprint_command, 1024);
  }
  if (config.validity_command) {
    context.validity = std::make_shared<metrics::CommandValidityChecker>(*config.validity_command);
  }
  config.search.metric_context = std::move(context);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::vector<AmpRow> amp_rows(const std::vector<LibraryRecord>& records) {
  std::vector<AmpRow> rows;
  for (const auto& r : records) {
    rows.push_back({r.name, r.score, std::nullopt, r.depth, r.stage, r.tokens, r.sim_time_ms});
  }
  return rows;
}

std::string amp_rows_to_jsonl(const std::vector<AmpRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["validation_score"] = r.validation_score;
    if (r.test_score) j["test_score"] = *r.test_score;
    j["depth"] = r.depth;
    j["stage"] = r.stage;
    j["tokens"] = r.tokens;
    j["time"] = r.time_ms;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AmpRow> parse_amp_rows(const std::string& text) {
  std::vector<AmpRow> rows;
  std::istringstream in(text);
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      AmpRow r;
      r.name = j.at("name").get<std::string>();
      r.validation_score = j.at("validation_score").get<double>();
      if (j.contains("test_score")) r.test_score = j.at("test_score").get<double>();
      r.depth = j.at("depth").get<int>();
      r.stage = j.at("stage").get<std::string>();
      r.tokens = j.at("tokens").get<std::int64_t>();
      r.time_ms = j.at("time").get<std::int64_t>();
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("report line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

namespace {

std::string fixed(double x, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << x;
  return out.str();
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& body) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
  for (const auto& row : body) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  const auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out << "  ";
      // first column left-aligned, the rest right-aligned
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(widths[c])) << cells[c];
      } else {
        out << std::right << std::setw(static_cast<int>(widths[c])) << cells[c];
      }
    }
    out << '\n';
  };
  emit(header);
  std::vector<std::string> rule;
  for (auto w : widths) rule.emplace_back(w, '-');
  emit(rule);
  for (const auto& row : body) emit(row);
  return out.str();
}

}  // namespace

std::string render_amp_table(const std::vector<AmpRow>& rows) {
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    body.push_back({r.name, fixed(r.validation_score, 4), r.test_score ? fixed(*r.test_score, 4) : "-",
                    std::to_string(r.depth), r.stage, std::to_string(r.tokens),
                    std::to_string(r.time_ms)});
  }
  return render_table({"name", "validation", "test", "depth", "stage", "tokens", "time_ms"}, body);
}

std::string mas_rows_to_jsonl(const std::vector<MasRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["kind"] = r.kind;
    j["NUM"] = r.num;
    j["rounds"] = r.rounds;
    j["score"] = r.score;
    j["all_tokens"] = r.all_tokens;
    j["sim_time_ms"] = r.sim_time_ms;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<MasRow> parse_mas_rows(const std::string& text) {
  std::vector<MasRow> rows;
  std::istringstream in(text);
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      rows.push_back({j.at("kind").get<std::string>(), j.at("NUM").get<int>(),
                      j.at("rounds").get<int>(), j.at("score").get<double>(),
                      j.at("all_tokens").get<double>(), j.at("sim_time_ms").get<double>()});
    } catch (const json::exception& e) {
      throw DataError("MAS report line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::string render_mas_table(const std::vector<MasRow>& rows) {
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    body.push_back({r.kind, std::to_string(r.num), std::to_string(r.rounds), fixed(r.score, 4),
                    fixed(r.all_tokens, 2), fixed(r.sim_time_ms, 1)});
  }
  return render_table({"kind", "NUM", "rounds", "score", "all_tokens", "sim_time_ms"}, body);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

}  // namespace chemamp
