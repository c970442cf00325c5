// SPDX-License-Identifier: Apache-2.0
// Command-line front end: amplify, evaluate, mas, parse-name, gen-env, report.
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "chemamp/amplifier.hpp"
#include "chemamp/composition.hpp"
#include "chemamp/error.hpp"
#include "chemamp/harness.hpp"
#include "chemamp/topology.hpp"

namespace fs = std::filesystem;
using namespace chemamp;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> metric;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "Run seed");
  cmd->add_option("--metric", c.metric, "Fitness metric (bleu2, exact, accuracy, ...)");
  cmd->add_option("--threads", c.threads, "Scoring threads (0 = hardware count)");
}

RunConfig resolve(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) config.search.seed = *c.seed;
  if (c.metric) config.search.fitness_metric = parse_metric_id(*c.metric);
  if (c.threads) config.search.threads = *c.threads;
  apply_metric_plugins(config);
  return config;
}

// Loads tools and data from files, or generates them from the config's env
// section when the files are not given.
struct Workspace {
  Dataset data;
  std::shared_ptr<ToolRegistry> registry;
  std::vector<std::string> tool_ids;
};

Workspace open_workspace(const RunConfig& config, const std::string& tools_path,
                         const std::string& data_path, const char* data_flag) {
  Workspace ws;
  std::vector<ToolDescriptor> descriptors;
  std::string alphabet;
  if (!tools_path.empty()) descriptors = load_tool_descriptors(tools_path);
  if (!data_path.empty()) ws.data = load_dataset(data_path);
  if (descriptors.empty() || ws.data.empty()) {
    if (!config.env) {
      throw ConfigError(std::string("need --tools and ") + data_flag +
                        ", or an env section in --config");
    }
    auto spec = *config.env;
    auto env = gen_simenv(spec);
    if (descriptors.empty()) descriptors = env.tools;
    if (ws.data.empty()) ws.data = env.dataset;
    alphabet = spec.alphabet;
  }
  for (const auto& d : descriptors) ws.tool_ids.push_back(d.tool_id);
  ws.registry = make_registry(descriptors, environment_from(ws.data, alphabet), config.cost_model,
                              config.fallback_answer);
  return ws;
}

int cmd_amplify(const Common& common, const std::string& tools, const std::string& val,
                const std::string& out, std::optional<double> delta, std::optional<int> k,
                std::optional<int> max_layers, std::optional<int> rounds) {
  auto config = resolve(common);
  if (delta) config.search.delta = *delta;
  if (k) config.search.top_k = *k;
  if (max_layers) config.search.max_layers = *max_layers;
  if (rounds) config.search.max_stage2_rounds = *rounds;
  auto ws = open_workspace(config, tools, val, "--val");
  Amplifier amplifier(ws.registry, ws.data, config.search);
  auto result = amplifier.run(ws.tool_ids);
  const auto library = library_to_jsonl(result.library);
  if (!out.empty()) {
    const auto parent = fs::path(out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_file(out, library);
  }
  std::cout << render_amp_table(amp_rows(to_records(result.library)));
  std::cout << "best: " << result.best.name() << "  score " << result.best.score << "  tokens "
            << result.total_ledger.all_tokens() << "\n";
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& name, const std::string& tools,
                 const std::string& test) {
  auto config = resolve(common);
  auto tree = parse_name(name);
  auto ws = open_workspace(config, tools, test, "--test");
  const auto id = build_named_tool(tree, *ws.registry, config.search);
  auto scored = score_tool(*ws.registry, id, ws.data, config.search.fitness_metric,
                           config.search.seed, config.search.threads, config.search.metric_context);
  nlohmann::ordered_json j;
  j["name"] = serialize_name(tree);
  j["metric"] = to_string(config.search.fitness_metric);
  j["test_score"] = scored.report.fitness;
  j["count"] = scored.report.count;
  j["failures"] = scored.report.failures;
  j["reserved"] = scored.report.reserved;
  for (const auto& [metric, value] : scored.report.means) j["means"][std::string(to_string(metric))] = value;
  if (!scored.report.fingerprint_label.empty()) j["fingerprint"] = scored.report.fingerprint_label;
  j["tokens"] = scored.ledger.all_tokens();
  j["sim_time_ms"] = scored.ledger.sim_time_ms;
  std::cout << j.dump() << "\n";
  return 0;
}

SimEnvSpec default_mas_env(std::uint64_t seed) {
  SimEnvSpec spec;
  spec.n_instances = 50;
  spec.seed = seed;
  spec.tools = {{"Name2SMILES", 0.6, Perturber::kSubstitute},
                {"ChemDFM", 0.6, Perturber::kSubstitute},
                {"Retriever", 0.6, Perturber::kSubstitute},
                {"Designer", 0.6, Perturber::kSubstitute}};
  return spec;
}

int cmd_mas(const Common& common, std::optional<std::string> kind, std::optional<int> num,
            std::optional<int> rounds, bool with_tools, const std::string& tools,
            const std::string& data, const std::string& out) {
  auto config = resolve(common);
  if (kind) config.mas_kind = parse_topology_kind(*kind);
  if (num) config.mas_num = *num;
  if (rounds) config.mas_rounds = *rounds;
  if (with_tools) config.mas_with_tools = true;
  if (!config.env && (tools.empty() || data.empty())) config.env = default_mas_env(config.search.seed);
  auto ws = open_workspace(config, tools, data, "--data");
  NetworkOptions options;
  options.native_p = config.mas_native_p;
  if (config.mas_with_tools) options.toolset = ws.tool_ids;
  auto policy = config.search.policy;
  policy.task = ws.data.front().task_kind;
  const auto spec = build_topology(config.mas_kind, config.mas_num, config.mas_rounds, config.search.seed);
  auto row = evaluate_network(spec, ws.data, policy, *ws.registry, options,
                              config.search.fitness_metric, config.search.seed);
  const auto jsonl = mas_rows_to_jsonl({row});
  if (!out.empty()) write_file(out, jsonl);
  std::cout << jsonl;
  return 0;
}

int cmd_parse_name(const std::string& text) {
  auto tree = parse_name(text);
  nlohmann::ordered_json j;
  j["name"] = serialize_name(tree);
  j["leaves"] = nlohmann::ordered_json::array();
  for (const auto& leaf : leaves(tree)) j["leaves"].push_back(leaf.name());
  j["depth"] = depth(tree);
  j["layer"] = layer_depth(tree);
  j["composites"] = internal_node_count(tree);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_gen_env(const std::string& spec_path, std::optional<std::uint64_t> seed,
                const std::string& out_dir) {
  auto spec = parse_sim_env_spec(read_file(spec_path));
  if (seed) spec.seed = *seed;
  auto env = gen_simenv(spec);
  fs::create_directories(out_dir);
  save_dataset(env.dataset, (fs::path(out_dir) / "dataset.jsonl").string());
  write_file((fs::path(out_dir) / "tools.json").string(), tool_descriptors_to_json(env.tools));
  std::cout << "wrote " << env.dataset.size() << " instances and " << env.tools.size()
            << " tools to " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw ConfigError("'" + run_dir + "' is not a directory");
  std::string text;
  std::string machine;
  bool found = false;
  if (fs::exists(dir / "library.jsonl")) {
    found = true;
    auto rows = amp_rows(parse_library_jsonl(read_file((dir / "library.jsonl").string())));
    text += render_amp_table(rows);
    machine += amp_rows_to_jsonl(rows);
  }
  if (fs::exists(dir / "mas.jsonl")) {
    found = true;
    auto rows = parse_mas_rows(read_file((dir / "mas.jsonl").string()));
    if (!text.empty()) text += "\n";
    text += render_mas_table(rows);
    machine += mas_rows_to_jsonl(rows);
  }
  if (!found) throw DataError("no library.jsonl or mas.jsonl in '" + run_dir + "'");
  write_file((dir / "report.txt").string(), text);
  write_file((dir / "report.jsonl").string(), machine);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical tool amplification toolkit"};
  app.require_subcommand(1);

  Common amp_common;
  std::string amp_tools, amp_val, amp_out;
  std::optional<double> amp_delta;
  std::optional<int> amp_k, amp_layers, amp_rounds;
  auto* amplify = app.add_subcommand("amplify", "Search for the best composite tool");
  add_common(amplify, amp_common);
  amplify->add_option("--tools", amp_tools, "Tool registry JSON");
  amplify->add_option("--val", amp_val, "Validation JSONL");
  amplify->add_option("--out", amp_out, "Library JSONL to write");
  amplify->add_option("--delta", amp_delta, "Stage-1 significance threshold");
  amplify->add_option("--k", amp_k, "Stage-2 partners per round");
  amplify->add_option("--max-layers", amp_layers, "Stage-1 layer cap");
  amplify->add_option("--max-stage2-rounds", amp_rounds, "Stage-2 round cap");

  Common eval_common;
  std::string eval_name, eval_tools, eval_test;
  auto* evaluate = app.add_subcommand("evaluate", "Score a named composite on a test set");
  add_common(evaluate, eval_common);
  evaluate->add_option("--name", eval_name, "Composite name string")->required();
  evaluate->add_option("--tools", eval_tools, "Tool registry JSON");
  evaluate->add_option("--test", eval_test, "Test JSONL");

  Common mas_common;
  std::optional<std::string> mas_kind;
  std::optional<int> mas_num, mas_rounds;
  bool mas_tools_flag = false;
  std::string mas_tools, mas_data, mas_out;
  auto* mas = app.add_subcommand("mas", "Run a multi-agent baseline topology");
  add_common(mas, mas_common);
  mas->add_option("--kind", mas_kind, "chain|random|full_connected|layered|star|debate");
  mas->add_option("--num", mas_num, "Number of agents (NUM)");
  mas->add_option("--rounds", mas_rounds, "Communication rounds (0 = kind default)");
  mas->add_flag("--with-tools", mas_tools_flag, "Agents drive the tools with ReAct");
  mas->add_option("--tools", mas_tools, "Tool registry JSON");
  mas->add_option("--data", mas_data, "Dataset JSONL");
  mas->add_option("--out", mas_out, "Report row JSONL to write");

  std::string name_text;
  auto* parse = app.add_subcommand("parse-name", "Parse and canonicalize a composite name");
  parse->add_option("name", name_text, "Name string")->required();

  std::string spec_path, env_out = ".";
  std::optional<std::uint64_t> env_seed;
  auto* gen = app.add_subcommand("gen-env", "Generate a simulated environment");
  gen->add_option("--spec", spec_path, "Environment spec JSON")->required();
  gen->add_option("--seed", env_seed, "Override the environment seed");
  gen->add_option("--out", env_out, "Output directory");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "Render the reports of a run directory");
  report->add_option("run-dir", run_dir, "Directory holding library.jsonl / mas.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*amplify) {
      return cmd_amplify(amp_common, amp_tools, amp_val, amp_out, amp_delta, amp_k, amp_layers,
                         amp_rounds);
    }
    if (*evaluate) return cmd_evaluate(eval_common, eval_name, eval_tools, eval_test);
    if (*mas) {
      return cmd_mas(mas_common, mas_kind, mas_num, mas_rounds, mas_tools_flag, mas_tools,
                     mas_data, mas_out);
    }
    if (*parse) return cmd_parse_name(name_text);
    if (*gen) return cmd_gen_env(spec_path, env_seed, env_out);
    if (*report) return cmd_report(run_dir);
  } catch (const chemamp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfig);
  }
  return 0;
}
