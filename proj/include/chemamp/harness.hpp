// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chemamp/amplifier.hpp"
#include "chemamp/dataset.hpp"
#include "chemamp/toolkit.hpp"
#include "chemamp/topology.hpp"

namespace chemamp {

struct SimToolSpec {
  std::string name;
  double p_correct = 1.0;
  Perturber perturber = Perturber::kSubstitute;
};

/// Desk-scale stand-in for a task environment: random gold strings and one
/// noisy oracle per tool.
struct SimEnvSpec {
  int n_instances = 100;
  std::string alphabet = "CNOcno=#()123";
  int answer_length = 12;
  TaskKind task_kind = TaskKind::kMoleculeDesign;
  std::vector<SimToolSpec> tools;
  double q = 0.9;
  double m = 0.0;
  double r = 0.0;
  double m_decay = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Reads the JSON form of SimEnvSpec (same field names; tools as a list of
/// {name, p_correct, perturber}).
SimEnvSpec parse_sim_env_spec(const std::string& json_text);
std::string sim_env_spec_to_json(const SimEnvSpec& spec);

struct SimEnv {
  Dataset dataset;
  std::vector<ToolDescriptor> tools;
};

SimEnv gen_simenv(const SimEnvSpec& spec);

/// Gold answers of `dataset` keyed by input, for oracle-backed simulation.
std::shared_ptr<Environment> environment_from(const Dataset& dataset, std::string alphabet);

/// Root registry holding `descriptors`, bound to `environment`.
std::shared_ptr<ToolRegistry> make_registry(const std::vector<ToolDescriptor>& descriptors,
                                            std::shared_ptr<const Environment> environment,
                                            const CostModel& cost_model = {},
                                            std::optional<std::string> fallback = std::nullopt);

/// The single JSON run configuration with sections search, metrics, tools,
/// mas and env. Missing keys keep their defaults.
struct RunConfig {
  SearchConfig search;
  CostModel cost_model;
  std::optional<std::string> fallback_answer;
  std::optional<std::string> fingerprint_command;
  std::optional<std::string> validity_command;
  TopologyKind mas_kind = TopologyKind::kChain;
  int mas_num = 4;
  int mas_rounds = 0;
  bool mas_with_tools = false;
  double mas_native_p = 0.5;
  std::optional<SimEnvSpec> env;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Applies the metric plug-ins named in the config to config.search.
void apply_metric_plugins(RunConfig& config);

/// One amplification report row.
struct AmpRow {
  std::string name;
  double validation_score = 0.0;
  std::optional<double> test_score;
  int depth = 0;
  std::string stage;
  std::int64_t tokens = 0;
  std::int64_t time_ms = 0;
  friend bool operator==(const AmpRow&, const AmpRow&) = default;
};

std::vector<AmpRow> amp_rows(const std::vector<LibraryRecord>& records);

std::string amp_rows_to_jsonl(const std::vector<AmpRow>& rows);
std::vector<AmpRow> parse_amp_rows(const std::string& text);
std::string render_amp_table(const std::vector<AmpRow>& rows);

std::string mas_rows_to_jsonl(const std::vector<MasRow>& rows);
std::vector<MasRow> parse_mas_rows(const std::string& text);
std::string render_mas_table(const std::vector<MasRow>& rows);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace chemamp
