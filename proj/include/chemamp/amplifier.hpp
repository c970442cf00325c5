// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "chemamp/agent.hpp"
#include "chemamp/composition.hpp"
#include "chemamp/dataset.hpp"
#include "chemamp/metrics.hpp"
#include "chemamp/toolkit.hpp"

namespace chemamp {

enum class Stage { kAtomic, kStage1, kStage2 };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct SearchConfig {
  double delta = 0.01;
  int top_k = 3;
  int max_layers = 8;
  int max_stage2_rounds = 5;
  MetricId fitness_metric = MetricId::kBleu2;
  std::uint64_t seed = 0;
  /// Planner for every composite; its m applies to layer 1 and shrinks by
  /// m_decay per further layer.
  PlannerPolicy policy;
  double m_decay = 1.0;
  /// Prefix of the anonymized public names given to composites.
  std::string public_prefix = "Agent";
  /// Worker threads for per-instance scoring; 0 picks the hardware count.
  unsigned threads = 0;
  /// Fingerprint and validity plug-ins used when scoring.
  metrics::MetricContext metric_context = metrics::MetricContext::defaults();

  /// Throws ConfigError on out-of-range values or a lower-is-better fitness.
  void validate() const;
  PolicyFactory policy_factory() const;
};

struct LibraryEntry {
  CompositionTree tree;
  double score = 0.0;
  MetricId metric = MetricId::kBleu2;
  Stage stage = Stage::kAtomic;
  /// Cost of validating this entry.
  CostLedger ledger;
  int created_step = 0;
  metrics::ScoreReport report;

  std::string name() const { return serialize_name(tree); }
  int depth() const { return layer_depth(tree); }
};

/// Strict ranking used everywhere a "best" is chosen: higher score, then
/// shallower, then the smaller name.
bool ranks_before(const LibraryEntry& a, const LibraryEntry& b);

struct CandidateScore {
  metrics::ScoreReport report;
  CostLedger ledger;
};

/// Runs `tool_id` on every instance with seed derive(seed, instance id) and
/// aggregates. Tool failures and reserved answers score as zero and are
/// counted. The result does not depend on `threads`.
CandidateScore score_tool(const ToolRegistry& registry, const std::string& tool_id,
                          const Dataset& validation, MetricId fitness_metric, std::uint64_t seed,
                          unsigned threads = 1,
                          const metrics::MetricContext& context = metrics::MetricContext::defaults());

/// Instantiates `tree` in an overlay of `registry` and scores it.
CandidateScore score_candidate(const CompositionTree& tree,
                               std::shared_ptr<const ToolRegistry> registry,
                               const Dataset& validation, const SearchConfig& config);

/// Replaces the validation run; receives the tree and the id it was
/// instantiated under.
using CandidateScorer = std::function<CandidateScore(
    const CompositionTree& tree, const ToolRegistry& registry, const std::string& tool_id)>;

struct AmplificationResult {
  LibraryEntry best;
  std::vector<LibraryEntry> library;
  CostLedger total_ledger;
};

class Amplifier {
 public:
  /// Stage 1 registers each layer variant "{base}_{i}" in `registry`.
  Amplifier(std::shared_ptr<ToolRegistry> registry, Dataset validation, SearchConfig config,
            CandidateScorer scorer = {});

  /// The atomic entry followed by every stacked layer that was validated.
  std::vector<LibraryEntry> stage1(const std::string& tool_id);
  /// Cross-composite rounds over `library`, which receives every validated
  /// candidate. Returns the best entry of the final library.
  LibraryEntry stage2(std::vector<LibraryEntry>& library);
  AmplificationResult run(const std::vector<std::string>& tool_ids);

  const CostLedger& total_ledger() const noexcept { return total_; }

 private:
  LibraryEntry validate_entry(const CompositionTree& tree, const ToolRegistry& registry,
                              const std::string& tool_id, Stage stage);

  std::shared_ptr<ToolRegistry> registry_;
  Dataset validation_;
  SearchConfig config_;
  CandidateScorer scorer_;
  CostLedger total_;
  int step_ = 0;
};

/// Library persistence: one JSON object per line with name, score, metric,
/// stage, depth, tokens, sim_time_ms and created_step.
std::string library_to_jsonl(const std::vector<LibraryEntry>& library);

struct LibraryRecord {
  std::string name;
  double score = 0.0;
  std::string metric;
  std::string stage;
  int depth = 0;
  std::int64_t tokens = 0;
  std::int64_t sim_time_ms = 0;
  int created_step = 0;

  friend bool operator==(const LibraryRecord&, const LibraryRecord&) = default;
};

std::vector<LibraryRecord> parse_library_jsonl(const std::string& text);
std::vector<LibraryRecord> to_records(const std::vector<LibraryEntry>& library);

/// Reconstructs the tool a library name refers to. Leaves with a nonzero
/// suffix are rebuilt as their stage-1 chain from the atomic tool. Returns the
/// root tool id.
std::string build_named_tool(const CompositionTree& tree, ToolRegistry& registry,
                             const SearchConfig& config);

}  // namespace chemamp
