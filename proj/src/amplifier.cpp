// SPDX-License-Identifier: Apache-2.0
#include "chemamp/amplifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"

namespace chemamp {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kAtomic:
      return "atomic";
    case Stage::kStage1:
      return "stage1";
    case Stage::kStage2:
      return "stage2";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (auto s : {Stage::kAtomic, Stage::kStage1, Stage::kStage2}) {
    if (to_string(s) == name) return s;
  }
  throw DataError("unknown stage '" + std::string(name) + "'");
}

void SearchConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be finite and >= 0");
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (max_layers < 1) throw ConfigError("max_layers must be at least 1");
  if (max_stage2_rounds < 1) throw ConfigError("max_stage2_rounds must be at least 1");
  if (!higher_is_better(fitness_metric)) {
    throw ConfigError("fitness metric '" + std::string(to_string(fitness_metric)) +
                      "' is lower-is-better and cannot drive the search");
  }
  if (!(m_decay >= 0.0 && m_decay <= 1.0)) throw ConfigError("m_decay must lie in [0,1]");
  if (public_prefix.empty()) throw ConfigError("public_prefix must not be empty");
  policy.validate();
}

PolicyFactory SearchConfig::policy_factory() const {
  return [base = policy, decay = m_decay](int layer) {
    auto p = base;
    p.layer = layer;
    p.m = base.m * std::pow(decay, std::max(layer - 1, 0));
    return p;
  };
}

bool ranks_before(const LibraryEntry& a, const LibraryEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.depth() != b.depth()) return a.depth() < b.depth();
  return a.name() < b.name();
}

CandidateScore score_tool(const ToolRegistry& registry, const std::string& tool_id,
                          const Dataset& validation, MetricId fitness_metric, std::uint64_t seed,
                          unsigned threads, const metrics::MetricContext& context) {
  if (validation.empty()) throw DataError("validation set is empty");
  registry.descriptor(tool_id);  // unknown ids fail before any work starts

  struct Slot {
    metrics::InstanceScores scores;
    CostLedger ledger;
    bool failed = false;
    bool reserved = false;
  };
  std::vector<Slot> slots(validation.size());
  const auto score_one = [&](std::size_t i) {
    const auto& inst = validation[i];
    auto& slot = slots[i];
    try {
      auto answer = registry.invoke(tool_id, inst.input, slot.ledger, hash::derive(seed, inst.id));
      if (answer == kReserveAnswer) {
        slot.reserved = true;
        slot.scores = metrics::zero_scores(inst.task_kind, inst.gold);
      } else {
        slot.scores = metrics::score_instance(inst.task_kind, answer, inst.gold, context);
      }
    } catch (const ToolFailure&) {
      slot.failed = true;
      slot.scores = metrics::zero_scores(inst.task_kind, inst.gold);
    }
  };

  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, validation.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < validation.size(); ++i) score_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < validation.size();) {
          try {
            score_one(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next = validation.size();
          }
        }
      });
    }
    for (auto& worker : pool) worker.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  CandidateScore out;
  std::vector<metrics::InstanceScores> scores;
  scores.reserve(slots.size());
  std::size_t failures = 0;
  std::size_t reserved = 0;
  for (auto& slot : slots) {
    out.ledger += slot.ledger;
    failures += slot.failed ? 1 : 0;
    reserved += slot.reserved ? 1 : 0;
    scores.push_back(std::move(slot.scores));
  }
  out.report = metrics::aggregate(scores, fitness_metric);
  out.report.failures = failures;
  out.report.reserved = reserved;
  if (context.fingerprint && out.report.means.count(MetricId::kTanimoto) != 0) {
    out.report.fingerprint_label = context.fingerprint->label();
  }
  return out;
}

CandidateScore score_candidate(const CompositionTree& tree,
                               std::shared_ptr<const ToolRegistry> registry,
                               const Dataset& validation, const SearchConfig& config) {
  ToolRegistry overlay(std::move(registry));
  const auto id = instantiate(tree, overlay, config.policy_factory(), config.public_prefix);
  return score_tool(overlay, id, validation, config.fitness_metric, config.seed, config.threads,
                    config.metric_context);
}

namespace {

// Splits an atomic tool id into the base name its leaves use.
std::string atomic_base(const std::string& tool_id) {
  if (!is_suffixed_name(tool_id)) return tool_id;
  const auto underscore = tool_id.rfind('_');
  if (tool_id.substr(underscore + 1) != "0") {
    throw ConfigError("atomic tool id '" + tool_id + "' must be unsuffixed or end in _0");
  }
  return tool_id.substr(0, underscore);
}

// Registers the stage-1 variant "{base}_{layer}" (and any missing lower
// layers). Layer 1 wraps the atomic tool alone, later layers wrap the atomic
// tool together with the previous layer.
std::string ensure_variant(ToolRegistry& registry, const std::string& base, int layer,
                           const SearchConfig& config) {
  const Leaf leaf{base, layer};
  if (layer == 0 || registry.contains(leaf.name())) return resolve_leaf(registry, leaf);
  std::vector<CompositionTree> children{CompositionTree::leaf(base, 0)};
  if (layer > 1) {
    ensure_variant(registry, base, layer - 1, config);
    children.push_back(CompositionTree::leaf(base, layer - 1));
  }
  return instantiate(encapsulate(std::move(children)), registry, config.policy_factory(),
                     config.public_prefix, leaf.name());
}

}  // namespace

std::string build_named_tool(const CompositionTree& tree, ToolRegistry& registry,
                             const SearchConfig& config) {
  for (const auto& leaf : leaves(tree)) ensure_variant(registry, leaf.base, leaf.suffix, config);
  auto unwrapped = unwrap_single_leaf(tree);
  if (unwrapped.is_leaf()) return resolve_leaf(registry, unwrapped.as_leaf());
  return instantiate(unwrapped, registry, config.policy_factory(), config.public_prefix);
}

Amplifier::Amplifier(std::shared_ptr<ToolRegistry> registry, Dataset validation,
                     SearchConfig config, CandidateScorer scorer)
    : registry_(std::move(registry)), validation_(std::move(validation)),
      config_(std::move(config)), scorer_(std::move(scorer)) {
  if (!registry_) throw ConfigError("amplifier needs a registry");
  config_.validate();
  if (!scorer_ && validation_.empty()) throw DataError("validation set is empty");
}

LibraryEntry Amplifier::validate_entry(const CompositionTree& tree, const ToolRegistry& registry,
                                       const std::string& tool_id, Stage stage) {
  auto scored = scorer_ ? scorer_(tree, registry, tool_id)
                        : score_tool(registry, tool_id, validation_, config_.fitness_metric,
                                     config_.seed, config_.threads, config_.metric_context);
  LibraryEntry entry{tree, scored.report.fitness, config_.fitness_metric, stage, scored.ledger,
                     step_++, scored.report};
  total_ += scored.ledger;
  return entry;
}

std::vector<LibraryEntry> Amplifier::stage1(const std::string& tool_id) {
  const auto base = atomic_base(tool_id);
  registry_->descriptor(tool_id);
  std::vector<LibraryEntry> entries;
  entries.push_back(
      validate_entry(CompositionTree::leaf(base, 0), *registry_, tool_id, Stage::kAtomic));
  for (int layer = 1; layer <= config_.max_layers; ++layer) {
    const auto id = ensure_variant(*registry_, base, layer, config_);
    entries.push_back(
        validate_entry(CompositionTree::leaf(base, layer), *registry_, id, Stage::kStage1));
    const double gain = entries.back().score - entries[entries.size() - 2].score;
    if (gain < config_.delta) break;
  }
  return entries;
}

LibraryEntry Amplifier::stage2(std::vector<LibraryEntry>& library) {
  if (library.size() < 2) throw ConfigError("stage 2 needs at least two library entries");
  const auto best_of = [](const std::vector<LibraryEntry>& entries) {
    return *std::min_element(entries.begin(), entries.end(), ranks_before);
  };
  std::set<std::string> known;
  for (const auto& e : library) known.insert(e.name());
  double best_score = best_of(library).score;
  const std::shared_ptr<const ToolRegistry> base = registry_;

  for (int round = 0; round < config_.max_stage2_rounds; ++round) {
    auto sorted = library;
    std::stable_sort(sorted.begin(), sorted.end(), ranks_before);
    const auto& top = sorted.front();
    std::vector<CompositionTree> candidates;
    for (std::size_t i = 1; i < sorted.size() && candidates.size() < static_cast<std::size_t>(config_.top_k); ++i) {
      if (sorted[i].name() == top.name()) continue;
      auto tree = encapsulate({top.tree, sorted[i].tree});
      if (known.count(serialize_name(tree)) != 0) continue;
      candidates.push_back(std::move(tree));
    }
    if (candidates.empty()) break;

    std::vector<LibraryEntry> scored;
    for (const auto& tree : candidates) {
      ToolRegistry overlay(base);
      const auto id = instantiate(tree, overlay, config_.policy_factory(), config_.public_prefix);
      scored.push_back(validate_entry(tree, overlay, id, Stage::kStage2));
    }
    const auto round_best = best_of(scored);
    for (auto& entry : scored) {
      known.insert(entry.name());
      library.push_back(std::move(entry));
    }
    if (!(round_best.score > best_score)) break;
    best_score = round_best.score;
  }
  return best_of(library);
}

AmplificationResult Amplifier::run(const std::vector<std::string>& tool_ids) {
  if (tool_ids.empty()) throw ConfigError("amplify needs at least one tool");
  AmplificationResult result;
  for (const auto& id : tool_ids) {
    auto entries = stage1(id);
    for (auto& e : entries) result.library.push_back(std::move(e));
  }
  result.best = stage2(result.library);
  result.total_ledger = total_;
  return result;
}

std::string library_to_jsonl(const std::vector<LibraryEntry>& library) {
  std::string out;
  for (const auto& e : library) {
    nlohmann::ordered_json j;
    j["name"] = e.name();
    j["score"] = e.score;
    j["metric"] = to_string(e.metric);
    j["stage"] = to_string(e.stage);
    j["depth"] = e.depth();
    j["tokens"] = e.ledger.all_tokens();
    j["sim_time_ms"] = e.ledger.sim_time_ms;
    j["created_step"] = e.created_step;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<LibraryRecord> to_records(const std::vector<LibraryEntry>& library) {
  std::vector<LibraryRecord> out;
  for (const auto& e : library) {
    out.push_back({e.name(), e.score, std::string(to_string(e.metric)),
                   std::string(to_string(e.stage)), e.depth(), e.ledger.all_tokens(),
                   e.ledger.sim_time_ms, e.created_step});
  }
  return out;
}

std::vector<LibraryRecord> parse_library_jsonl(const std::string& text) {
  std::vector<LibraryRecord> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      LibraryRecord r;
      r.name = j.at("name").get<std::string>();
      parse_name(r.name);
      r.score = j.at("score").get<double>();
      r.metric = j.at("metric").get<std::string>();
      r.stage = j.at("stage").get<std::string>();
      r.depth = j.at("depth").get<int>();
      r.tokens = j.at("tokens").get<std::int64_t>();
      r.sim_time_ms = j.value("sim_time_ms", std::int64_t{0});
      r.created_step = j.at("created_step").get<int>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("library line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw DataError("library line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace chemamp
