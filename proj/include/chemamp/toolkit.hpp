// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chemamp {

/// Token and simulated-latency totals for one run. Merging is a fieldwise sum.
struct CostLedger {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t tool_tokens = 0;
  std::int64_t calls = 0;
  std::int64_t sim_time_ms = 0;

  std::int64_t all_tokens() const noexcept { return prompt_tokens + completion_tokens + tool_tokens; }

  CostLedger& operator+=(const CostLedger& other) noexcept;
  friend CostLedger operator+(CostLedger a, const CostLedger& b) noexcept { return a += b; }
  friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

/// ceil(code points / 4); 0 for empty text.
std::int64_t estimate_tokens(std::string_view text);

/// Declared latency model: a fixed cost per call plus a per-token increment.
struct CostModel {
  std::int64_t tool_call_ms = 200;
  std::int64_t planner_turn_ms = 500;
  std::int64_t per_token_ms = 1;

  /// Charges one planner turn (prompt + emitted text) to `ledger`.
  void charge_planner_turn(CostLedger& ledger, std::int64_t prompt_tokens,
                           std::int64_t completion_tokens) const;
};

enum class Backend { kTable, kNoisyOracle, kExternalCommand, kHttp, kComposite };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);

struct ToolDescriptor {
  std::string tool_id;
  /// Anonymized "{task}_{num}" name shown to planners; assigned at
  /// registration when empty.
  std::string public_name;
  std::string description;
  Backend backend = Backend::kTable;
  std::map<std::string, std::string> backend_params;
  /// 0 for atomic tools, stacking depth for composites.
  int depth = 0;
};

/// True when `name` is `<prefix>_<non-negative integer>` with a nonempty prefix.
bool is_suffixed_name(std::string_view name);

/// Gold answers of the task environment. Simulated tools and the simulated
/// judge consult it; real backends ignore it.
class Environment {
 public:
  Environment() = default;
  explicit Environment(std::string alphabet) : alphabet_(std::move(alphabet)) {}

  void set_gold(std::string query, std::string gold);
  std::optional<std::string_view> gold(std::string_view query) const;
  const std::string& alphabet() const noexcept { return alphabet_; }
  std::size_t size() const noexcept { return gold_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::unordered_map<std::string, std::string, Hash, std::equal_to<>> gold_;
  std::string alphabet_;
};

enum class Perturber { kSubstitute, kDelete };

Perturber parse_perturber(std::string_view name);
std::string_view to_string(Perturber perturber);

/// Returns a string guaranteed to differ from `gold`. kSubstitute replaces one
/// character with one from `alphabet` that differs case-insensitively.
std::string perturb(std::string_view gold, Perturber perturber, std::string_view alphabet,
                    std::uint64_t seed);

class ToolRegistry;

/// What a backend returns; `tokens` overrides the estimated tool tokens when
/// the backend reports its own usage.
struct ToolAnswer {
  std::string answer;
  std::optional<std::int64_t> tokens;
};

/// `registry` is the registry the call was made through, so composites
/// resolve their children in the caller's scope.
using Invocable = std::function<ToolAnswer(const ToolRegistry& registry, std::string_view query,
                                           CostLedger& ledger, std::uint64_t seed)>;

/// Append-only map of tools. An overlay registry sees every tool of its
/// parent and adds its own; the parent must not be mutated while an overlay
/// is in use.
class ToolRegistry {
 public:
  ToolRegistry();
  explicit ToolRegistry(std::shared_ptr<const ToolRegistry> parent);

  /// Registers a tool built from its descriptor's backend (not composite).
  const std::string& register_tool(ToolDescriptor descriptor);
  const std::string& register_tool(ToolDescriptor descriptor, Invocable invocable);

  bool contains(std::string_view tool_id) const;
  const ToolDescriptor& descriptor(std::string_view tool_id) const;
  /// Own tools first in registration order, then the parent's.
  std::vector<std::string> tool_ids() const;
  std::size_t size() const;

  /// Invokes a tool and charges one call plus the query and answer tokens.
  std::string invoke(std::string_view tool_id, std::string_view query, CostLedger& ledger,
                     std::uint64_t seed) const;

  /// Next unused "{prefix}_{num}" public name.
  std::string allocate_public_name(std::string_view prefix);
  /// Next unused "agent_{num}" tool id.
  std::string allocate_composite_id();

  void set_environment(std::shared_ptr<const Environment> environment);
  const Environment& environment() const;
  void set_cost_model(const CostModel& model) { cost_model_ = model; }
  const CostModel& cost_model() const;
  void set_fallback_answer(std::string answer) { fallback_answer_ = std::move(answer); }
  const std::string& fallback_answer() const;

 private:
  struct Entry {
    ToolDescriptor descriptor;
    Invocable invocable;
  };
  const Entry* find(std::string_view tool_id) const;
  bool public_name_taken(std::string_view name) const;

  std::shared_ptr<const ToolRegistry> parent_;
  std::map<std::string, Entry, std::less<>> entries_;
  std::vector<std::string> order_;
  std::shared_ptr<const Environment> environment_;
  std::optional<CostModel> cost_model_;
  std::optional<std::string> fallback_answer_;
  std::size_t next_public_ = 0;
  std::size_t next_composite_ = 0;
};

const std::string& register_tool(ToolRegistry& registry, ToolDescriptor descriptor);

std::string invoke(const ToolRegistry& registry, std::string_view tool_id, std::string_view query,
                   CostLedger& ledger, std::uint64_t seed);

/// Builds the invocable for a table, noisy_oracle, external_command or http
/// descriptor. Recognized backend_params:
///   table:            table_path (JSONL with input/gold), fallback
///   noisy_oracle:     p, perturber (substitute|delete), alphabet
///   external_command: command, timeout_ms
///   http:             url, path (default /invoke), timeout_ms
Invocable make_backend(const ToolDescriptor& descriptor);

/// Table backend over an in-memory map.
Invocable make_table_backend(std::map<std::string, std::string, std::less<>> table,
                             std::optional<std::string> fallback = std::nullopt);

/// Reads a JSON list of ToolDescriptor objects.
std::vector<ToolDescriptor> load_tool_descriptors(const std::string& path);
std::string tool_descriptors_to_json(const std::vector<ToolDescriptor>& descriptors);

}  // namespace chemamp
