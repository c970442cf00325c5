// SPDX-License-Identifier: Apache-2.0
#include "chemamp/toolkit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"

namespace chemamp {

CostLedger& CostLedger::operator+=(const CostLedger& other) noexcept {
  prompt_tokens += other.prompt_tokens;
  completion_tokens += other.completion_tokens;
  tool_tokens += other.tool_tokens;
  calls += other.calls;
  sim_time_ms += other.sim_time_ms;
  return *this;
}

std::int64_t estimate_tokens(std::string_view text) {
  std::int64_t code_points = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0U) != 0x80U) ++code_points;
  }
  return (code_points + 3) / 4;
}

void CostModel::charge_planner_turn(CostLedger& ledger, std::int64_t prompt_tokens,
                                    std::int64_t completion_tokens) const {
  ledger.prompt_tokens += prompt_tokens;
  ledger.completion_tokens += completion_tokens;
  ledger.sim_time_ms += planner_turn_ms + per_token_ms * (prompt_tokens + completion_tokens);
}

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::kTable:
      return "table";
    case Backend::kNoisyOracle:
      return "noisy_oracle";
    case Backend::kExternalCommand:
      return "external_command";
    case Backend::kHttp:
      return "http";
    case Backend::kComposite:
      return "composite";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  for (auto b : {Backend::kTable, Backend::kNoisyOracle, Backend::kExternalCommand, Backend::kHttp,
                 Backend::kComposite}) {
    if (to_string(b) == name) return b;
  }
  throw ConfigError("unknown tool backend '" + std::string(name) + "'");
}

bool is_suffixed_name(std::string_view name) {
  auto underscore = name.rfind('_');
  if (underscore == std::string_view::npos || underscore == 0 || underscore + 1 == name.size()) {
    return false;
  }
  return std::all_of(name.begin() + static_cast<std::ptrdiff_t>(underscore + 1), name.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

void Environment::set_gold(std::string query, std::string gold) {
  gold_.insert_or_assign(std::move(query), std::move(gold));
}

std::optional<std::string_view> Environment::gold(std::string_view query) const {
  auto it = gold_.find(query);
  if (it == gold_.end()) return std::nullopt;
  return std::string_view(it->second);
}

Perturber parse_perturber(std::string_view name) {
  if (name == "substitute") return Perturber::kSubstitute;
  if (name == "delete") return Perturber::kDelete;
  throw ConfigError("unknown perturber '" + std::string(name) + "'");
}

std::string_view to_string(Perturber perturber) {
  return perturber == Perturber::kSubstitute ? "substitute" : "delete";
}

std::string perturb(std::string_view gold, Perturber perturber, std::string_view alphabet,
                    std::uint64_t seed) {
  if (gold.empty()) return "?";
  const auto position = static_cast<std::size_t>(hash::mix64(seed) % gold.size());
  std::string out(gold);
  if (perturber == Perturber::kDelete) {
    out.erase(position, 1);
    return out;
  }
  const auto lower = [](char c) { return std::tolower(static_cast<unsigned char>(c)); };
  const char original = gold[position];
  std::string choices;
  for (char c : alphabet) {
    if (lower(c) != lower(original) && choices.find(c) == std::string::npos) choices.push_back(c);
  }
  if (choices.empty()) {
    for (char c : std::string_view("#*?")) {
      if (c != original) choices.push_back(c);
    }
  }
  out[position] = choices[hash::mix64(seed ^ 0x5bd1e995ULL) % choices.size()];
  return out;
}

// ---------------------------------------------------------------------------
// ToolRegistry
// ---------------------------------------------------------------------------

ToolRegistry::ToolRegistry() = default;

ToolRegistry::ToolRegistry(std::shared_ptr<const ToolRegistry> parent)
    : parent_(std::move(parent)) {
  if (parent_) {
    next_public_ = parent_->next_public_;
    next_composite_ = parent_->next_composite_;
  }
}

const ToolRegistry::Entry* ToolRegistry::find(std::string_view tool_id) const {
  for (const ToolRegistry* r = this; r != nullptr; r = r->parent_.get()) {
    auto it = r->entries_.find(tool_id);
    if (it != r->entries_.end()) return &it->second;
  }
  return nullptr;
}

bool ToolRegistry::public_name_taken(std::string_view name) const {
  for (const ToolRegistry* r = this; r != nullptr; r = r->parent_.get()) {
    for (const auto& [id, entry] : r->entries_) {
      if (entry.descriptor.public_name == name) return true;
    }
  }
  return false;
}

const std::string& ToolRegistry::register_tool(ToolDescriptor descriptor) {
  if (descriptor.backend == Backend::kComposite) {
    throw RegistrationError("composite tool '" + descriptor.tool_id +
                            "' needs an explicit invocable");
  }
  auto invocable = make_backend(descriptor);
  return register_tool(std::move(descriptor), std::move(invocable));
}

const std::string& ToolRegistry::register_tool(ToolDescriptor descriptor, Invocable invocable) {
  if (descriptor.tool_id.empty()) throw RegistrationError("tool id must not be empty");
  if (find(descriptor.tool_id) != nullptr) {
    throw RegistrationError("duplicate tool id '" + descriptor.tool_id + "'");
  }
  if (!invocable) throw RegistrationError("tool '" + descriptor.tool_id + "' has no invocable");
  const bool composite = descriptor.backend == Backend::kComposite;
  if (composite != (descriptor.depth > 0) || descriptor.depth < 0) {
    throw RegistrationError("tool '" + descriptor.tool_id +
                            "': depth must be 0 exactly for non-composite backends");
  }
  if (descriptor.public_name.empty()) {
    descriptor.public_name = allocate_public_name("tool");
  } else if (!is_suffixed_name(descriptor.public_name)) {
    throw RegistrationError("public name '" + descriptor.public_name +
                            "' does not match name_<integer>");
  }
  auto id = descriptor.tool_id;
  auto [it, inserted] = entries_.emplace(id, Entry{std::move(descriptor), std::move(invocable)});
  order_.push_back(id);
  return it->first;
}

bool ToolRegistry::contains(std::string_view tool_id) const { return find(tool_id) != nullptr; }

const ToolDescriptor& ToolRegistry::descriptor(std::string_view tool_id) const {
  const auto* entry = find(tool_id);
  if (entry == nullptr) throw LookupError("unknown tool '" + std::string(tool_id) + "'");
  return entry->descriptor;
}

std::vector<std::string> ToolRegistry::tool_ids() const {
  std::vector<std::string> ids = order_;
  if (parent_) {
    auto inherited = parent_->tool_ids();
    ids.insert(ids.end(), inherited.begin(), inherited.end());
  }
  return ids;
}

std::size_t ToolRegistry::size() const {
  return entries_.size() + (parent_ ? parent_->size() : 0);
}

std::string ToolRegistry::invoke(std::string_view tool_id, std::string_view query,
                                 CostLedger& ledger, std::uint64_t seed) const {
  const auto* entry = find(tool_id);
  if (entry == nullptr) throw LookupError("unknown tool '" + std::string(tool_id) + "'");
  const auto& model = cost_model();
  ledger.calls += 1;
  ToolAnswer result;
  try {
    result = entry->invocable(*this, query, ledger, seed);
  } catch (...) {
    const auto tokens = estimate_tokens(query);
    ledger.tool_tokens += tokens;
    ledger.sim_time_ms += model.tool_call_ms + model.per_token_ms * tokens;
    throw;
  }
  const auto tokens = result.tokens.value_or(estimate_tokens(query) + estimate_tokens(result.answer));
  ledger.tool_tokens += tokens;
  ledger.sim_time_ms += model.tool_call_ms + model.per_token_ms * tokens;
  return std::move(result.answer);
}

std::string ToolRegistry::allocate_public_name(std::string_view prefix) {
  for (;;) {
    auto name = std::string(prefix) + "_" + std::to_string(next_public_++);
    if (!public_name_taken(name)) return name;
  }
}

std::string ToolRegistry::allocate_composite_id() {
  for (;;) {
    auto id = "agent_" + std::to_string(next_composite_++);
    if (find(id) == nullptr) return id;
  }
}

void ToolRegistry::set_environment(std::shared_ptr<const Environment> environment) {
  environment_ = std::move(environment);
}

const Environment& ToolRegistry::environment() const {
  for (const ToolRegistry* r = this; r != nullptr; r = r->parent_.get()) {
    if (r->environment_) return *r->environment_;
  }
  static const Environment empty;
  return empty;
}

const CostModel& ToolRegistry::cost_model() const {
  for (const ToolRegistry* r = this; r != nullptr; r = r->parent_.get()) {
    if (r->cost_model_) return *r->cost_model_;
  }
  static const CostModel defaults;
  return defaults;
}

const std::string& ToolRegistry::fallback_answer() const {
  for (const ToolRegistry* r = this; r != nullptr; r = r->parent_.get()) {
    if (r->fallback_answer_) return *r->fallback_answer_;
  }
  static const std::string unknown = "UNKNOWN";
  return unknown;
}

const std::string& register_tool(ToolRegistry& registry, ToolDescriptor descriptor) {
  return registry.register_tool(std::move(descriptor));
}

std::string invoke(const ToolRegistry& registry, std::string_view tool_id, std::string_view query,
                   CostLedger& ledger, std::uint64_t seed) {
  return registry.invoke(tool_id, query, ledger, seed);
}

// ---------------------------------------------------------------------------
// Descriptor files
// ---------------------------------------------------------------------------

namespace {

ToolDescriptor descriptor_from_json(const nlohmann::json& j) {
  ToolDescriptor d;
  if (!j.is_object() || !j.contains("tool_id") || !j.at("tool_id").is_string()) {
    throw ConfigError("tool descriptor needs a string 'tool_id'");
  }
  d.tool_id = j.at("tool_id").get<std::string>();
  d.public_name = j.value("public_name", "");
  d.description = j.value("description", "");
  d.backend = parse_backend(j.value("backend", "table"));
  d.depth = j.value("depth", 0);
  if (j.contains("backend_params")) {
    for (const auto& [key, value] : j.at("backend_params").items()) {
      d.backend_params[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return d;
}

}  // namespace

std::vector<ToolDescriptor> load_tool_descriptors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tool registry file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("tool registry file '" + path + "': " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("tool registry file must hold a JSON list");
  std::vector<ToolDescriptor> out;
  for (const auto& item : doc) out.push_back(descriptor_from_json(item));
  return out;
}

std::string tool_descriptors_to_json(const std::vector<ToolDescriptor>& descriptors) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& d : descriptors) {
    nlohmann::ordered_json j;
    j["tool_id"] = d.tool_id;
    j["public_name"] = d.public_name;
    j["description"] = d.description;
    j["backend"] = to_string(d.backend);
    j["backend_params"] = d.backend_params;
    j["depth"] = d.depth;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

}  // namespace chemamp
