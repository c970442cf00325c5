// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include <json.hpp>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"
#include "chemamp/http.hpp"
#include "chemamp/subprocess.hpp"
#include "chemamp/toolkit.hpp"

namespace chemamp {
namespace {

const std::string* find_param(const ToolDescriptor& d, const std::string& key) {
  auto it = d.backend_params.find(key);
  return it == d.backend_params.end() ? nullptr : &it->second;
}

const std::string& require_param(const ToolDescriptor& d, const std::string& key) {
  const auto* value = find_param(d, key);
  if (value == nullptr || value->empty()) {
    throw ConfigError("tool '" + d.tool_id + "' (" + std::string(to_string(d.backend)) +
                      ") needs backend_params." + key);
  }
  return *value;
}

double number_param(const ToolDescriptor& d, const std::string& key, double fallback) {
  const auto* value = find_param(d, key);
  if (value == nullptr) return fallback;
  try {
    std::size_t used = 0;
    double x = std::stod(*value, &used);
    if (used != value->size()) throw std::invalid_argument(*value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("tool '" + d.tool_id + "': backend_params." + key + " is not a number");
  }
}

std::map<std::string, std::string, std::less<>> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table file '" + path + "'");
  std::map<std::string, std::string, std::less<>> table;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      table.insert_or_assign(j.at("input").get<std::string>(), j.at("gold").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

Invocable noisy_oracle(const ToolDescriptor& d) {
  const double p = number_param(d, "p", 1.0);
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("tool '" + d.tool_id + "': p outside [0,1]");
  const auto* perturber_name = find_param(d, "perturber");
  const Perturber perturber =
      perturber_name == nullptr ? Perturber::kSubstitute : parse_perturber(*perturber_name);
  const auto* alphabet_param = find_param(d, "alphabet");
  std::optional<std::string> alphabet;
  if (alphabet_param != nullptr) alphabet = *alphabet_param;
  return [id = d.tool_id, p, perturber, alphabet](const ToolRegistry& registry,
                                                  std::string_view query, CostLedger&,
                                                  std::uint64_t seed) -> ToolAnswer {
    const auto& env = registry.environment();
    auto gold = env.gold(query);
    if (!gold) return {registry.fallback_answer(), std::nullopt};
    const auto key = hash::derive(seed, id, query);
    if (hash::unit_interval(key) < p) return {std::string(*gold), std::nullopt};
    return {perturb(*gold, perturber, alphabet ? *alphabet : env.alphabet(), hash::mix64(key)),
            std::nullopt};
  };
}

Invocable external_command(const ToolDescriptor& d) {
  const auto command = require_param(d, "command");
  const int timeout_ms = static_cast<int>(number_param(d, "timeout_ms", 10000));
  return [command, timeout_ms](const ToolRegistry&, std::string_view query, CostLedger&,
                               std::uint64_t) -> ToolAnswer {
    return {run_line_command(command, query, timeout_ms).answer, std::nullopt};
  };
}

Invocable http_tool(const ToolDescriptor& d) {
  const auto url = require_param(d, "url");
  const auto* path_param = find_param(d, "path");
  const std::string path = path_param == nullptr ? "/invoke" : *path_param;
  const int timeout_ms = static_cast<int>(number_param(d, "timeout_ms", 10000));
  return [url, path, timeout_ms](const ToolRegistry&, std::string_view query, CostLedger&,
                                 std::uint64_t) -> ToolAnswer {
    nlohmann::json request = {{"query", std::string(query)}};
    const auto body = post_json(url, path, request.dump(), timeout_ms);
    ToolAnswer out;
    try {
      auto response = nlohmann::json::parse(body);
      out.answer = response.at("answer").get<std::string>();
      if (response.contains("tokens") && !response.at("tokens").is_null()) {
        const auto tokens = response.at("tokens").get<std::int64_t>();
        if (tokens < 0) throw ProtocolError("negative token count from " + url);
        out.tokens = tokens;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("malformed tool response from " + url + ": " + e.what());
    }
    return out;
  };
}

}  // namespace

Invocable make_table_backend(std::map<std::string, std::string, std::less<>> table,
                             std::optional<std::string> fallback) {
  auto shared = std::make_shared<const std::map<std::string, std::string, std::less<>>>(
      std::move(table));
  return [shared, fallback](const ToolRegistry& registry, std::string_view query, CostLedger&,
                            std::uint64_t) -> ToolAnswer {
    auto it = shared->find(query);
    if (it != shared->end()) return {it->second, std::nullopt};
    return {fallback ? *fallback : registry.fallback_answer(), std::nullopt};
  };
}

Invocable make_backend(const ToolDescriptor& d) {
  switch (d.backend) {
    case Backend::kTable: {
      const auto* fallback = find_param(d, "fallback");
      return make_table_backend(read_table(require_param(d, "table_path")),
                                fallback ? std::optional<std::string>(*fallback) : std::nullopt);
    }
    case Backend::kNoisyOracle:
      return noisy_oracle(d);
    case Backend::kExternalCommand:
      return external_command(d);
    case Backend::kHttp:
      return http_tool(d);
    case Backend::kComposite:
      break;
  }
  throw ConfigError("tool '" + d.tool_id + "': composite tools are built by instantiation");
}

}  // namespace chemamp
