// SPDX-License-Identifier: Apache-2.0
#include "chemamp/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chemamp/error.hpp"

namespace chemamp {
namespace {

std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  if (!j.at(key).is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& source) {
  Dataset out;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw DataError("expected a JSON object");
      ValidationInstance inst;
      inst.id = required_string(j, "id");
      inst.input = required_string(j, "input");
      inst.gold = required_string(j, "gold");
      if (inst.gold.empty()) throw DataError("gold must not be empty");
      try {
        inst.task_kind = parse_task_kind(required_string(j, "task_kind"));
      } catch (const ConfigError& e) {
        throw DataError(e.what());
      }
      if (j.contains("metadata") && !j.at("metadata").is_null()) {
        if (!j.at("metadata").is_object()) throw DataError("metadata must be an object");
        for (const auto& [key, value] : j.at("metadata").items()) {
          inst.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
      }
      if (!ids.insert(inst.id).second) throw DataError("duplicate id '" + inst.id + "'");
      out.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  if (out.empty()) throw DataError(source + ": dataset is empty");
  return out;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), path);
}

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& inst : dataset) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["input"] = inst.input;
    j["gold"] = inst.gold;
    j["task_kind"] = to_string(inst.task_kind);
    if (!inst.metadata.empty()) j["metadata"] = inst.metadata;
    out += j.dump() + "\n";
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  out << dataset_to_jsonl(dataset);
}

}  // namespace chemamp
