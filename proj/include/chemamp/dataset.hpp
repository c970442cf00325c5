// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "chemamp/metrics.hpp"

namespace chemamp {

struct ValidationInstance {
  std::string id;
  std::string input;
  std::string gold;
  TaskKind task_kind = TaskKind::kMoleculeDesign;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const ValidationInstance&, const ValidationInstance&) = default;
};

using Dataset = std::vector<ValidationInstance>;

/// JSON Lines, one instance per line. Errors name the offending line.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text, const std::string& source = "<memory>");
std::string dataset_to_jsonl(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

}  // namespace chemamp
