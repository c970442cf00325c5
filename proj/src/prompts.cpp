// SPDX-License-Identifier: Apache-2.0
#include "chemamp/prompts.hpp"

#include <cctype>

#include "chemamp/error.hpp"

namespace chemamp::prompts {
namespace {

bool identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

std::string render(std::string_view text, const Variables& variables) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && identifier_char(text[j])) ++j;
      const bool leading_digit = j > i + 1 && text[i + 1] >= '0' && text[i + 1] <= '9';
      if (j > i + 1 && !leading_digit && j < text.size() && text[j] == '}') {
        auto name = text.substr(i + 1, j - i - 1);
        auto it = variables.find(name);
        if (it == variables.end()) {
          throw TemplateError("unbound placeholder {" + std::string(name) + "}");
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string render_prompt(std::string_view template_id, const Variables& variables) {
  const auto& templates = builtin_templates();
  auto it = templates.find(template_id);
  if (it == templates.end()) throw TemplateError("unknown template '" + std::string(template_id) + "'");
  return render(it->second, variables);
}

std::string_view task_template_id(TaskKind task) {
  switch (task) {
    case TaskKind::kMoleculeDesign:
      return "molecule_design";
    case TaskKind::kCaptioning:
      return "captioning";
    case TaskKind::kReactionPrediction:
      return "reaction_prediction";
    case TaskKind::kPropertyPrediction:
      return "property_prediction";
  }
  throw ConfigError("unknown task kind");
}

}  // namespace chemamp::prompts
