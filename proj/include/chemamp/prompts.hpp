// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>

#include "chemamp/metrics.hpp"

namespace chemamp::prompts {

using Variables = std::map<std::string, std::string, std::less<>>;

/// Templates shipped under assets/prompts, keyed by file stem.
const std::map<std::string, std::string, std::less<>>& builtin_templates();

/// Substitutes every `{identifier}` placeholder in `text`. Braces that do not
/// enclose an identifier are copied through. Throws TemplateError naming the
/// first unbound placeholder.
std::string render(std::string_view text, const Variables& variables);

/// Renders a built-in template; an unknown id is a TemplateError.
std::string render_prompt(std::string_view template_id, const Variables& variables);

/// Template id of the task instruction prompt for `task`.
std::string_view task_template_id(TaskKind task);

}  // namespace chemamp::prompts
