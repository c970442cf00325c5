// SPDX-License-Identifier: Apache-2.0
#include "chemamp/composition.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

#include "chemamp/error.hpp"

namespace chemamp {

CompositionTree CompositionTree::leaf(std::string base, int suffix) {
  if (base.empty()) throw ConfigError("leaf base name must not be empty");
  if (suffix < 0) throw ConfigError("leaf suffix must be non-negative");
  return CompositionTree(Leaf{std::move(base), suffix});
}

CompositionTree CompositionTree::node(std::vector<CompositionTree> children) {
  if (children.empty()) throw ConfigError("a composite needs at least one child");
  return CompositionTree(std::move(children));
}

const Leaf& CompositionTree::as_leaf() const {
  if (!is_leaf()) throw ConfigError("tree is not a leaf");
  return std::get<Leaf>(value_);
}

const std::vector<CompositionTree>& CompositionTree::children() const {
  if (is_leaf()) throw ConfigError("a leaf has no children");
  return std::get<std::vector<CompositionTree>>(value_);
}

CompositionTree encapsulate(std::vector<CompositionTree> children) {
  return CompositionTree::node(std::move(children));
}

namespace {

void write_name(const CompositionTree& tree, std::string& out) {
  if (tree.is_leaf()) {
    out += '\'' + tree.as_leaf().name() + '\'';
    return;
  }
  out += '[';
  bool first = true;
  for (const auto& child : tree.children()) {
    if (!first) out += ", ";
    first = false;
    write_name(child, out);
  }
  out += ']';
}

class NameParser {
 public:
  explicit NameParser(std::string_view text) : text_(text) {}

  CompositionTree parse() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '[') fail("expected '['");
    auto tree = list();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    return tree;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  CompositionTree list() {
    ++pos_;  // '['
    std::vector<CompositionTree> items;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ']') fail("empty list");
    for (;;) {
      skip_space();
      items.push_back(item());
      skip_space();
      if (pos_ >= text_.size()) fail("unbalanced '['");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return CompositionTree::node(std::move(items));
      }
      fail("expected ',' or ']'");
    }
  }

  CompositionTree item() {
    if (pos_ >= text_.size()) fail("unexpected end of name");
    const char c = text_[pos_];
    if (c == '[') return list();
    if (c != '\'' && c != '"') fail("expected a quoted tool name or '['");
    const std::size_t start = pos_;
    const auto close = text_.find(c, pos_ + 1);
    if (close == std::string_view::npos) fail("unterminated quote");
    const auto body = text_.substr(pos_ + 1, close - pos_ - 1);
    const auto underscore = body.rfind('_');
    if (underscore == std::string_view::npos || underscore == 0 ||
        underscore + 1 == body.size()) {
      pos_ = start;
      fail("tool name '" + std::string(body) + "' lacks a _<integer> suffix");
    }
    long long suffix = 0;
    for (char d : body.substr(underscore + 1)) {
      if (!std::isdigit(static_cast<unsigned char>(d))) {
        pos_ = start;
        fail("tool name '" + std::string(body) + "' has a non-integer suffix");
      }
      suffix = suffix * 10 + (d - '0');
      if (suffix > std::numeric_limits<int>::max()) {
        pos_ = start;
        fail("suffix of '" + std::string(body) + "' is too large");
      }
    }
    for (char b : body.substr(0, underscore)) {
      if (b == '[' || b == ']' || b == ',' || b == '\'' || b == '"') {
        pos_ = start;
        fail("tool name '" + std::string(body) + "' contains a reserved character");
      }
    }
    pos_ = close + 1;
    return CompositionTree::leaf(std::string(body.substr(0, underscore)), static_cast<int>(suffix));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void collect_leaves(const CompositionTree& tree, std::vector<Leaf>& out) {
  if (tree.is_leaf()) {
    out.push_back(tree.as_leaf());
    return;
  }
  for (const auto& child : tree.children()) collect_leaves(child, out);
}

}  // namespace

std::string serialize_name(const CompositionTree& tree) {
  std::string out;
  if (tree.is_leaf()) {
    out += '[';
    write_name(tree, out);
    out += ']';
  } else {
    write_name(tree, out);
  }
  return out;
}

CompositionTree parse_name(std::string_view text) { return NameParser(text).parse(); }

CompositionTree unwrap_single_leaf(CompositionTree tree) {
  if (!tree.is_leaf() && tree.children().size() == 1 && tree.children().front().is_leaf()) {
    return tree.children().front();
  }
  return tree;
}

int depth(const CompositionTree& tree) {
  if (tree.is_leaf()) return 0;
  int deepest = 0;
  for (const auto& child : tree.children()) deepest = std::max(deepest, depth(child));
  return deepest + 1;
}

int layer_depth(const CompositionTree& tree) {
  if (tree.is_leaf()) return tree.as_leaf().suffix;
  int deepest = 0;
  for (const auto& child : tree.children()) deepest = std::max(deepest, layer_depth(child));
  return deepest + 1;
}

std::vector<Leaf> leaves(const CompositionTree& tree) {
  std::vector<Leaf> out;
  collect_leaves(tree, out);
  return out;
}

std::size_t internal_node_count(const CompositionTree& tree) {
  if (tree.is_leaf()) return 0;
  std::size_t n = 1;
  for (const auto& child : tree.children()) n += internal_node_count(child);
  return n;
}

std::string resolve_leaf(const ToolRegistry& registry, const Leaf& leaf) {
  auto name = leaf.name();
  if (registry.contains(name)) return name;
  if (leaf.suffix == 0 && registry.contains(leaf.base)) return leaf.base;
  throw LookupError("unresolved tool '" + name + "'");
}

PolicyFactory constant_policy(PlannerPolicy policy) {
  return [policy](int layer) {
    auto p = policy;
    p.layer = layer;
    return p;
  };
}

namespace {

std::string instantiate_node(const CompositionTree& tree, ToolRegistry& registry,
                             const PolicyFactory& policy_factory, std::string_view public_prefix,
                             std::string tool_id) {
  if (tree.is_leaf()) return resolve_leaf(registry, tree.as_leaf());
  std::vector<std::string> children;
  std::string listing;
  for (const auto& child : tree.children()) {
    children.push_back(instantiate_node(child, registry, policy_factory, public_prefix, {}));
    if (!listing.empty()) listing += ", ";
    listing += registry.descriptor(children.back()).public_name;
  }
  const int layer = layer_depth(tree);
  PlannerPolicy policy = policy_factory(layer);
  policy.layer = layer;
  policy.validate();

  ToolDescriptor d;
  d.tool_id = tool_id.empty() ? registry.allocate_composite_id() : std::move(tool_id);
  d.public_name = registry.allocate_public_name(public_prefix);
  d.description = "Agent composite tool that consults " + listing + " and reconciles their answers.";
  d.backend = Backend::kComposite;
  d.depth = depth(tree);
  Invocable run = [policy, children](const ToolRegistry& scope, std::string_view query,
                                     CostLedger& ledger, std::uint64_t seed) -> ToolAnswer {
    auto outcome = run_react(policy, children, query, scope, seed);
    ledger += outcome.ledger;
    return {std::move(outcome.answer), std::nullopt};
  };
  return registry.register_tool(std::move(d), std::move(run));
}

}  // namespace

std::string instantiate(const CompositionTree& tree, ToolRegistry& registry,
                        const PolicyFactory& policy_factory, std::string_view public_prefix,
                        std::string root_id) {
  std::set<std::string> missing;
  for (const auto& leaf : leaves(tree)) {
    try {
      resolve_leaf(registry, leaf);
    } catch (const LookupError&) {
      missing.insert(leaf.name());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& name : missing) list += (list.empty() ? "" : ", ") + name;
    throw LookupError("cannot instantiate " + serialize_name(tree) + ": unresolved " + list);
  }
  return instantiate_node(tree, registry, policy_factory, public_prefix, std::move(root_id));
}

}  // namespace chemamp
