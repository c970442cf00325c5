// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chemamp/agent.hpp"
#include "chemamp/toolkit.hpp"

namespace chemamp {

/// A tool variant: `base` captured at amplification layer `suffix`. Suffix 0
/// is the atomic tool itself.
struct Leaf {
  std::string base;
  int suffix = 0;

  std::string name() const { return base + "_" + std::to_string(suffix); }
  friend bool operator==(const Leaf&, const Leaf&) = default;
};

/// Immutable composition tree. A node wraps one or more children under one
/// planner.
class CompositionTree {
 public:
  /// An unnamed leaf; only useful as a placeholder before assignment.
  CompositionTree() = default;
  static CompositionTree leaf(std::string base, int suffix);
  /// Throws ConfigError on an empty child list.
  static CompositionTree node(std::vector<CompositionTree> children);

  bool is_leaf() const noexcept { return std::holds_alternative<Leaf>(value_); }
  const Leaf& as_leaf() const;
  const std::vector<CompositionTree>& children() const;

  friend bool operator==(const CompositionTree&, const CompositionTree&) = default;

 private:
  explicit CompositionTree(std::variant<Leaf, std::vector<CompositionTree>> value)
      : value_(std::move(value)) {}
  std::variant<Leaf, std::vector<CompositionTree>> value_;
};

CompositionTree encapsulate(std::vector<CompositionTree> children);

/// "['A_0', ['B_1', 'C_0']]". A bare leaf is written as a one-element list.
std::string serialize_name(const CompositionTree& tree);

/// Parses the bracketed grammar; single or double quotes around leaves,
/// any whitespace between tokens. Always returns a node. Throws ParseError.
CompositionTree parse_name(std::string_view text);

/// A root node holding one leaf denotes that leaf variant itself; returns the
/// leaf in that case and the tree unchanged otherwise.
CompositionTree unwrap_single_leaf(CompositionTree tree);

/// Structural height: 0 for a leaf.
int depth(const CompositionTree& tree);
/// Amplification layer: a leaf counts its suffix, a node is one above its
/// deepest child.
int layer_depth(const CompositionTree& tree);
std::vector<Leaf> leaves(const CompositionTree& tree);
std::size_t internal_node_count(const CompositionTree& tree);

/// Tool id a leaf refers to: "base_suffix", or "base" for suffix 0 when only
/// that is registered. Throws LookupError.
std::string resolve_leaf(const ToolRegistry& registry, const Leaf& leaf);

/// Planner for a node at the given amplification layer.
using PolicyFactory = std::function<PlannerPolicy(int layer)>;

PolicyFactory constant_policy(PlannerPolicy policy);

/// Registers every node of `tree` (children first) as a composite tool and
/// returns the root's id. Leaves resolve to existing tools and register
/// nothing. `root_id` names the root tool instead of a fresh "agent_{n}";
/// public names are allocated as "{public_prefix}_{n}".
std::string instantiate(const CompositionTree& tree, ToolRegistry& registry,
                        const PolicyFactory& policy_factory, std::string_view public_prefix,
                        std::string root_id = {});

}  // namespace chemamp
