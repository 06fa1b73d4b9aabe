/*
 * Copyright 2026 The nlq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nlq/schema.hpp"

namespace nlq {

enum class ConstraintOp { Eq, Neq, Lt, Leq, Gt, Geq };

inline constexpr std::array<ConstraintOp, 6> kAllConstraintOps = {
    ConstraintOp::Eq, ConstraintOp::Neq, ConstraintOp::Lt,
    ConstraintOp::Leq, ConstraintOp::Gt, ConstraintOp::Geq};

/// Canonical surface token: = != < <= > >=
std::string_view op_token(ConstraintOp op);
std::optional<ConstraintOp> parse_op_token(std::string_view token);
/// Enum spelling used in configuration: EQ NEQ LT LEQ GT GEQ
std::string_view op_name(ConstraintOp op);
std::optional<ConstraintOp> parse_op_name(std::string_view name);

/// Literal emitted when constraint values are not sampled.
inline constexpr std::string_view kValuePlaceholder = "@value";

/// Separator between segments of a target sequence.
inline constexpr std::string_view kSegmentSeparator = ";";

struct Constraint {
  ConstraintOp op = ConstraintOp::Eq;
  std::string value;

  auto operator<=>(const Constraint&) const = default;
};

/// A (class, attribute) pair: report this attribute.
struct AttributeRef {
  std::string cls;
  std::string attr;

  auto operator<=>(const AttributeRef&) const = default;
};

/// A (class, attribute, constraint) triple: filter on this attribute.
struct ConstraintTriple {
  std::string cls;
  std::string attr;
  Constraint constraint;

  auto operator<=>(const ConstraintTriple&) const = default;
};

/// Engine-agnostic query representation: a connected subgraph of the schema
/// carrying reported attributes and constraints.
struct QueryGraph {
  /// Classes in visit order. May include connective classes that carry no
  /// pairs or triples.
  std::vector<std::string> classes;
  std::vector<AttributeRef> reported;
  std::vector<ConstraintTriple> constraints;
  /// Indices into SchemaGraph::relationships(); |tree_edges| == |classes| - 1.
  std::vector<std::size_t> tree_edges;

  /// Classes referenced by at least one pair or triple, in `classes` order.
  std::vector<std::string> mentioned_classes() const;

  /// Number of classes in the graph (the query's complexity bucket).
  std::size_t class_count() const { return classes.size(); }

  bool has_class(std::string_view cls) const;
};

/// Returns a description of the first violated invariant, if any.
std::optional<std::string> validate_query_graph(const QueryGraph& q,
                                                const SchemaGraph& g);

/// Set-semantics comparison of reported pairs and constraint triples. Class
/// lists and tree edges are derived data and do not participate.
bool query_graph_equal(const QueryGraph& a, const QueryGraph& b);

/// Target token sequence: pairs `class attribute`, triples
/// `class attribute op value`, segments joined by ` ; `. Classes in visit
/// order; within a class pairs precede triples, each in schema attribute
/// order.
std::vector<std::string> serialize_target_tokens(const QueryGraph& q,
                                                 const SchemaGraph& g);
std::string serialize_target(const QueryGraph& q, const SchemaGraph& g);

struct TargetParseError {
  std::size_t segment = 0;  ///< 0-based segment index
  std::string segment_text;
  std::string reason;

  std::string message() const;
};

struct ParsedTarget {
  std::optional<QueryGraph> graph;
  std::optional<TargetParseError> error;

  bool ok() const { return graph.has_value(); }
};

/// Parses a (possibly malformed) target sequence. Never throws on bad
/// tokens; failures are reported through ParsedTarget::error. Predicted
/// classes come first in `classes` (order of first appearance), followed by
/// any connective classes added by connect_predicted_classes.
ParsedTarget parse_target(std::span<const std::string> tokens,
                          const SchemaGraph& g);
ParsedTarget parse_target(std::string_view target, const SchemaGraph& g);

struct ClassTree {
  /// Predicted classes followed by connective classes, in the order they
  /// were reached.
  std::vector<std::string> classes;
  /// Indices into SchemaGraph::relationships().
  std::vector<std::size_t> edges;
};

/// Connects the predicted classes through the schema with a minimum number
/// of relationship edges (a Steiner tree with unit weights). Connective
/// classes are added where needed. Ties are broken by class name.
ClassTree connect_predicted_classes(std::span<const std::string> classes,
                                    const SchemaGraph& g);

}  // namespace nlq
