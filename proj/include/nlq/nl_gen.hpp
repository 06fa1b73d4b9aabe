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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlq/query_gen.hpp"
#include "nlq/query_graph.hpp"

namespace nlq {

/// Order in which a sentence visits the element types. PerClass walks the
/// classes and describes each one's attributes then constraints; the rest
/// are global orderings over (attributes, classes, constraints).
enum class TemplateStyle {
  PerClass,
  AttrClassConstr,
  AttrConstrClass,
  ClassAttrConstr,
  ConstrAttrClass,
  ConstrClassAttr,
};

inline constexpr std::array<TemplateStyle, 6> kAllTemplateStyles = {
    TemplateStyle::PerClass,        TemplateStyle::AttrClassConstr,
    TemplateStyle::AttrConstrClass, TemplateStyle::ClassAttrConstr,
    TemplateStyle::ConstrAttrClass, TemplateStyle::ConstrClassAttr};

std::string_view to_string(TemplateStyle style);

class SynonymError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Surface forms for verbs, class prepositions, constraint connectives and
/// constraint operators. The first entry of each list is the canonical one.
struct SynonymTable {
  std::vector<std::string> verbs;
  std::vector<std::string> class_prepositions;
  std::vector<std::string> connectives;
  /// Indexed by ConstraintOp.
  std::array<std::vector<std::string>, 6> op_surfaces;

  const std::vector<std::string>& surfaces(ConstraintOp op) const {
    return op_surfaces[static_cast<std::size_t>(op)];
  }

  /// Operator whose surface list contains `surface`.
  std::optional<ConstraintOp> op_for_surface(std::string_view surface) const;

  /// Parses the `[header]` / one-surface-per-line format. Throws
  /// SynonymError (with line number) on malformed input or when an operator
  /// has fewer than two surfaces or a surface is shared between operators.
  static SynonymTable parse(std::string_view text);

  /// The table shipped in data/synonyms.txt.
  static const SynonymTable& bundled();
};

/// Every random decision of one rendering, made explicit.
struct RenderChoices {
  std::string verb;
  std::string preposition;
  std::string connective;
  /// Classes to describe, in order. Normally the mentioned classes.
  std::vector<std::string> class_order;
  /// One operator surface per entry of QueryGraph::constraints.
  std::vector<std::string> op_surfaces;
};

/// Renders with explicit choices. Attributes and constraints follow
/// `class_order`, then their order in the graph. Commas attach to the
/// preceding word; all text is lowercase.
std::string render_english(const QueryGraph& q, TemplateStyle style,
                           const RenderChoices& choices);

/// Draws the synonyms and a rotated class order from `rng`, then renders.
std::string render_english(const QueryGraph& q, TemplateStyle style, Rng& rng,
                           const SynonymTable& table = SynonymTable::bundled());

/// Uniform choice among the six styles.
TemplateStyle sample_style(Rng& rng);

/// sample_style, then render_english with the same generator.
std::string sample_rendering(const QueryGraph& q, Rng& rng,
                             const SynonymTable& table = SynonymTable::bundled());

/// Fixed style and first-listed synonyms; identical output for identical
/// graphs.
std::string paraphrase(const QueryGraph& q,
                       const SynonymTable& table = SynonymTable::bundled());

}  // namespace nlq
