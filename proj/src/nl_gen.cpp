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

#include "nlq/nl_gen.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "embedded_data.hpp"
#include "nlq/text.hpp"

namespace nlq {

std::string_view to_string(TemplateStyle style) {
  switch (style) {
    case TemplateStyle::PerClass:
      return "per_class";
    case TemplateStyle::AttrClassConstr:
      return "attr_class_constr";
    case TemplateStyle::AttrConstrClass:
      return "attr_constr_class";
    case TemplateStyle::ClassAttrConstr:
      return "class_attr_constr";
    case TemplateStyle::ConstrAttrClass:
      return "constr_attr_class";
    case TemplateStyle::ConstrClassAttr:
      return "constr_class_attr";
  }
  return "per_class";
}

std::optional<ConstraintOp> SynonymTable::op_for_surface(
    std::string_view surface) const {
  for (auto op : kAllConstraintOps) {
    const auto& list = surfaces(op);
    if (std::find(list.begin(), list.end(), surface) != list.end()) return op;
  }
  return std::nullopt;
}

SynonymTable SynonymTable::parse(std::string_view text) {
  SynonymTable table;
  std::vector<std::string>* current = nullptr;
  std::size_t line_no = 0;
  std::map<std::string, std::string> owner;  // surface -> op header
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = to_lower(trim(raw));
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw SynonymError(fmt::format("line {}: unterminated header", line_no));
      }
      const std::string header = line.substr(1, line.size() - 2);
      if (header == "verbs") {
        current = &table.verbs;
      } else if (header == "class_prepositions") {
        current = &table.class_prepositions;
      } else if (header == "connectives") {
        current = &table.connectives;
      } else if (auto op = parse_op_name(header)) {
        current = &table.op_surfaces[static_cast<std::size_t>(*op)];
      } else {
        throw SynonymError(
            fmt::format("line {}: unknown header [{}]", line_no, header));
      }
      continue;
    }
    if (!current) {
      throw SynonymError(fmt::format("line {}: surface before any header", line_no));
    }
    const std::string surface = join(split_whitespace(line), " ");
    if (std::find(current->begin(), current->end(), surface) != current->end()) {
      throw SynonymError(
          fmt::format("line {}: duplicate surface '{}'", line_no, surface));
    }
    current->push_back(surface);
  }
  if (table.verbs.empty() || table.class_prepositions.empty() ||
      table.connectives.empty()) {
    throw SynonymError("verbs, class_prepositions and connectives are required");
  }
  for (auto op : kAllConstraintOps) {
    const auto& list = table.surfaces(op);
    if (list.size() < 2) {
      throw SynonymError(fmt::format("operator {} needs at least two surfaces",
                                     op_name(op)));
    }
    for (const auto& s : list) {
      auto [it, fresh] = owner.emplace(s, std::string(op_name(op)));
      if (!fresh) {
        throw SynonymError(fmt::format("surface '{}' is listed under both {} and {}",
                                       s, it->second, op_name(op)));
      }
    }
  }
  return table;
}

const SynonymTable& SynonymTable::bundled() {
  static const SynonymTable table = parse(embedded::kSynonyms);
  return table;
}

namespace {

// Accumulates words; commas are kept as separate pieces and glued to the
// preceding word when the sentence is finished.
class Sentence {
 public:
  void word(std::string_view w) {
    if (!w.empty()) pieces_.emplace_back(w);
  }
  void comma() {
    if (!pieces_.empty() && pieces_.back() != ",") pieces_.emplace_back(",");
  }
  void list(const std::vector<std::string>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) comma();
      word(items[i]);
    }
  }
  std::string str() const {
    std::string out;
    for (const auto& p : pieces_) {
      if (!out.empty() && p != ",") out += ' ';
      out += p;
    }
    return out;
  }

 private:
  std::vector<std::string> pieces_;
};

struct Parts {
  std::vector<std::string> attrs;
  std::vector<std::string> constraints;
  std::vector<std::string> classes;
};

std::string constraint_phrase(const ConstraintTriple& t, std::string_view surface) {
  return fmt::format("{} {} {}", t.attr, surface, t.constraint.value);
}

Parts collect(const QueryGraph& q, const RenderChoices& c,
              const std::vector<std::string>& for_classes) {
  Parts parts;
  for (const auto& cls : for_classes) {
    parts.classes.push_back(cls);
    for (const auto& p : q.reported) {
      if (p.cls == cls) parts.attrs.push_back(p.attr);
    }
    for (std::size_t i = 0; i < q.constraints.size(); ++i) {
      if (q.constraints[i].cls == cls) {
        parts.constraints.push_back(constraint_phrase(q.constraints[i], c.op_surfaces[i]));
      }
    }
  }
  return parts;
}

}  // namespace

std::string render_english(const QueryGraph& q, TemplateStyle style,
                           const RenderChoices& c) {
  if (c.op_surfaces.size() != q.constraints.size()) {
    throw std::invalid_argument("one operator surface per constraint is required");
  }
  Sentence s;
  auto constraint_block = [&](const Parts& parts) {
    if (parts.constraints.empty()) return;
    s.word(c.connective);
    s.list(parts.constraints);
  };
  auto class_block = [&](const Parts& parts) {
    s.word(c.preposition);
    s.list(parts.classes);
  };

  if (style == TemplateStyle::PerClass) {
    s.word(c.verb);
    bool first = true;
    for (const auto& cls : c.class_order) {
      const Parts parts = collect(q, c, {cls});
      if (!first) s.comma();
      first = false;
      s.list(parts.attrs);
      constraint_block(parts);
      class_block(parts);
    }
    return s.str();
  }

  const Parts parts = collect(q, c, c.class_order);
  const bool has_constraints = !parts.constraints.empty();
  switch (style) {
    case TemplateStyle::AttrClassConstr:
      s.word(c.verb);
      s.list(parts.attrs);
      class_block(parts);
      constraint_block(parts);
      break;
    case TemplateStyle::AttrConstrClass:
      s.word(c.verb);
      s.list(parts.attrs);
      constraint_block(parts);
      class_block(parts);
      break;
    case TemplateStyle::ClassAttrConstr:
      class_block(parts);
      s.comma();
      s.word(c.verb);
      s.list(parts.attrs);
      constraint_block(parts);
      break;
    case TemplateStyle::ConstrAttrClass:
      constraint_block(parts);
      if (has_constraints) s.comma();
      s.word(c.verb);
      s.list(parts.attrs);
      class_block(parts);
      break;
    case TemplateStyle::ConstrClassAttr:
      constraint_block(parts);
      class_block(parts);
      s.comma();
      s.word(c.verb);
      s.list(parts.attrs);
      break;
    case TemplateStyle::PerClass:
      break;
  }
  return s.str();
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

}  // namespace

std::string render_english(const QueryGraph& q, TemplateStyle style, Rng& rng,
                           const SynonymTable& table) {
  RenderChoices c;
  c.verb = pick(table.verbs, rng);
  c.preposition = pick(table.class_prepositions, rng);
  c.connective = pick(table.connectives, rng);
  c.class_order = q.mentioned_classes();
  if (c.class_order.size() > 1) {
    const auto offset = std::uniform_int_distribution<std::size_t>(
        0, c.class_order.size() - 1)(rng);
    std::rotate(c.class_order.begin(),
                c.class_order.begin() + static_cast<std::ptrdiff_t>(offset),
                c.class_order.end());
  }
  for (const auto& t : q.constraints) {
    c.op_surfaces.push_back(pick(table.surfaces(t.constraint.op), rng));
  }
  return render_english(q, style, c);
}

TemplateStyle sample_style(Rng& rng) {
  return kAllTemplateStyles[std::uniform_int_distribution<std::size_t>(
      0, kAllTemplateStyles.size() - 1)(rng)];
}

std::string sample_rendering(const QueryGraph& q, Rng& rng,
                             const SynonymTable& table) {
  const auto style = sample_style(rng);
  return render_english(q, style, rng, table);
}

std::string paraphrase(const QueryGraph& q, const SynonymTable& table) {
  RenderChoices c;
  c.verb = table.verbs.front();
  c.preposition = table.class_prepositions.front();
  c.connective = table.connectives.front();
  c.class_order = q.mentioned_classes();
  for (const auto& t : q.constraints) {
    c.op_surfaces.push_back(table.surfaces(t.constraint.op).front());
  }
  return render_english(q, TemplateStyle::PerClass, c);
}

}  // namespace nlq
