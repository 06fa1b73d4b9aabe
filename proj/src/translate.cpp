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

#include "nlq/translate.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "nlq/text.hpp"

namespace nlq {

using nlohmann::json;

std::string_view to_string(Dialect dialect) {
  switch (dialect) {
    case Dialect::Sql:
      return "sql";
    case Dialect::Cypher:
      return "cypher";
    case Dialect::Service:
      return "service";
  }
  return "sql";
}

std::optional<Dialect> parse_dialect(std::string_view text) {
  const auto lower = to_lower(text);
  if (lower == "sql") return Dialect::Sql;
  if (lower == "cypher") return Dialect::Cypher;
  if (lower == "service") return Dialect::Service;
  return std::nullopt;
}

namespace {

// Reserved words that cannot appear as bare identifiers.
const std::set<std::string, std::less<>>& sql_reserved() {
  static const std::set<std::string, std::less<>> words{
      "all", "alter", "and", "any", "as", "asc", "between", "by", "case", "check",
      "column", "constraint", "create", "cross", "current", "default", "delete", "desc",
      "distinct", "drop", "else", "end", "except", "exists", "false", "fetch", "for",
      "foreign", "from", "full", "grant", "group", "having", "in", "index", "inner",
      "insert", "intersect", "into", "is", "join", "key", "left", "like", "limit", "not",
      "null", "of", "offset", "on", "or", "order", "outer", "primary", "references",
      "right", "select", "set", "table", "then", "to", "true", "union", "unique",
      "update", "user", "using", "values", "when", "where", "with"};
  return words;
}

const std::set<std::string, std::less<>>& cypher_reserved() {
  static const std::set<std::string, std::less<>> words{
      "all", "and", "as", "asc", "by", "call", "case", "contains", "create", "delete",
      "desc", "detach", "distinct", "else", "end", "ends", "exists", "false", "in",
      "is", "limit", "match", "merge", "not", "null", "on", "optional", "or", "order",
      "remove", "return", "set", "skip", "starts", "then", "true", "union", "unwind",
      "when", "where", "with", "xor", "yield"};
  return words;
}

std::string sql_id(const std::string& name) {
  return sql_reserved().count(name) ? "\"" + name + "\"" : name;
}

std::string cypher_id(const std::string& name) {
  return cypher_reserved().count(name) ? "`" + name + "`" : name;
}

void require_valid(const QueryGraph& q, const SchemaGraph& g) {
  if (auto err = validate_query_graph(q, g)) {
    throw TranslationError(fmt::format("invalid query graph: {}", *err));
  }
}

// Pairs and triples in class order, then schema attribute order, so graphs
// that compare equal emit identical text.
std::vector<AttributeRef> ordered_pairs(const QueryGraph& q, const SchemaGraph& g) {
  std::vector<AttributeRef> out;
  for (const auto& cls : q.classes) {
    for (const auto& attr : g.find_class(cls)->attributes) {
      AttributeRef ref{cls, attr.name};
      if (std::find(q.reported.begin(), q.reported.end(), ref) != q.reported.end()) {
        out.push_back(std::move(ref));
      }
    }
  }
  return out;
}

std::vector<ConstraintTriple> ordered_triples(const QueryGraph& q,
                                              const SchemaGraph& g) {
  std::vector<ConstraintTriple> out;
  for (const auto& cls : q.classes) {
    for (const auto& attr : g.find_class(cls)->attributes) {
      std::vector<ConstraintTriple> here;
      for (const auto& t : q.constraints) {
        if (t.cls == cls && t.attr == attr.name) here.push_back(t);
      }
      std::sort(here.begin(), here.end());
      here.erase(std::unique(here.begin(), here.end()), here.end());
      out.insert(out.end(), here.begin(), here.end());
    }
  }
  return out;
}

struct JoinStep {
  std::size_t relationship;
  std::string joined;  ///< class added by this step
  std::string known;   ///< class already in the pattern
};

// Orders tree edges so that each one attaches a new class to those already
// placed, starting from q.classes[0].
std::vector<JoinStep> join_order(const QueryGraph& q, const SchemaGraph& g) {
  std::set<std::string> placed{q.classes.front()};
  std::vector<bool> used(q.tree_edges.size(), false);
  std::vector<JoinStep> steps;
  bool progress = true;
  while (steps.size() < q.tree_edges.size() && progress) {
    progress = false;
    for (std::size_t i = 0; i < q.tree_edges.size(); ++i) {
      if (used[i]) continue;
      const auto& r = g.relationships()[q.tree_edges[i]];
      const bool has_from = placed.count(r.from_class) > 0;
      const bool has_to = placed.count(r.to_class) > 0;
      if (has_from == has_to) continue;
      const auto& joined = has_from ? r.to_class : r.from_class;
      const auto& known = has_from ? r.from_class : r.to_class;
      steps.push_back({q.tree_edges[i], joined, known});
      placed.insert(joined);
      used[i] = true;
      progress = true;
    }
  }
  if (steps.size() != q.tree_edges.size()) {
    throw TranslationError("tree edges do not form a tree rooted at the first class");
  }
  return steps;
}

void check_join_columns(const Relationship& r, const SchemaGraph& g) {
  if (!g.has_attribute(r.from_class, r.join_from_column()) ||
      !g.has_attribute(r.to_class, r.join_to_column())) {
    throw TranslationError(fmt::format(
        "relationship '{}' ({} -> {}) has no resolvable join predicate "
        "({}.{} = {}.{})",
        r.label, r.from_class, r.to_class, r.from_class, r.join_from_column(),
        r.to_class, r.join_to_column()));
  }
}

ValueKind kind_of(const SchemaGraph& g, const std::string& cls,
                  const std::string& attr) {
  return g.find_class(cls)->find_attribute(attr)->kind;
}

std::string sql_literal(const std::string& value, ValueKind kind) {
  if ((kind == ValueKind::Integer || kind == ValueKind::Real) && is_number(value)) {
    return value;
  }
  if (kind == ValueKind::Boolean && (value == "true" || value == "false")) {
    return to_upper(value);
  }
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string_view sql_op(ConstraintOp op) {
  return op == ConstraintOp::Neq ? "<>" : op_token(op);
}

std::string cypher_literal(const std::string& value, ValueKind kind) {
  if ((kind == ValueKind::Integer || kind == ValueKind::Real) && is_number(value)) {
    return value;
  }
  if (kind == ValueKind::Boolean && (value == "true" || value == "false")) {
    return value;
  }
  std::string out = "'";
  for (char c : value) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

}  // namespace

std::string to_sql(const QueryGraph& q, const SchemaGraph& g) {
  require_valid(q, g);
  std::vector<std::string> columns;
  for (const auto& p : ordered_pairs(q, g)) {
    columns.push_back(fmt::format("{}.{}", sql_id(p.cls), sql_id(p.attr)));
  }
  std::string sql = fmt::format("SELECT {} FROM {}",
                                columns.empty() ? "*" : join(columns, ", "),
                                sql_id(q.classes.front()));
  for (const auto& step : join_order(q, g)) {
    const auto& r = g.relationships()[step.relationship];
    check_join_columns(r, g);
    sql += fmt::format(" INNER JOIN {} ON {}.{} = {}.{}", sql_id(step.joined),
                       sql_id(r.from_class), sql_id(r.join_from_column()),
                       sql_id(r.to_class), sql_id(r.join_to_column()));
  }
  std::vector<std::string> predicates;
  for (const auto& t : ordered_triples(q, g)) {
    predicates.push_back(
        fmt::format("{}.{} {} {}", sql_id(t.cls), sql_id(t.attr), sql_op(t.constraint.op),
                    sql_literal(t.constraint.value, kind_of(g, t.cls, t.attr))));
  }
  if (!predicates.empty()) sql += " WHERE " + join(predicates, " AND ");
  return sql;
}

std::string to_cypher(const QueryGraph& q, const SchemaGraph& g) {
  require_valid(q, g);
  const auto steps = join_order(q, g);

  // Each step extends the chain that currently ends at its known class, or
  // opens a new comma-separated chain from that class.
  std::vector<std::string> chains{fmt::format("({0}:{0})", cypher_id(q.classes.front()))};
  std::vector<std::string> chain_tail{q.classes.front()};
  for (const auto& step : steps) {
    const auto& r = g.relationships()[step.relationship];
    check_join_columns(r, g);
    const bool forward = r.from_class == step.known;
    const std::string segment =
        forward ? fmt::format("-[:{0}]->({1}:{1})", cypher_id(r.label), cypher_id(step.joined))
                : fmt::format("<-[:{0}]-({1}:{1})", cypher_id(r.label), cypher_id(step.joined));
    auto it = std::find(chain_tail.begin(), chain_tail.end(), step.known);
    if (it != chain_tail.end()) {
      const auto idx = static_cast<std::size_t>(it - chain_tail.begin());
      chains[idx] += segment;
      chain_tail[idx] = step.joined;
    } else {
      chains.push_back(fmt::format("({}){}", cypher_id(step.known), segment));
      chain_tail.push_back(step.joined);
    }
  }

  std::string cypher = "MATCH " + join(chains, ", ");
  std::vector<std::string> predicates;
  for (const auto& t : ordered_triples(q, g)) {
    predicates.push_back(fmt::format(
        "{}.{} {} {}", cypher_id(t.cls), cypher_id(t.attr), sql_op(t.constraint.op),
        cypher_literal(t.constraint.value, kind_of(g, t.cls, t.attr))));
  }
  if (!predicates.empty()) cypher += " WHERE " + join(predicates, " AND ");
  std::vector<std::string> returns;
  for (const auto& p : ordered_pairs(q, g)) {
    returns.push_back(fmt::format("{}.{}", cypher_id(p.cls), cypher_id(p.attr)));
  }
  cypher += " RETURN " + (returns.empty() ? std::string("*") : join(returns, ", "));
  return cypher;
}

json to_service_document(const QueryGraph& q, const SchemaGraph& g) {
  require_valid(q, g);
  json doc;
  doc["classes"] = q.classes;
  doc["select"] = json::array();
  for (const auto& p : ordered_pairs(q, g)) {
    doc["select"].push_back(fmt::format("{}.{}", p.cls, p.attr));
  }
  doc["constraints"] = json::array();
  for (const auto& t : ordered_triples(q, g)) {
    doc["constraints"].push_back({{"path", fmt::format("{}.{}", t.cls, t.attr)},
                                  {"op", op_token(t.constraint.op)},
                                  {"value", t.constraint.value}});
  }
  doc["joins"] = json::array();
  for (std::size_t e : q.tree_edges) {
    const auto& r = g.relationships()[e];
    doc["joins"].push_back({{"from", r.from_class}, {"label", r.label}, {"to", r.to_class}});
  }
  return doc;
}

std::string to_service_query(const QueryGraph& q, const SchemaGraph& g) {
  return to_service_document(q, g).dump(2);
}

QueryGraph from_service_document(const json& doc, const SchemaGraph& g) {
  auto bad = [](std::string_view what) {
    return TranslationError(fmt::format("invalid query document: {}", what));
  };
  if (!doc.is_object()) throw bad("not an object");
  for (const char* key : {"select", "constraints", "joins"}) {
    if (!doc.contains(key) || !doc.at(key).is_array()) {
      throw bad(fmt::format("'{}' must be an array", key));
    }
  }
  auto split_path = [&](const json& v) {
    if (!v.is_string()) throw bad("paths must be strings");
    const auto s = v.get<std::string>();
    const auto dot = s.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
      throw bad(fmt::format("path '{}' is not class.attribute", s));
    }
    return std::make_pair(to_lower(s.substr(0, dot)), to_lower(s.substr(dot + 1)));
  };

  QueryGraph q;
  for (const auto& v : doc.at("select")) {
    auto [cls, attr] = split_path(v);
    q.reported.push_back({cls, attr});
  }
  for (const auto& c : doc.at("constraints")) {
    if (!c.is_object() || !c.contains("path") || !c.contains("op") ||
        !c.contains("value")) {
      throw bad("constraints need path, op and value");
    }
    auto [cls, attr] = split_path(c.at("path"));
    if (!c.at("op").is_string() || !c.at("value").is_string()) {
      throw bad("op and value must be strings");
    }
    auto op = parse_op_token(c.at("op").get<std::string>());
    if (!op) throw bad(fmt::format("unknown operator '{}'", c.at("op").get<std::string>()));
    q.constraints.push_back({cls, attr, {*op, c.at("value").get<std::string>()}});
  }
  for (const auto& j : doc.at("joins")) {
    if (!j.is_object() || !j.contains("from") || !j.contains("to") ||
        !j.contains("label")) {
      throw bad("joins need from, label and to");
    }
    const auto from = to_lower(j.at("from").get<std::string>());
    const auto to = to_lower(j.at("to").get<std::string>());
    const auto label = to_lower(j.at("label").get<std::string>());
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < g.relationships().size(); ++i) {
      const auto& r = g.relationships()[i];
      if (r.from_class == from && r.to_class == to && r.label == label) {
        found = i;
        break;
      }
    }
    if (!found) throw bad(fmt::format("no relationship {} -[{}]-> {}", from, label, to));
    q.tree_edges.push_back(*found);
  }

  if (doc.contains("classes")) {
    if (!doc.at("classes").is_array()) throw bad("'classes' must be an array");
    for (const auto& c : doc.at("classes")) {
      if (!c.is_string()) throw bad("class names must be strings");
      q.classes.push_back(to_lower(c.get<std::string>()));
    }
  } else {
    // Derive classes from paths and joins, in order of appearance.
    auto add = [&](const std::string& cls) {
      if (!q.has_class(cls)) q.classes.push_back(cls);
    };
    for (const auto& p : q.reported) add(p.cls);
    for (const auto& t : q.constraints) add(t.cls);
    for (std::size_t e : q.tree_edges) {
      add(g.relationships()[e].from_class);
      add(g.relationships()[e].to_class);
    }
  }
  if (auto err = validate_query_graph(q, g)) throw bad(*err);
  return q;
}

std::string translate(const QueryGraph& q, const SchemaGraph& g, Dialect dialect) {
  switch (dialect) {
    case Dialect::Sql:
      return to_sql(q, g);
    case Dialect::Cypher:
      return to_cypher(q, g);
    case Dialect::Service:
      return to_service_query(q, g);
  }
  return to_sql(q, g);
}

}  // namespace nlq
