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

#include "nlq/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "json.hpp"
#include "nlq/text.hpp"

namespace nlq {

using nlohmann::json;

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Text:
      return "text";
    case ValueKind::Integer:
      return "integer";
    case ValueKind::Real:
      return "real";
    case ValueKind::Boolean:
      return "boolean";
  }
  return "text";
}

std::optional<ValueKind> parse_value_kind(std::string_view text) {
  const std::string lower = to_lower(text);
  if (lower == "text") return ValueKind::Text;
  if (lower == "integer") return ValueKind::Integer;
  if (lower == "real") return ValueKind::Real;
  if (lower == "boolean") return ValueKind::Boolean;
  return std::nullopt;
}

SchemaError::SchemaError(const std::string& message, std::size_t line)
    : std::runtime_error(line == 0 ? message
                                   : fmt::format("line {}: {}", line, message)),
      line_(line) {}

const AttributeDef* ClassDef::find_attribute(std::string_view attr) const {
  for (const auto& a : attributes) {
    if (a.name == attr) return &a;
  }
  return nullptr;
}

std::optional<std::size_t> ClassDef::attribute_index(
    std::string_view attr) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == attr) return i;
  }
  return std::nullopt;
}

namespace {

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isspace(c) || c == ';' || c == ',' || c == '.';
  });
}

}  // namespace

std::vector<std::vector<std::string>> connected_components(
    const std::vector<ClassDef>& classes,
    const std::vector<Relationship>& relationships) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i].name] = i;
  std::vector<std::size_t> parent(classes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& r : relationships) {
    auto a = index.find(r.from_class);
    auto b = index.find(r.to_class);
    if (a == index.end() || b == index.end()) continue;
    parent[find(a->second)] = find(b->second);
  }
  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    groups[find(i)].push_back(classes[i].name);
  }
  std::vector<std::vector<std::string>> out;
  for (auto& [root, names] : groups) {
    std::sort(names.begin(), names.end());
    out.push_back(std::move(names));
  }
  std::sort(out.begin(), out.end());
  return out;
}

SchemaGraph SchemaGraph::build(std::vector<ClassDef> classes,
                               std::vector<Relationship> relationships) {
  SchemaGraph g;
  if (classes.empty()) throw SchemaError("schema declares no classes");

  for (auto& c : classes) {
    c.name = to_lower(c.name);
    if (!is_identifier(c.name)) {
      throw SchemaError(fmt::format("invalid class name '{}'", c.name));
    }
    if (c.attributes.empty()) {
      throw SchemaError(fmt::format("class '{}' has no attributes", c.name));
    }
    std::set<std::string> seen;
    for (auto& a : c.attributes) {
      a.name = to_lower(a.name);
      if (!is_identifier(a.name)) {
        throw SchemaError(fmt::format("invalid attribute name '{}' in class '{}'",
                                      a.name, c.name));
      }
      if (!seen.insert(a.name).second) {
        throw SchemaError(fmt::format("duplicate attribute '{}' in class '{}'",
                                      a.name, c.name));
      }
    }
    if (!g.index_.emplace(c.name, g.index_.size()).second) {
      throw SchemaError(fmt::format("duplicate class '{}'", c.name));
    }
  }

  for (auto& r : relationships) {
    r.from_class = to_lower(r.from_class);
    r.to_class = to_lower(r.to_class);
    r.label = to_lower(r.label);
    r.from_column = to_lower(r.from_column);
    r.to_column = to_lower(r.to_column);
    for (const auto* end : {&r.from_class, &r.to_class}) {
      if (!g.index_.count(*end)) {
        throw SchemaError(
            fmt::format("relationship '{}' references unknown class '{}'",
                        r.label, *end));
      }
    }
    if (r.from_class == r.to_class) {
      throw SchemaError(fmt::format("relationship '{}' is a self-loop on '{}'",
                                    r.label, r.from_class));
    }
    if (!is_identifier(r.label)) {
      throw SchemaError(fmt::format("relationship {} -> {} has invalid label '{}'",
                                    r.from_class, r.to_class, r.label));
    }
  }

  auto components = connected_components(classes, relationships);
  if (components.size() > 1) {
    std::vector<std::string> parts;
    for (const auto& comp : components) {
      parts.push_back(fmt::format("{{{}}}", fmt::join(comp, ", ")));
    }
    throw SchemaError(fmt::format("schema is disconnected: {}",
                                  fmt::join(parts, " | ")));
  }

  g.adjacency_.assign(classes.size(), {});
  for (const auto& r : relationships) {
    const std::size_t a = g.index_.at(r.from_class);
    const std::size_t b = g.index_.at(r.to_class);
    g.adjacency_[a].push_back(b);
    g.adjacency_[b].push_back(a);
  }
  for (auto& adj : g.adjacency_) {
    std::sort(adj.begin(), adj.end(), [&](std::size_t x, std::size_t y) {
      return classes[x].name < classes[y].name;
    });
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  g.classes_ = std::move(classes);
  g.relationships_ = std::move(relationships);
  return g;
}

std::optional<std::size_t> SchemaGraph::class_index(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const ClassDef* SchemaGraph::find_class(std::string_view name) const {
  auto idx = class_index(name);
  return idx ? &classes_[*idx] : nullptr;
}

std::optional<std::size_t> SchemaGraph::relationship_between(
    std::string_view a, std::string_view b) const {
  for (std::size_t i = 0; i < relationships_.size(); ++i) {
    const auto& r = relationships_[i];
    if ((r.from_class == a && r.to_class == b) ||
        (r.from_class == b && r.to_class == a)) {
      return i;
    }
  }
  return std::nullopt;
}

bool SchemaGraph::has_attribute(std::string_view cls,
                                std::string_view attr) const {
  const ClassDef* c = find_class(cls);
  return c != nullptr && c->find_attribute(attr) != nullptr;
}

// ---------------------------------------------------------------------------
// Descriptor format

namespace {

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

template <typename T>
T require(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(fmt::format("{} is missing field '{}'", where, key));
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(fmt::format("{} field '{}' has the wrong type", where, key));
  }
}

}  // namespace

SchemaGraph parse_schema_descriptor(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // byte is 1-based and points just past the offending character.
    const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    throw SchemaError(fmt::format("descriptor syntax error: {}", e.what()),
                      line_of_offset(text, offset));
  }
  if (!doc.is_object()) throw SchemaError("descriptor must be an object", 1);

  std::vector<ClassDef> classes;
  for (const auto& c : require<json>(doc, "classes", "descriptor")) {
    ClassDef def;
    def.name = require<std::string>(c, "name", "class");
    def.instance_count = c.value("instance_count", std::uint64_t{0});
    for (const auto& a : require<json>(c, "attributes", "class")) {
      AttributeDef attr;
      attr.name = require<std::string>(a, "name", "attribute");
      const auto kind = a.value("value_kind", std::string("text"));
      auto parsed = parse_value_kind(kind);
      if (!parsed) {
        throw SchemaError(fmt::format("attribute '{}.{}' has unknown value_kind '{}'",
                                      def.name, attr.name, kind));
      }
      attr.kind = *parsed;
      def.attributes.push_back(std::move(attr));
    }
    classes.push_back(std::move(def));
  }

  std::vector<Relationship> relationships;
  if (doc.contains("relationships")) {
    for (const auto& r : doc.at("relationships")) {
      Relationship rel;
      rel.from_class = require<std::string>(r, "from", "relationship");
      rel.to_class = require<std::string>(r, "to", "relationship");
      rel.label = require<std::string>(r, "label", "relationship");
      rel.from_column = r.value("from_column", std::string());
      rel.to_column = r.value("to_column", std::string());
      relationships.push_back(std::move(rel));
    }
  }
  return SchemaGraph::build(std::move(classes), std::move(relationships));
}

std::string serialize_schema_descriptor(const SchemaGraph& graph) {
  json doc;
  doc["classes"] = json::array();
  for (const auto& c : graph.classes()) {
    json attrs = json::array();
    for (const auto& a : c.attributes) {
      attrs.push_back({{"name", a.name}, {"value_kind", to_string(a.kind)}});
    }
    doc["classes"].push_back({{"name", c.name},
                              {"instance_count", c.instance_count},
                              {"attributes", std::move(attrs)}});
  }
  doc["relationships"] = json::array();
  for (const auto& r : graph.relationships()) {
    json rel = {{"from", r.from_class}, {"to", r.to_class}, {"label", r.label}};
    if (!r.from_column.empty()) rel["from_column"] = r.from_column;
    if (!r.to_column.empty()) rel["to_column"] = r.to_column;
    doc["relationships"].push_back(std::move(rel));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// SQL DDL

ValueKind value_kind_for_sql_type(std::string_view sql_type) {
  std::string base = to_upper(sql_type);
  if (auto paren = base.find('('); paren != std::string::npos) {
    base.resize(paren);
  }
  while (!base.empty() && std::isspace(static_cast<unsigned char>(base.back()))) {
    base.pop_back();
  }
  static const std::set<std::string, std::less<>> integers = {
      "INT",    "INTEGER", "TINYINT", "SMALLINT", "MEDIUMINT",
      "BIGINT", "SERIAL",  "BIGSERIAL", "SMALLSERIAL"};
  static const std::set<std::string, std::less<>> reals = {
      "FLOAT", "DOUBLE", "DECIMAL", "NUMERIC", "REAL", "DOUBLE PRECISION"};
  static const std::set<std::string, std::less<>> booleans = {"BOOL", "BOOLEAN",
                                                              "BIT"};
  if (integers.count(base)) return ValueKind::Integer;
  if (reals.count(base)) return ValueKind::Real;
  if (booleans.count(base)) return ValueKind::Boolean;
  return ValueKind::Text;
}

namespace {

struct DdlToken {
  enum Kind { Word, Number, String, Punct } kind;
  std::string text;
  std::size_t line;
};

std::vector<DdlToken> tokenize_ddl(std::string_view ddl) {
  std::vector<DdlToken> out;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = ddl.size();
  while (i < n) {
    const char c = ddl[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '-' && i + 1 < n && ddl[i + 1] == '-') {
      while (i < n && ddl[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < n && ddl[i + 1] == '*') {
      const std::size_t start_line = line;
      i += 2;
      while (i + 1 < n && !(ddl[i] == '*' && ddl[i + 1] == '/')) {
        if (ddl[i] == '\n') ++line;
        ++i;
      }
      if (i + 1 >= n) throw SchemaError("unterminated comment", start_line);
      i += 2;
    } else if (c == '`' || c == '"' || c == '[') {
      const char close = c == '[' ? ']' : c;
      const std::size_t start = ++i;
      while (i < n && ddl[i] != close) ++i;
      if (i >= n) throw SchemaError("unterminated quoted identifier", line);
      out.push_back({DdlToken::Word, std::string(ddl.substr(start, i - start)), line});
      ++i;
    } else if (c == '\'') {
      const std::size_t start_line = line;
      std::string s;
      ++i;
      while (i < n) {
        if (ddl[i] == '\'' && i + 1 < n && ddl[i + 1] == '\'') {
          s += '\'';
          i += 2;
        } else if (ddl[i] == '\'') {
          break;
        } else {
          if (ddl[i] == '\n') ++line;
          s += ddl[i++];
        }
      }
      if (i >= n) throw SchemaError("unterminated string literal", start_line);
      ++i;
      out.push_back({DdlToken::String, std::move(s), start_line});
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(ddl[i])) ||
                       ddl[i] == '_' || ddl[i] == '$')) {
        ++i;
      }
      out.push_back({DdlToken::Word, std::string(ddl.substr(start, i - start)), line});
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      const std::size_t start = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(ddl[i])) ||
                       ddl[i] == '.')) {
        ++i;
      }
      out.push_back({DdlToken::Number, std::string(ddl.substr(start, i - start)), line});
    } else if (c == '(' || c == ')' || c == ',' || c == ';' || c == '.' ||
               c == '=') {
      out.push_back({DdlToken::Punct, std::string(1, c), line});
      ++i;
    } else {
      throw SchemaError(fmt::format("unexpected character '{}'", c), line);
    }
  }
  return out;
}

class DdlParser {
 public:
  explicit DdlParser(std::vector<DdlToken> tokens) : tokens_(std::move(tokens)) {}

  struct PendingFk {
    std::string table;
    std::string column;
    std::string ref_table;
    std::string ref_column;
    std::size_t line;
  };

  void parse() {
    while (!at_end()) {
      if (accept_punct(";")) continue;
      parse_create_table();
    }
  }

  std::vector<ClassDef> classes;
  std::vector<std::size_t> class_lines;
  std::vector<PendingFk> fks;

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }

  const DdlToken& peek(std::size_t ahead = 0) const {
    static const DdlToken eof{DdlToken::Punct, "<eof>", 0};
    return pos_ + ahead < tokens_.size() ? tokens_[pos_ + ahead] : eof;
  }

  std::size_t line() const {
    if (pos_ < tokens_.size()) return tokens_[pos_].line;
    return tokens_.empty() ? 1 : tokens_.back().line;
  }

  bool is_keyword(const DdlToken& t, std::string_view kw) const {
    return t.kind == DdlToken::Word && to_upper(t.text) == kw;
  }

  bool accept_keyword(std::string_view kw) {
    if (is_keyword(peek(), kw)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) {
      throw SchemaError(fmt::format("expected {} but found '{}'", kw, peek().text),
                        line());
    }
  }

  bool accept_punct(std::string_view p) {
    if (peek().kind == DdlToken::Punct && peek().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) {
      throw SchemaError(fmt::format("expected '{}' but found '{}'", p, peek().text),
                        line());
    }
  }

  std::string expect_name() {
    if (peek().kind != DdlToken::Word) {
      throw SchemaError(fmt::format("expected identifier but found '{}'", peek().text),
                        line());
    }
    std::string name = tokens_[pos_++].text;
    // schema-qualified names keep the last component
    while (accept_punct(".")) name = expect_name();
    return to_lower(name);
  }

  std::vector<std::string> name_list() {
    std::vector<std::string> names;
    expect_punct("(");
    do {
      names.push_back(expect_name());
      if (accept_punct("(")) skip_balanced();  // index prefix length
      accept_keyword("ASC") || accept_keyword("DESC");
    } while (accept_punct(","));
    expect_punct(")");
    return names;
  }

  // Skips tokens up to the matching ')' (the '(' was already consumed).
  void skip_balanced() {
    int depth = 1;
    while (!at_end() && depth > 0) {
      if (accept_punct("(")) {
        ++depth;
      } else if (accept_punct(")")) {
        --depth;
      } else {
        ++pos_;
      }
    }
    if (depth > 0) throw SchemaError("unbalanced parentheses", line());
  }

  // Skips to the next top-level ',' or ')' inside a column list.
  void skip_item_rest() {
    while (!at_end()) {
      if (peek().kind == DdlToken::Punct &&
          (peek().text == "," || peek().text == ")")) {
        return;
      }
      if (accept_punct("(")) {
        skip_balanced();
      } else if (peek().kind == DdlToken::Punct && peek().text == ";") {
        throw SchemaError("unexpected ';' inside CREATE TABLE", line());
      } else {
        ++pos_;
      }
    }
  }

  void parse_references(const std::string& table, const std::string& column,
                        std::size_t at_line) {
    expect_keyword("REFERENCES");
    PendingFk fk;
    fk.table = table;
    fk.column = column;
    fk.ref_table = expect_name();
    fk.line = at_line;
    if (peek().kind == DdlToken::Punct && peek().text == "(") {
      auto cols = name_list();
      fk.ref_column = cols.front();
    }
    fks.push_back(std::move(fk));
  }

  void parse_create_table() {
    const std::size_t stmt_line = line();
    if (!accept_keyword("CREATE")) {
      throw SchemaError(
          fmt::format("unparseable statement starting with '{}'", peek().text),
          stmt_line);
    }
    accept_keyword("TEMPORARY");
    expect_keyword("TABLE");
    if (accept_keyword("IF")) {
      expect_keyword("NOT");
      expect_keyword("EXISTS");
    }
    ClassDef table;
    table.name = expect_name();
    expect_punct("(");
    while (true) {
      const std::size_t item_line = line();
      if (accept_keyword("CONSTRAINT")) {
        if (peek().kind == DdlToken::Word && !is_keyword(peek(), "FOREIGN") &&
            !is_keyword(peek(), "PRIMARY") && !is_keyword(peek(), "UNIQUE") &&
            !is_keyword(peek(), "CHECK")) {
          expect_name();
        }
      }
      if (accept_keyword("FOREIGN")) {
        expect_keyword("KEY");
        if (peek().kind == DdlToken::Word) expect_name();  // MySQL index name
        auto cols = name_list();
        parse_references(table.name, cols.front(), item_line);
        skip_item_rest();
      } else if (is_keyword(peek(), "PRIMARY") || is_keyword(peek(), "UNIQUE") ||
                 is_keyword(peek(), "KEY") || is_keyword(peek(), "INDEX") ||
                 is_keyword(peek(), "CHECK") || is_keyword(peek(), "FULLTEXT")) {
        skip_item_rest();
      } else {
        AttributeDef attr;
        attr.name = expect_name();
        if (peek().kind != DdlToken::Word) {
          throw SchemaError(
              fmt::format("column '{}' is missing a type", attr.name), line());
        }
        std::string type = tokens_[pos_++].text;
        if (is_keyword(peek(), "PRECISION")) type += " " + tokens_[pos_++].text;
        attr.kind = value_kind_for_sql_type(type);
        // column options, with an optional inline REFERENCES clause
        while (!at_end() && !(peek().kind == DdlToken::Punct &&
                              (peek().text == "," || peek().text == ")"))) {
          if (is_keyword(peek(), "REFERENCES")) {
            parse_references(table.name, attr.name, line());
          } else if (accept_punct("(")) {
            skip_balanced();
          } else if (peek().kind == DdlToken::Punct && peek().text == ";") {
            throw SchemaError("unexpected ';' inside CREATE TABLE", line());
          } else {
            ++pos_;
          }
        }
        table.attributes.push_back(std::move(attr));
      }
      if (accept_punct(",")) continue;
      expect_punct(")");
      break;
    }
    // table options (ENGINE=..., etc.) up to ';'
    while (!at_end() && !accept_punct(";")) ++pos_;
    classes.push_back(std::move(table));
    class_lines.push_back(stmt_line);
  }

  std::vector<DdlToken> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

SchemaGraph import_sql_ddl(std::string_view ddl) {
  DdlParser parser(tokenize_ddl(ddl));
  parser.parse();

  std::set<std::string> tables;
  for (std::size_t i = 0; i < parser.classes.size(); ++i) {
    if (!tables.insert(parser.classes[i].name).second) {
      throw SchemaError(fmt::format("duplicate table '{}'", parser.classes[i].name),
                        parser.class_lines[i]);
    }
  }
  std::vector<Relationship> relationships;
  for (const auto& fk : parser.fks) {
    if (!tables.count(fk.ref_table)) {
      throw SchemaError(fmt::format("REFERENCES undeclared table '{}'", fk.ref_table),
                        fk.line);
    }
    // Self-references (e.g. employee.manager_id) cannot be class-graph edges.
    if (fk.ref_table == fk.table) continue;
    Relationship r;
    r.from_class = fk.table;
    r.to_class = fk.ref_table;
    r.label = fk.column;
    r.from_column = fk.column;
    r.to_column = fk.ref_column.empty() ? "id" : fk.ref_column;
    relationships.push_back(std::move(r));
  }
  return SchemaGraph::build(std::move(parser.classes), std::move(relationships));
}

SchemaStats schema_stats(const SchemaGraph& graph) {
  SchemaStats s;
  s.class_count = graph.class_count();
  s.edge_count = graph.relationships().size();
  std::set<std::string_view> unique;
  for (const auto& c : graph.classes()) {
    s.attribute_count += c.attributes.size();
    for (const auto& a : c.attributes) unique.insert(a.name);
  }
  s.unique_attribute_count = unique.size();
  return s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SchemaGraph DescriptorFileSource::load() const {
  return parse_schema_descriptor(read_text_file(path_));
}

SchemaGraph DdlFileSource::load() const {
  return import_sql_ddl(read_text_file(path_));
}

SchemaGraph load_schema_file(const std::filesystem::path& path) {
  if (to_lower(path.extension().string()) == ".sql") {
    return DdlFileSource(path).load();
  }
  return DescriptorFileSource(path).load();
}

}  // namespace nlq
