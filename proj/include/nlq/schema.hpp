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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nlq {

/// Kind of value an attribute holds. Only used to sample constraint values.
enum class ValueKind { Text, Integer, Real, Boolean };

std::string_view to_string(ValueKind kind);
std::optional<ValueKind> parse_value_kind(std::string_view text);

struct AttributeDef {
  std::string name;
  ValueKind kind = ValueKind::Text;

  bool operator==(const AttributeDef&) const = default;
};

struct ClassDef {
  std::string name;
  std::vector<AttributeDef> attributes;
  std::uint64_t instance_count = 0;

  const AttributeDef* find_attribute(std::string_view attr) const;
  std::optional<std::size_t> attribute_index(std::string_view attr) const;

  bool operator==(const ClassDef&) const = default;
};

/// A class-class link. Traversal treats it as undirected; SQL emission uses
/// the declared direction (`from.from_column = to.to_column`).
struct Relationship {
  std::string from_class;
  std::string to_class;
  std::string label;
  /// Explicit join columns. When empty, the label names the referencing
  /// column and the referenced column is `id`.
  std::string from_column;
  std::string to_column;

  const std::string& join_from_column() const {
    return from_column.empty() ? label : from_column;
  }
  std::string join_to_column() const {
    return to_column.empty() ? std::string("id") : to_column;
  }

  bool operator==(const Relationship&) const = default;
};

/// Raised for malformed or invalid schema input. `line` is 1-based, 0 when
/// the problem is not tied to a line.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& message, std::size_t line = 0);

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct SchemaStats {
  std::size_t class_count = 0;
  std::size_t attribute_count = 0;
  std::size_t unique_attribute_count = 0;
  std::size_t edge_count = 0;

  bool operator==(const SchemaStats&) const = default;
};

/// A validated, connected schema graph. Immutable once built.
class SchemaGraph {
 public:
  /// Validates and builds the graph. Names are lowercased; collisions after
  /// normalization, dangling relationship endpoints, self-loops and
  /// disconnected inputs raise SchemaError.
  static SchemaGraph build(std::vector<ClassDef> classes,
                           std::vector<Relationship> relationships);

  const std::vector<ClassDef>& classes() const { return classes_; }
  const std::vector<Relationship>& relationships() const {
    return relationships_;
  }

  std::size_t class_count() const { return classes_.size(); }
  std::optional<std::size_t> class_index(std::string_view name) const;
  const ClassDef* find_class(std::string_view name) const;
  const ClassDef& class_at(std::size_t index) const { return classes_[index]; }

  /// Neighbor class indices, sorted by class name, no duplicates.
  const std::vector<std::size_t>& neighbors(std::size_t index) const {
    return adjacency_[index];
  }

  /// First declared relationship joining the two classes, either direction.
  std::optional<std::size_t> relationship_between(std::string_view a,
                                                  std::string_view b) const;

  bool has_attribute(std::string_view cls, std::string_view attr) const;

  bool operator==(const SchemaGraph& other) const {
    return classes_ == other.classes_ && relationships_ == other.relationships_;
  }

 private:
  std::vector<ClassDef> classes_;
  std::vector<Relationship> relationships_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Connected components of an undirected graph given as class names and
/// relationships, each component sorted by name. Used for validation
/// diagnostics.
std::vector<std::vector<std::string>> connected_components(
    const std::vector<ClassDef>& classes,
    const std::vector<Relationship>& relationships);

/// Parses the JSON descriptor format:
///   {"classes": [{"name", "instance_count", "attributes": [{"name",
///   "value_kind"}]}], "relationships": [{"from", "to", "label",
///   "from_column"?, "to_column"?}]}
SchemaGraph parse_schema_descriptor(std::string_view text);

/// Inverse of parse_schema_descriptor. Output is deterministic.
std::string serialize_schema_descriptor(const SchemaGraph& graph);

/// Reads CREATE TABLE statements. Each FOREIGN KEY (col) REFERENCES t(col)
/// clause, or inline `col TYPE REFERENCES t(col)`, becomes a relationship
/// labeled with the referencing column.
SchemaGraph import_sql_ddl(std::string_view ddl);

/// Maps a SQL column type (e.g. "VARCHAR(20)") to a value kind.
ValueKind value_kind_for_sql_type(std::string_view sql_type);

SchemaStats schema_stats(const SchemaGraph& graph);

/// Source of schema metadata. File adapters ship; live database gatherers
/// can implement the same interface.
class SchemaSource {
 public:
  virtual ~SchemaSource() = default;
  virtual SchemaGraph load() const = 0;
};

class DescriptorFileSource : public SchemaSource {
 public:
  explicit DescriptorFileSource(std::filesystem::path path)
      : path_(std::move(path)) {}
  SchemaGraph load() const override;

 private:
  std::filesystem::path path_;
};

class DdlFileSource : public SchemaSource {
 public:
  explicit DdlFileSource(std::filesystem::path path) : path_(std::move(path)) {}
  SchemaGraph load() const override;

 private:
  std::filesystem::path path_;
};

/// Loads a schema from a path, picking the adapter by extension (`.sql` is
/// DDL, anything else is a descriptor).
SchemaGraph load_schema_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace nlq
