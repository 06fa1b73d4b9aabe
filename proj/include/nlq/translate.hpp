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

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"
#include "nlq/query_graph.hpp"
#include "nlq/schema.hpp"

namespace nlq {

class TranslationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Dialect { Sql, Cypher, Service };

std::string_view to_string(Dialect dialect);
std::optional<Dialect> parse_dialect(std::string_view text);

/// ANSI-subset SELECT. Columns are qualified by table name; one INNER JOIN
/// per tree edge (`from.from_column = to.to_column`); constraints AND-ed in
/// WHERE. Text literals are single-quoted with quotes doubled; reserved
/// words used as names are double-quoted.
std::string to_sql(const QueryGraph& q, const SchemaGraph& g);

/// MATCH pattern over the tree edges, WHERE for constraints, RETURN for
/// reported properties. Reserved words used as names are backquoted.
std::string to_cypher(const QueryGraph& q, const SchemaGraph& g);

/// Engine-neutral document:
///   {"classes": [...], "select": ["class.attr"],
///    "constraints": [{"path", "op", "value"}],
///    "joins": [{"from", "label", "to"}]}
nlohmann::json to_service_document(const QueryGraph& q, const SchemaGraph& g);
std::string to_service_query(const QueryGraph& q, const SchemaGraph& g);

/// Inverse of to_service_document. Throws TranslationError when the
/// document is malformed or does not describe a valid graph over `g`.
QueryGraph from_service_document(const nlohmann::json& doc, const SchemaGraph& g);

std::string translate(const QueryGraph& q, const SchemaGraph& g, Dialect dialect);

}  // namespace nlq
