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

// Shared fixtures and independent oracles for the test suites.

#pragma once

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "nlq/schema.hpp"

namespace nlq::testing {

inline std::filesystem::path data_dir() { return NLQ_DATA_DIR; }

inline const SchemaGraph& graph_tier() {
  static const SchemaGraph g = load_schema_file(data_dir() / "graph_tier.json");
  return g;
}

inline const SchemaGraph& relational_tier() {
  static const SchemaGraph g = load_schema_file(data_dir() / "relational_tier.json");
  return g;
}

inline const SchemaGraph& warehouse_tier() {
  static const SchemaGraph g = load_schema_file(data_dir() / "warehouse_tier.json");
  return g;
}

/// Builds a schema whose classes are named c0..c{n-1}, each with attributes
/// `id` and `name`, and one relationship per (a, b) edge.
inline SchemaGraph small_schema(std::size_t n,
                                const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<ClassDef> classes;
  for (std::size_t i = 0; i < n; ++i) {
    classes.push_back({"c" + std::to_string(i),
                       {{"id", ValueKind::Integer}, {"name", ValueKind::Text}}, 0});
  }
  std::vector<Relationship> rels;
  for (auto [a, b] : edges) {
    rels.push_back({"c" + std::to_string(a), "c" + std::to_string(b),
                    "e" + std::to_string(a) + "_" + std::to_string(b), "id", "id"});
  }
  return SchemaGraph::build(std::move(classes), std::move(rels));
}

/// Plain BFS over class indices.
inline std::set<std::size_t> reachable(const SchemaGraph& g, const std::set<std::size_t>& within,
                                       std::size_t start) {
  std::set<std::size_t> seen{start};
  std::vector<std::size_t> stack{start};
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (const auto& r : g.relationships()) {
      const auto a = *g.class_index(r.from_class), b = *g.class_index(r.to_class);
      for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        if (x == u && within.count(y) && !seen.count(y)) {
          seen.insert(y);
          stack.push_back(y);
        }
      }
    }
  }
  return seen;
}

/// Brute force: fewest edges of a connected subgraph containing `terminals`,
/// i.e. the smallest connected vertex superset minus one.
inline std::size_t brute_force_steiner_edges(const SchemaGraph& g,
                                             const std::set<std::size_t>& terminals) {
  const std::size_t n = g.class_count();
  std::size_t best = n;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1ULL) s.insert(i);
    }
    if (!std::includes(s.begin(), s.end(), terminals.begin(), terminals.end())) continue;
    if (s.size() - 1 >= best) continue;
    if (reachable(g, s, *s.begin()).size() == s.size()) best = s.size() - 1;
  }
  return best;
}

}  // namespace nlq::testing
