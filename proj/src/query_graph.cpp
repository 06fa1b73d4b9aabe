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

#include "nlq/query_graph.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "nlq/text.hpp"

namespace nlq {

std::string_view op_token(ConstraintOp op) {
  switch (op) {
    case ConstraintOp::Eq:
      return "=";
    case ConstraintOp::Neq:
      return "!=";
    case ConstraintOp::Lt:
      return "<";
    case ConstraintOp::Leq:
      return "<=";
    case ConstraintOp::Gt:
      return ">";
    case ConstraintOp::Geq:
      return ">=";
  }
  return "=";
}

std::optional<ConstraintOp> parse_op_token(std::string_view token) {
  for (auto op : kAllConstraintOps) {
    if (op_token(op) == token) return op;
  }
  return std::nullopt;
}

std::string_view op_name(ConstraintOp op) {
  switch (op) {
    case ConstraintOp::Eq:
      return "EQ";
    case ConstraintOp::Neq:
      return "NEQ";
    case ConstraintOp::Lt:
      return "LT";
    case ConstraintOp::Leq:
      return "LEQ";
    case ConstraintOp::Gt:
      return "GT";
    case ConstraintOp::Geq:
      return "GEQ";
  }
  return "EQ";
}

std::optional<ConstraintOp> parse_op_name(std::string_view name) {
  const std::string upper = to_upper(name);
  for (auto op : kAllConstraintOps) {
    if (op_name(op) == upper) return op;
  }
  return std::nullopt;
}

std::vector<std::string> QueryGraph::mentioned_classes() const {
  std::vector<std::string> out;
  for (const auto& cls : classes) {
    const bool used =
        std::any_of(reported.begin(), reported.end(),
                    [&](const AttributeRef& p) { return p.cls == cls; }) ||
        std::any_of(constraints.begin(), constraints.end(),
                    [&](const ConstraintTriple& t) { return t.cls == cls; });
    if (used) out.push_back(cls);
  }
  return out;
}

bool QueryGraph::has_class(std::string_view cls) const {
  return std::find(classes.begin(), classes.end(), cls) != classes.end();
}

std::optional<std::string> validate_query_graph(const QueryGraph& q,
                                                const SchemaGraph& g) {
  if (q.classes.empty()) return "query has no classes";
  std::set<std::string> seen;
  for (const auto& cls : q.classes) {
    if (!g.find_class(cls)) return fmt::format("unknown class '{}'", cls);
    if (!seen.insert(cls).second) return fmt::format("duplicate class '{}'", cls);
  }
  if (q.reported.empty() && q.constraints.empty()) {
    return "query has neither reported attributes nor constraints";
  }
  for (const auto& p : q.reported) {
    if (!seen.count(p.cls)) return fmt::format("pair class '{}' not in query", p.cls);
    if (!g.has_attribute(p.cls, p.attr)) {
      return fmt::format("'{}' has no attribute '{}'", p.cls, p.attr);
    }
  }
  for (const auto& t : q.constraints) {
    if (!seen.count(t.cls)) {
      return fmt::format("triple class '{}' not in query", t.cls);
    }
    if (!g.has_attribute(t.cls, t.attr)) {
      return fmt::format("'{}' has no attribute '{}'", t.cls, t.attr);
    }
    if (t.constraint.value.empty()) return "constraint value is empty";
    if (split_whitespace(t.constraint.value).size() != 1) {
      return fmt::format("constraint value '{}' contains whitespace",
                         t.constraint.value);
    }
  }
  if (q.tree_edges.size() + 1 != q.classes.size()) {
    return fmt::format("{} tree edges for {} classes", q.tree_edges.size(),
                       q.classes.size());
  }
  // Union-find over the tree edges; all classes must end up in one set
  // without ever closing a cycle.
  std::map<std::string, std::string> parent;
  for (const auto& cls : q.classes) parent[cls] = cls;
  auto find = [&](std::string x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t e : q.tree_edges) {
    if (e >= g.relationships().size()) return "tree edge out of range";
    const auto& r = g.relationships()[e];
    if (!seen.count(r.from_class) || !seen.count(r.to_class)) {
      return fmt::format("tree edge {}-{} leaves the query", r.from_class,
                         r.to_class);
    }
    auto a = find(r.from_class);
    auto b = find(r.to_class);
    if (a == b) return "tree edges contain a cycle";
    parent[a] = b;
  }
  return std::nullopt;
}

bool query_graph_equal(const QueryGraph& a, const QueryGraph& b) {
  auto pairs = [](const QueryGraph& q) {
    return std::set<AttributeRef>(q.reported.begin(), q.reported.end());
  };
  auto triples = [](const QueryGraph& q) {
    return std::set<ConstraintTriple>(q.constraints.begin(), q.constraints.end());
  };
  return pairs(a) == pairs(b) && triples(a) == triples(b);
}

std::vector<std::string> serialize_target_tokens(const QueryGraph& q,
                                                 const SchemaGraph& g) {
  std::vector<std::string> out;
  auto separate = [&] {
    if (!out.empty()) out.emplace_back(kSegmentSeparator);
  };
  for (const auto& cls : q.classes) {
    const ClassDef* def = g.find_class(cls);
    if (!def) continue;
    for (const auto& attr : def->attributes) {
      for (const auto& p : q.reported) {
        if (p.cls == cls && p.attr == attr.name) {
          separate();
          out.push_back(p.cls);
          out.push_back(p.attr);
          break;
        }
      }
    }
    for (const auto& attr : def->attributes) {
      // Several constraints on one attribute keep their relative order.
      for (const auto& t : q.constraints) {
        if (t.cls == cls && t.attr == attr.name) {
          separate();
          out.push_back(t.cls);
          out.push_back(t.attr);
          out.emplace_back(op_token(t.constraint.op));
          out.push_back(t.constraint.value);
        }
      }
    }
  }
  return out;
}

std::string serialize_target(const QueryGraph& q, const SchemaGraph& g) {
  return join(serialize_target_tokens(q, g), " ");
}

std::string TargetParseError::message() const {
  return fmt::format("segment {} '{}': {}", segment, segment_text, reason);
}

ParsedTarget parse_target(std::span<const std::string> tokens,
                          const SchemaGraph& g) {
  ParsedTarget result;
  std::vector<std::vector<std::string>> segments(1);
  for (const auto& tok : tokens) {
    if (tok == kSegmentSeparator) {
      segments.emplace_back();
    } else {
      segments.back().push_back(tok);
    }
  }

  QueryGraph q;
  std::vector<std::string> predicted;
  auto fail = [&](std::size_t index, std::string reason) {
    result.error = TargetParseError{index, join(segments[index], " "),
                                    std::move(reason)};
    return result;
  };
  auto note_class = [&](const std::string& cls) {
    if (std::find(predicted.begin(), predicted.end(), cls) == predicted.end()) {
      predicted.push_back(cls);
    }
  };

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (seg.size() != 2 && seg.size() < 4) {
      return fail(i, fmt::format("segment has {} tokens", seg.size()));
    }
    const ClassDef* cls = g.find_class(seg[0]);
    if (!cls) return fail(i, fmt::format("unknown class '{}'", seg[0]));
    if (!cls->find_attribute(seg[1])) {
      return fail(i, fmt::format("class '{}' has no attribute '{}'", seg[0], seg[1]));
    }
    if (seg.size() == 2) {
      AttributeRef pair{seg[0], seg[1]};
      if (std::find(q.reported.begin(), q.reported.end(), pair) == q.reported.end()) {
        q.reported.push_back(std::move(pair));
      }
    } else {
      auto op = parse_op_token(seg[2]);
      if (!op) return fail(i, fmt::format("invalid operator '{}'", seg[2]));
      std::vector<std::string> tail(seg.begin() + 3, seg.end());
      ConstraintTriple triple{seg[0], seg[1], {*op, join(tail, "_")}};
      if (std::find(q.constraints.begin(), q.constraints.end(), triple) ==
          q.constraints.end()) {
        q.constraints.push_back(std::move(triple));
      }
    }
    note_class(seg[0]);
  }

  ClassTree tree = connect_predicted_classes(predicted, g);
  q.classes = std::move(tree.classes);
  q.tree_edges = std::move(tree.edges);
  result.graph = std::move(q);
  return result;
}

ParsedTarget parse_target(std::string_view target, const SchemaGraph& g) {
  const auto tokens = split_whitespace(target);
  return parse_target(std::span<const std::string>(tokens), g);
}

// ---------------------------------------------------------------------------
// Connectivity repair

namespace {

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max() / 4;
constexpr std::size_t kExactTerminalLimit = 12;

struct ShortestPaths {
  // dist[s][v] and parent[s][v] for a BFS rooted at s; neighbors are
  // visited in class-name order so paths are deterministic.
  std::vector<std::vector<std::size_t>> dist;
  std::vector<std::vector<std::size_t>> parent;

  explicit ShortestPaths(const SchemaGraph& g) {
    const std::size_t n = g.class_count();
    dist.assign(n, std::vector<std::size_t>(n, kUnreachable));
    parent.assign(n, std::vector<std::size_t>(n, n));
    for (std::size_t s = 0; s < n; ++s) {
      std::deque<std::size_t> queue{s};
      dist[s][s] = 0;
      while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : g.neighbors(u)) {
          if (dist[s][v] == kUnreachable) {
            dist[s][v] = dist[s][u] + 1;
            parent[s][v] = u;
            queue.push_back(v);
          }
        }
      }
    }
  }

  void add_path(std::size_t from, std::size_t to,
                std::set<std::pair<std::size_t, std::size_t>>& edges) const {
    std::size_t v = to;
    while (v != from) {
      const std::size_t p = parent[from][v];
      edges.insert(std::minmax(v, p));
      v = p;
    }
  }
};

std::vector<std::size_t> by_name(const SchemaGraph& g) {
  std::vector<std::size_t> order(g.class_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g.class_at(a).name < g.class_at(b).name;
  });
  return order;
}

// Dreyfus-Wagner: dp[mask][v] is the cheapest tree spanning the terminals in
// `mask` plus node v. The last terminal acts as the root.
std::set<std::pair<std::size_t, std::size_t>> exact_steiner(
    const std::vector<std::size_t>& terminals, const ShortestPaths& sp,
    const std::vector<std::size_t>& order) {
  const std::size_t k = terminals.size() - 1;
  const std::size_t n = order.size();
  const std::size_t full = (std::size_t{1} << k) - 1;
  std::vector<std::vector<std::size_t>> dp(full + 1,
                                           std::vector<std::size_t>(n, kUnreachable));
  std::vector<std::vector<std::size_t>> via(full + 1, std::vector<std::size_t>(n, n));
  std::vector<std::vector<std::size_t>> split(full + 1, std::vector<std::size_t>(n, 0));

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t v = 0; v < n; ++v) dp[std::size_t{1} << i][v] = sp.dist[terminals[i]][v];
  }
  std::vector<std::size_t> merged(n);
  for (std::size_t mask = 1; mask <= full; ++mask) {
    if (std::popcount(mask) < 2) continue;
    const std::size_t low = mask & (~mask + 1);
    for (std::size_t u : order) {
      merged[u] = kUnreachable;
      for (std::size_t sub = (mask - 1) & mask; sub > 0; sub = (sub - 1) & mask) {
        if (!(sub & low)) continue;
        const std::size_t cost = dp[sub][u] + dp[mask ^ sub][u];
        if (cost < merged[u]) {
          merged[u] = cost;
          split[mask][u] = sub;
        }
      }
    }
    for (std::size_t v : order) {
      for (std::size_t u : order) {
        const std::size_t cost = merged[u] + sp.dist[u][v];
        if (cost < dp[mask][v]) {
          dp[mask][v] = cost;
          via[mask][v] = u;
        }
      }
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> edges;
  auto build = [&](auto&& self, std::size_t mask, std::size_t v) -> void {
    if (std::popcount(mask) == 1) {
      sp.add_path(terminals[std::countr_zero(mask)], v, edges);
      return;
    }
    const std::size_t u = via[mask][v];
    sp.add_path(u, v, edges);
    const std::size_t sub = split[mask][u];
    self(self, sub, u);
    self(self, mask ^ sub, u);
  };
  build(build, full, terminals.back());
  return edges;
}

// Metric-closure MST expanded into schema paths, then reduced to a spanning
// tree with non-terminal leaves pruned.
std::set<std::pair<std::size_t, std::size_t>> closure_mst(
    const std::vector<std::size_t>& terminals, const ShortestPaths& sp,
    const SchemaGraph& g) {
  std::set<std::pair<std::size_t, std::size_t>> union_edges;
  std::vector<bool> in_tree(terminals.size(), false);
  in_tree[0] = true;
  for (std::size_t added = 1; added < terminals.size(); ++added) {
    std::size_t best_a = 0, best_b = 0, best_d = kUnreachable;
    for (std::size_t a = 0; a < terminals.size(); ++a) {
      if (!in_tree[a]) continue;
      for (std::size_t b = 0; b < terminals.size(); ++b) {
        if (in_tree[b]) continue;
        const std::size_t d = sp.dist[terminals[a]][terminals[b]];
        const auto& nb = g.class_at(terminals[b]).name;
        if (d < best_d ||
            (d == best_d && nb < g.class_at(terminals[best_b]).name)) {
          best_a = a;
          best_b = b;
          best_d = d;
        }
      }
    }
    in_tree[best_b] = true;
    sp.add_path(terminals[best_a], terminals[best_b], union_edges);
  }

  std::map<std::size_t, std::set<std::size_t>> adj;
  for (auto [a, b] : union_edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::set<std::pair<std::size_t, std::size_t>> tree;
  std::set<std::size_t> visited{terminals[0]};
  std::deque<std::size_t> queue{terminals[0]};
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (visited.insert(v).second) {
        tree.insert(std::minmax(u, v));
        queue.push_back(v);
      }
    }
  }
  const std::set<std::size_t> term_set(terminals.begin(), terminals.end());
  bool pruned = true;
  while (pruned) {
    pruned = false;
    std::map<std::size_t, std::size_t> degree;
    for (auto [a, b] : tree) {
      ++degree[a];
      ++degree[b];
    }
    for (auto it = tree.begin(); it != tree.end();) {
      const bool leaf_a = degree[it->first] == 1 && !term_set.count(it->first);
      const bool leaf_b = degree[it->second] == 1 && !term_set.count(it->second);
      if (leaf_a || leaf_b) {
        it = tree.erase(it);
        pruned = true;
        break;
      }
      ++it;
    }
  }
  return tree;
}

}  // namespace

ClassTree connect_predicted_classes(std::span<const std::string> classes,
                                    const SchemaGraph& g) {
  std::vector<std::size_t> terminals;
  ClassTree out;
  for (const auto& cls : classes) {
    auto idx = g.class_index(cls);
    if (!idx) {
      throw std::invalid_argument(fmt::format("unknown class '{}'", cls));
    }
    if (std::find(terminals.begin(), terminals.end(), *idx) == terminals.end()) {
      terminals.push_back(*idx);
      out.classes.push_back(g.class_at(*idx).name);
    }
  }
  if (terminals.size() <= 1) return out;

  const ShortestPaths sp(g);
  const auto edges = terminals.size() <= kExactTerminalLimit
                         ? exact_steiner(terminals, sp, by_name(g))
                         : closure_mst(terminals, sp, g);

  // Order edges and connective classes by a BFS from the first predicted
  // class, visiting neighbors by name.
  std::map<std::size_t, std::vector<std::size_t>> adj;
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& [node, list] : adj) {
    std::sort(list.begin(), list.end(), [&](std::size_t x, std::size_t y) {
      return g.class_at(x).name < g.class_at(y).name;
    });
  }
  std::set<std::size_t> visited{terminals[0]};
  std::deque<std::size_t> queue{terminals[0]};
  const std::set<std::size_t> term_set(terminals.begin(), terminals.end());
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (!visited.insert(v).second) continue;
      const auto rel = g.relationship_between(g.class_at(u).name, g.class_at(v).name);
      out.edges.push_back(*rel);
      if (!term_set.count(v)) out.classes.push_back(g.class_at(v).name);
      queue.push_back(v);
    }
  }
  return out;
}

}  // namespace nlq
