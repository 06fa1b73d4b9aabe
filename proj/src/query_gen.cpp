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

#include "nlq/query_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "embedded_data.hpp"
#include "nlq/text.hpp"

namespace nlq {

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (std::uint64_t p : path) h = mix(h ^ mix(p + 0x632be59bd9b4e019ULL));
  return h;
}

std::string_view to_string(ValueMode mode) {
  return mode == ValueMode::Placeholder ? "placeholder" : "sampled";
}

std::optional<ValueMode> parse_value_mode(std::string_view text) {
  const auto lower = to_lower(text);
  if (lower == "placeholder") return ValueMode::Placeholder;
  if (lower == "sampled") return ValueMode::Sampled;
  return std::nullopt;
}

void GenParams::validate() const {
  auto check_prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw GenParamsError(fmt::format("{} must be in [0, 1], got {}", name, v));
    }
  };
  check_prob(attribute_choice_probability, "attribute_choice_probability");
  check_prob(constraint_choice_probability, "constraint_choice_probability");
  check_prob(graph_traversal_probability, "graph_traversal_probability");
  if (cap_classes < 1) throw GenParamsError("cap_classes must be >= 1");
  double total = 0;
  for (double w : op_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw GenParamsError("op_weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0)) throw GenParamsError("op_weights must sum to a positive value");
  if (n_queries < 1) throw GenParamsError("n_queries must be positive");
  if (cap_share && !(*cap_share > 0.0 && *cap_share < 1.0)) {
    throw GenParamsError("cap_share must be in (0, 1)");
  }
}

std::size_t default_cap_for_schema(std::size_t class_count) {
  if (class_count <= 5) return 3;
  if (class_count <= 8) return 4;
  return 5;
}

const std::vector<std::string>& bundled_lexicon() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> out;
    for (auto& line : split(embedded::kLexicon, '\n')) {
      auto word = trim(line);
      if (!word.empty() && word.front() != '#') out.emplace_back(word);
    }
    return out;
  }();
  return words;
}

ValueSampler::ValueSampler() : lexicon_(bundled_lexicon()) {}

const ValueSampler& ValueSampler::bundled() {
  static const ValueSampler sampler;
  return sampler;
}

ValueSampler::ValueSampler(std::vector<std::string> lexicon)
    : lexicon_(std::move(lexicon)) {
  for (auto& w : lexicon_) {
    // multi-word entries become a single token
    w = join(split_whitespace(to_lower(w)), "_");
  }
  std::erase_if(lexicon_, [](const std::string& w) { return w.empty(); });
  if (lexicon_.empty()) throw std::invalid_argument("value lexicon is empty");
}

std::string ValueSampler::sample(ValueKind kind, Rng& rng) const {
  switch (kind) {
    case ValueKind::Integer:
      return std::to_string(std::uniform_int_distribution<int>(0, 10000)(rng));
    case ValueKind::Real: {
      const int cents = std::uniform_int_distribution<int>(0, 1000000)(rng);
      return fmt::format("{}.{:02d}", cents / 100, cents % 100);
    }
    case ValueKind::Boolean:
      return std::bernoulli_distribution(0.5)(rng) ? "true" : "false";
    case ValueKind::Text:
      break;
  }
  std::uniform_int_distribution<std::size_t> pick(0, lexicon_.size() - 1);
  return lexicon_[pick(rng)];
}

namespace {

void add_class_payload(const ClassDef& cls, const GenParams& p,
                       const ValueSampler& values, Rng& rng, QueryGraph& q) {
  std::bernoulli_distribution report(p.attribute_choice_probability);
  std::bernoulli_distribution constrain(p.constraint_choice_probability);
  std::discrete_distribution<int> pick_op(p.op_weights.begin(), p.op_weights.end());
  for (const auto& attr : cls.attributes) {
    if (report(rng)) q.reported.push_back({cls.name, attr.name});
    if (constrain(rng)) {
      const auto op = kAllConstraintOps[static_cast<std::size_t>(pick_op(rng))];
      std::string value = p.value_mode == ValueMode::Placeholder
                              ? std::string(kValuePlaceholder)
                              : values.sample(attr.kind, rng);
      q.constraints.push_back({cls.name, attr.name, {op, std::move(value)}});
    }
  }
}

}  // namespace

GeneratedQuery generate_query_traced(const SchemaGraph& g, const GenParams& p,
                                     Rng& rng, const ValueSampler& values) {
  GeneratedQuery out;
  QueryGraph& q = out.graph;
  auto& visits = out.trace.visits;

  const std::size_t start =
      std::uniform_int_distribution<std::size_t>(0, g.class_count() - 1)(rng);
  visits.push_back(start);
  q.classes.push_back(g.class_at(start).name);
  add_class_payload(g.class_at(start), p, values, rng, q);

  std::bernoulli_distribution traverse(p.graph_traversal_probability);
  while (visits.size() < p.cap_classes) {
    if (!traverse(rng)) break;
    std::vector<std::size_t> fresh;
    for (std::size_t v : visits) {
      for (std::size_t n : g.neighbors(v)) {
        if (std::find(visits.begin(), visits.end(), n) == visits.end()) {
          fresh.push_back(n);
        }
      }
    }
    std::sort(fresh.begin(), fresh.end(), [&](std::size_t a, std::size_t b) {
      return g.class_at(a).name < g.class_at(b).name;
    });
    fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());
    if (fresh.empty()) break;
    const std::size_t next =
        fresh[std::uniform_int_distribution<std::size_t>(0, fresh.size() - 1)(rng)];
    // enter through the earliest visited class adjacent to `next`
    for (std::size_t v : visits) {
      const auto& nb = g.neighbors(v);
      if (std::find(nb.begin(), nb.end(), next) != nb.end()) {
        q.tree_edges.push_back(
            *g.relationship_between(g.class_at(v).name, g.class_at(next).name));
        break;
      }
    }
    visits.push_back(next);
    q.classes.push_back(g.class_at(next).name);
    add_class_payload(g.class_at(next), p, values, rng, q);
  }

  if (q.reported.empty() && q.constraints.empty()) {
    const ClassDef& cls = g.class_at(start);
    const std::size_t a =
        std::uniform_int_distribution<std::size_t>(0, cls.attributes.size() - 1)(rng);
    q.reported.push_back({cls.name, cls.attributes[a].name});
    out.trace.repaired = true;
  }
  return out;
}

QueryGraph generate_query(const SchemaGraph& g, const GenParams& p, Rng& rng,
                          const ValueSampler& values) {
  return generate_query_traced(g, p, rng, values).graph;
}

std::vector<std::size_t> bucket_sizes(const GenParams& p) {
  p.validate();
  const std::size_t cap = p.cap_classes;
  std::vector<std::size_t> sizes(cap, 0);
  if (!p.cap_share || cap == 1) {
    if (p.n_queries % cap != 0) {
      throw GenParamsError(fmt::format(
          "n_queries ({}) must be divisible by cap_classes ({})", p.n_queries, cap));
    }
    std::fill(sizes.begin(), sizes.end(), p.n_queries / cap);
    return sizes;
  }
  const auto capped = static_cast<std::size_t>(
      std::llround(*p.cap_share * static_cast<double>(p.n_queries)));
  const std::size_t rest = p.n_queries - capped;
  for (std::size_t i = 0; i + 1 < cap; ++i) {
    sizes[i] = rest / (cap - 1) + (i < rest % (cap - 1) ? 1 : 0);
  }
  sizes[cap - 1] = capped;
  return sizes;
}

std::size_t longest_walk(const SchemaGraph& g, std::size_t limit) {
  // Frontier walks on a connected schema can always reach every class.
  return std::min(limit, g.class_count());
}

std::vector<CorpusEntry> generate_corpus(const SchemaGraph& g, const GenParams& p,
                                         const ValueSampler& values) {
  const auto sizes = bucket_sizes(p);
  if (longest_walk(g, p.cap_classes) < p.cap_classes) {
    throw GenParamsError(fmt::format(
        "schema has {} classes; queries with {} classes are unreachable",
        g.class_count(), p.cap_classes));
  }
  if (p.cap_classes > 1 && p.graph_traversal_probability <= 0.0) {
    throw GenParamsError("graph_traversal_probability is 0; multi-class buckets "
                         "cannot be filled");
  }

  std::vector<CorpusEntry> corpus;
  corpus.reserve(p.n_queries);
  for (std::size_t nc = 1; nc <= p.cap_classes; ++nc) {
    const std::size_t want = sizes[nc - 1];
    const std::size_t max_attempts = 100000 + 10000 * want;
    std::size_t got = 0;
    for (std::size_t attempt = 0; got < want; ++attempt) {
      if (attempt >= max_attempts) {
        throw GenParamsError(fmt::format(
            "could not fill the {}-class bucket after {} draws", nc, attempt));
      }
      Rng rng(derive_seed(p.seed, {nc, attempt}));
      QueryGraph q = generate_query(g, p, rng, values);
      if (q.class_count() != nc) continue;
      corpus.push_back({std::move(q), nc});
      ++got;
    }
  }
  return corpus;
}

}  // namespace nlq
