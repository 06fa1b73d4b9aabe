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
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlq/query_graph.hpp"
#include "nlq/schema.hpp"

namespace nlq {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a list of
/// indices (SplitMix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

enum class ValueMode { Placeholder, Sampled };

std::string_view to_string(ValueMode mode);
std::optional<ValueMode> parse_value_mode(std::string_view text);

class GenParamsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters of the random-walk query generator. Defaults are the values
/// the approach was evaluated with.
struct GenParams {
  std::size_t n_queries = 1000;
  double attribute_choice_probability = 0.25;
  double constraint_choice_probability = 0.05;
  double graph_traversal_probability = 0.5;
  std::size_t cap_classes = 3;
  /// Indexed by ConstraintOp; uniform by default.
  std::array<double, 6> op_weights = {1, 1, 1, 1, 1, 1};
  ValueMode value_mode = ValueMode::Sampled;
  std::uint64_t seed = 0;
  /// When set, the cap_classes bucket holds this fraction of n_queries and
  /// the remaining queries are split evenly over the smaller class counts.
  /// Unset means equal buckets.
  std::optional<double> cap_share;

  /// Throws GenParamsError on out-of-range values.
  void validate() const;
};

/// Default class cap for a schema of the given size (3, 4 or 5 classes per
/// query for small, medium and large schemas).
std::size_t default_cap_for_schema(std::size_t class_count);

/// Draws type-appropriate constraint literals.
class ValueSampler {
 public:
  /// Uses the bundled 500-word lexicon for text values.
  ValueSampler();
  explicit ValueSampler(std::vector<std::string> lexicon);

  /// Shared sampler over the bundled lexicon.
  static const ValueSampler& bundled();

  std::string sample(ValueKind kind, Rng& rng) const;

  const std::vector<std::string>& lexicon() const { return lexicon_; }

 private:
  std::vector<std::string> lexicon_;
};

const std::vector<std::string>& bundled_lexicon();

/// Record of how a query was produced; used by statistical tests.
struct WalkTrace {
  /// Class indices in the order the walk entered them.
  std::vector<std::size_t> visits;
  /// True when the walk produced nothing and one attribute of the start
  /// class was forced into the reported set.
  bool repaired = false;
};

struct GeneratedQuery {
  QueryGraph graph;
  WalkTrace trace;
};

GeneratedQuery generate_query_traced(const SchemaGraph& g, const GenParams& p,
                                     Rng& rng,
                                     const ValueSampler& values = ValueSampler::bundled());

QueryGraph generate_query(const SchemaGraph& g, const GenParams& p, Rng& rng,
                          const ValueSampler& values = ValueSampler::bundled());

struct CorpusEntry {
  QueryGraph graph;
  std::size_t class_count = 0;
};

/// Number of queries per class count 1..cap_classes.
std::vector<std::size_t> bucket_sizes(const GenParams& p);

/// Largest class count a walk can reach on this schema, capped at `limit`.
std::size_t longest_walk(const SchemaGraph& g, std::size_t limit);

/// Class-count-normalized corpus: bucket sizes from bucket_sizes(p), filled
/// by rejection sampling. Buckets appear in ascending class-count order.
/// Deterministic in (g, p).
std::vector<CorpusEntry> generate_corpus(const SchemaGraph& g, const GenParams& p,
                                         const ValueSampler& values = ValueSampler::bundled());

}  // namespace nlq
