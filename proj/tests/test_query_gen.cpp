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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "nlq/query_gen.hpp"
#include "nlq/text.hpp"
#include "support.hpp"

namespace nlq {
namespace {

TEST(GenerateQuery, DegenerateProbabilitiesReportEverything) {
  const auto g = SchemaGraph::build(
      {{"t", {{"a", ValueKind::Text}, {"b", ValueKind::Integer}, {"c", ValueKind::Real}}, 0}}, {});
  GenParams p;
  p.attribute_choice_probability = 1.0;
  p.constraint_choice_probability = 0.0;
  p.graph_traversal_probability = 0.0;
  p.cap_classes = 1;
  Rng rng(1);
  const auto q = generate_query(g, p, rng);
  EXPECT_EQ(q.reported, (std::vector<AttributeRef>{{"t", "a"}, {"t", "b"}, {"t", "c"}}));
  EXPECT_TRUE(q.constraints.empty());
}

TEST(GenerateQuery, CapOneGivesSingleClass) {
  GenParams p;
  p.cap_classes = 1;
  p.graph_traversal_probability = 1.0;
  Rng rng(2);
  for (int i = 0; i < 300; ++i) EXPECT_EQ(generate_query(testing::graph_tier(), p, rng).class_count(), 1u);
}

TEST(GenerateQuery, TraversalExtremes) {
  GenParams p;
  p.cap_classes = 4;
  Rng rng(3);
  p.graph_traversal_probability = 0.0;
  for (int i = 0; i < 200; ++i) EXPECT_EQ(generate_query(testing::relational_tier(), p, rng).class_count(), 1u);
  p.graph_traversal_probability = 1.0;
  for (int i = 0; i < 200; ++i) EXPECT_EQ(generate_query(testing::relational_tier(), p, rng).class_count(), 4u);
}

TEST(GenerateQuery, AlwaysValid) {
  for (const SchemaGraph* g : {&testing::graph_tier(), &testing::relational_tier(),
                               &testing::warehouse_tier()}) {
    GenParams p;
    p.cap_classes = 5;
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      const auto q = generate_query(*g, p, rng);
      const auto err = validate_query_graph(q, *g);
      ASSERT_FALSE(err.has_value()) << *err;
      EXPECT_LE(q.class_count(), 5u);
      EXPECT_FALSE(q.reported.empty() && q.constraints.empty());
    }
  }
}

TEST(GenerateQuery, OperatorWeightsAndValueModes) {
  GenParams p;
  p.constraint_choice_probability = 1.0;
  p.op_weights = {0, 0, 0, 0, 0, 1};
  p.value_mode = ValueMode::Placeholder;
  Rng rng(5);
  const auto q = generate_query(testing::graph_tier(), p, rng);
  ASSERT_FALSE(q.constraints.empty());
  for (const auto& t : q.constraints) {
    EXPECT_EQ(t.constraint.op, ConstraintOp::Geq);
    EXPECT_EQ(t.constraint.value, kValuePlaceholder);
  }
}

TEST(ValueSampler, KindAppropriateValues) {
  const auto& s = ValueSampler::bundled();
  EXPECT_EQ(s.lexicon().size(), 500u);
  Rng rng(6);
  for (int i = 0; i < 2000; ++i) {
    const auto iv = s.sample(ValueKind::Integer, rng);
    const long n = std::stol(iv);
    EXPECT_TRUE(n >= 0 && n <= 10000) << iv;
    const auto rv = s.sample(ValueKind::Real, rng);
    ASSERT_GE(rv.size(), 4u);
    EXPECT_EQ(rv[rv.size() - 3], '.') << rv;
    EXPECT_TRUE(is_number(rv));
    const auto bv = s.sample(ValueKind::Boolean, rng);
    EXPECT_TRUE(bv == "true" || bv == "false");
    const auto tv = s.sample(ValueKind::Text, rng);
    EXPECT_NE(std::find(s.lexicon().begin(), s.lexicon().end(), tv), s.lexicon().end());
    EXPECT_EQ(split_whitespace(tv).size(), 1u);
  }
}

// Per-class reporting rate against the binomial expectation: each visit of a
// class with m attributes is m Bernoulli(p) trials. Repaired walks add one
// forced attribute, which is removed before counting.
TEST(GenerateQuery, ReportRateMatchesBinomial) {
  const auto& g = testing::graph_tier();
  GenParams p;
  Rng rng(7);
  std::map<std::string, std::pair<double, double>> per_class;  // reported, trials
  for (int i = 0; i < 20000; ++i) {
    const auto gen = generate_query_traced(g, p, rng);
    for (std::size_t ci : gen.trace.visits) {
      const auto& cls = g.class_at(ci);
      per_class[cls.name].second += static_cast<double>(cls.attributes.size());
    }
    for (const auto& r : gen.graph.reported) per_class[r.cls].first += 1;
    if (gen.trace.repaired) per_class[gen.graph.classes.front()].first -= 1;
  }
  for (const auto& [cls, rt] : per_class) {
    const double rate = rt.first / rt.second;
    const double sigma = std::sqrt(0.25 * 0.75 / rt.second);
    EXPECT_NEAR(rate, 0.25, 3 * sigma) << cls;
  }
}

TEST(GenerateCorpus, BucketsAreExact) {
  GenParams p;
  p.n_queries = 1000;
  p.cap_classes = 5;
  const auto corpus = generate_corpus(testing::graph_tier(), p);
  std::map<std::size_t, std::size_t> counts;
  for (const auto& e : corpus) {
    ++counts[e.class_count];
    EXPECT_EQ(e.graph.class_count(), e.class_count);
  }
  EXPECT_EQ(counts, (std::map<std::size_t, std::size_t>{{1, 200}, {2, 200}, {3, 200}, {4, 200}, {5, 200}}));
}

TEST(GenerateCorpus, HundredThousandInFiveBuckets) {
  GenParams p;
  p.n_queries = 100000;
  p.cap_classes = 5;
  EXPECT_EQ(bucket_sizes(p), (std::vector<std::size_t>{20000, 20000, 20000, 20000, 20000}));
}

TEST(GenerateCorpus, CapShareBuckets) {
  GenParams p;
  p.n_queries = 5000;
  p.cap_classes = 3;
  p.cap_share = 0.1;
  EXPECT_EQ(bucket_sizes(p), (std::vector<std::size_t>{2250, 2250, 500}));
}

TEST(GenerateCorpus, DeterministicForSeed) {
  GenParams p;
  p.n_queries = 10;
  p.cap_classes = 5;
  p.seed = 99;
  const auto a = generate_corpus(testing::graph_tier(), p);
  const auto b = generate_corpus(testing::graph_tier(), p);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(serialize_target(a[i].graph, testing::graph_tier()),
              serialize_target(b[i].graph, testing::graph_tier()));
  }
}

TEST(GenerateCorpus, Errors) {
  GenParams p;
  p.n_queries = 9;
  p.cap_classes = 5;
  EXPECT_THROW(generate_corpus(testing::graph_tier(), p), GenParamsError);
  p.n_queries = 30;
  p.cap_classes = 3;
  EXPECT_THROW(generate_corpus(testing::small_schema(2, {{0, 1}}), p), GenParamsError);
  p.graph_traversal_probability = 0.0;
  EXPECT_THROW(generate_corpus(testing::graph_tier(), p), GenParamsError);
  p.graph_traversal_probability = 1.5;
  EXPECT_THROW(p.validate(), GenParamsError);
}

TEST(DeriveSeed, StreamsDiffer) {
  EXPECT_NE(derive_seed(1, {0, 1}), derive_seed(1, {1, 0}));
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_EQ(default_cap_for_schema(5), 3u);
  EXPECT_EQ(default_cap_for_schema(8), 4u);
  EXPECT_EQ(default_cap_for_schema(60), 5u);
}

}  // namespace
}  // namespace nlq
