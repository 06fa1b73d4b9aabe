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

#include <cmath>
#include <map>
#include <set>

#include "nlq/nl_gen.hpp"
#include "nlq/text.hpp"
#include "support.hpp"

namespace nlq {
namespace {

QueryGraph publication_query() {
  QueryGraph q;
  q.classes = {"publication"};
  q.reported = {{"publication", "abstracttext"}, {"publication", "pages"}, {"publication", "issue"}};
  q.constraints = {{"publication", "title", {ConstraintOp::Lt, "@value"}}};
  return q;
}

TEST(RenderEnglish, PerClassSample) {
  QueryGraph q;
  q.classes = {"hpoevidence"};
  q.reported = {{"hpoevidence", "assignedby"}};
  EXPECT_EQ(render_english(q, TemplateStyle::PerClass, {"show", "in", "with", {"hpoevidence"}, {}}),
            "show assignedby in hpoevidence");
}

TEST(RenderEnglish, ClassAttrConstrSample) {
  EXPECT_EQ(render_english(publication_query(), TemplateStyle::ClassAttrConstr,
                           {"give", "from", "with", {"publication"}, {"lower than"}}),
            "from publication, give abstracttext, pages, issue with title lower than @value");
}

TEST(RenderEnglish, AttrConstrClassSample) {
  QueryGraph q;
  q.classes = {"cds"};
  q.reported = {{"cds", "primaryidentifier"}};
  q.constraints = {{"cds", "secondaryidentifier", {ConstraintOp::Geq, "@value"}}};
  EXPECT_EQ(render_english(q, TemplateStyle::AttrConstrClass,
                           {"what is", "from", "having", {"cds"}, {">="}}),
            "what is primaryidentifier having secondaryidentifier >= @value from cds");
}

TEST(SynonymTable, BundledIsConsistent) {
  const auto& t = SynonymTable::bundled();
  for (auto op : kAllConstraintOps) {
    ASSERT_GE(t.surfaces(op).size(), 2u);
    EXPECT_EQ(t.surfaces(op).front(), op_token(op));
    for (const auto& s : t.surfaces(op)) EXPECT_EQ(t.op_for_surface(s), op) << s;
  }
  EXPECT_EQ(t.surfaces(ConstraintOp::Lt)[1], "lower than");
}

TEST(SynonymTable, ParseErrors) {
  EXPECT_THROW(SynonymTable::parse("[verbs]\nshow\n[bogus]\nx\n"), SynonymError);
  EXPECT_THROW(SynonymTable::parse("show\n"), SynonymError);
  const std::string text = read_text_file(testing::data_dir() / "synonyms.txt");
  EXPECT_NO_THROW(SynonymTable::parse(text));
  // A surface shared between two operators is ambiguous.
  EXPECT_THROW(SynonymTable::parse(text + "\n[NEQ]\nis\n"), SynonymError);
}

TEST(SampleRendering, StylesAreUniform) {
  Rng rng(10);
  std::map<TemplateStyle, int> counts;
  for (int i = 0; i < 6000; ++i) ++counts[sample_style(rng)];
  const double sigma = std::sqrt(6000.0 * (1.0 / 6) * (5.0 / 6));
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [style, n] : counts) EXPECT_NEAR(n, 1000.0, 3 * sigma) << to_string(style);
}

TEST(SampleRendering, DeterministicAndComposed) {
  const auto& g = testing::graph_tier();
  GenParams p;
  Rng gen(11);
  for (int i = 0; i < 200; ++i) {
    const auto q = generate_query(g, p, gen);
    Rng a(i), b(i), c(i);
    const auto s = sample_rendering(q, a);
    EXPECT_EQ(s, sample_rendering(q, b));
    const auto style = sample_style(c);
    EXPECT_EQ(s, render_english(q, style, c));
  }
}

// Every mentioned class, reported attribute and constraint value appears;
// mapping surfaces back to operators recovers the constraint operators.
TEST(SampleRendering, CoverageAndSurfaceBijection) {
  const auto& g = testing::relational_tier();
  const auto& table = SynonymTable::bundled();
  GenParams p;
  p.constraint_choice_probability = 0.2;
  p.cap_classes = 4;
  Rng gen(12);
  for (int i = 0; i < 500; ++i) {
    const auto q = generate_query(g, p, gen);
    const auto sentence = sample_rendering(q, gen);
    const auto tokens = tokenize_sentence(sentence);
    const std::string padded = " " + join(tokens, " ") + " ";
    auto has = [&](const std::string& w) { return padded.find(" " + w + " ") != std::string::npos; };
    for (const auto& c : q.mentioned_classes()) EXPECT_TRUE(has(c)) << c << " | " << sentence;
    for (const auto& r : q.reported) EXPECT_TRUE(has(r.attr)) << r.attr << " | " << sentence;
    EXPECT_EQ(sentence.find(" ; "), std::string::npos);
    std::multiset<ConstraintOp> want, got;
    for (const auto& t : q.constraints) {
      want.insert(t.constraint.op);
      // The surface sits between the attribute and the value.
      const std::string prefix = " " + t.attr + " ";
      const std::string suffix = " " + t.constraint.value + " ";
      std::size_t pos = 0;
      bool found = false;
      while (!found && (pos = padded.find(prefix, pos)) != std::string::npos) {
        const auto start = pos + prefix.size();
        const auto end = padded.find(suffix, start);
        if (end != std::string::npos) {
          if (auto op = table.op_for_surface(padded.substr(start, end - start))) {
            got.insert(*op);
            found = true;
          }
        }
        ++pos;
      }
      EXPECT_TRUE(found) << sentence;
    }
    EXPECT_EQ(want, got) << sentence;
  }
}

TEST(Paraphrase, DeterministicPerClass) {
  QueryGraph q;
  q.classes = {"gene"};
  q.reported = {{"gene", "symbol"}};
  EXPECT_EQ(paraphrase(q), "show symbol in gene");
  EXPECT_EQ(paraphrase(publication_query()), paraphrase(publication_query()));
  const auto text = paraphrase(publication_query());
  for (const auto& r : publication_query().reported) {
    EXPECT_NE(text.find(r.attr), std::string::npos);
  }
}

}  // namespace
}  // namespace nlq
