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

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "nlq/dataset.hpp"
#include "support.hpp"

namespace nlq {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("nlq_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<CorpusRecord> bucketed(const std::vector<std::size_t>& sizes) {
  std::vector<CorpusRecord> out;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (std::size_t i = 0; i < sizes[b]; ++i) {
      out.push_back({"q " + std::to_string(b) + " " + std::to_string(i), "t", b + 1});
    }
  }
  return out;
}

TEST(Materialize, DeterministicAndAligned) {
  GenParams p;
  p.n_queries = 30;
  p.seed = 4;
  const auto& g = testing::graph_tier();
  const auto entries = generate_corpus(g, p);
  const auto a = materialize_corpus(entries, g, 4);
  EXPECT_EQ(a, materialize_corpus(entries, g, 4));
  ASSERT_EQ(a.size(), entries.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].target, serialize_target(entries[i].graph, g));
    EXPECT_EQ(a[i].class_count, entries[i].class_count);
    const auto parsed = parse_target(a[i].target, g);
    ASSERT_TRUE(parsed.ok());
    EXPECT_TRUE(query_graph_equal(*parsed.graph, entries[i].graph));
  }
}

TEST(SplitDataset, ProportionsAndHoldout) {
  const auto pc = split_dataset(bucketed({400, 400, 200}), 1);
  EXPECT_EQ(pc.count(Split::Train), 600u);
  EXPECT_EQ(pc.count(Split::Validation), 200u);
  EXPECT_EQ(pc.count(Split::Test), 200u);
  for (std::size_t i = 0; i < pc.records.size(); ++i) {
    if (pc.records[i].class_count == 3) EXPECT_EQ(pc.splits[i], Split::Test);
  }
}

TEST(SplitDataset, PartialHoldoutFillsTestFromRest) {
  const auto pc = split_dataset(bucketed({450, 450, 100}), 2);
  EXPECT_EQ(pc.count(Split::Test), 200u);
  std::map<std::size_t, std::size_t> test_nc;
  for (std::size_t i : pc.indices(Split::Test)) ++test_nc[pc.records[i].class_count];
  EXPECT_EQ(test_nc[3], 100u);
  EXPECT_EQ(test_nc[1] + test_nc[2], 100u);
  for (std::size_t i : pc.indices(Split::Train)) EXPECT_NE(pc.records[i].class_count, 3u);
  for (std::size_t i : pc.indices(Split::Validation)) EXPECT_NE(pc.records[i].class_count, 3u);
}

TEST(SplitDataset, OversizedHoldoutThrows) {
  EXPECT_THROW(split_dataset(bucketed({100, 100, 100}), 3), DatasetError);
}

TEST(SplitDataset, SingleBucketIsShuffled) {
  const auto pc = split_dataset(bucketed({100}), 4);
  EXPECT_EQ(pc.count(Split::Test), 20u);
  EXPECT_EQ(pc.count(Split::Validation), 20u);
  EXPECT_EQ(pc.count(Split::Train), 60u);
}

TEST(SplitDataset, DeterministicForSeed) {
  const auto a = split_dataset(bucketed({450, 450, 100}), 5);
  const auto b = split_dataset(bucketed({450, 450, 100}), 5);
  const auto c = split_dataset(bucketed({450, 450, 100}), 6);
  EXPECT_EQ(a.splits, b.splits);
  EXPECT_NE(a.splits, c.splits);
}

TEST(ParallelFiles, RoundTrip) {
  const auto dir = scratch_dir("parallel");
  const auto pc = split_dataset(bucketed({45, 45, 10}), 7);
  write_parallel_files(pc, dir);
  for (const char* f : {"src-train.txt", "tgt-train.txt", "src-val.txt", "tgt-val.txt",
                        "src-test.txt", "tgt-test.txt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto back = read_parallel_files(dir);
  for (Split s : kAllSplits) EXPECT_EQ(back.records_in(s), pc.records_in(s));

  std::ofstream(dir / "tgt-val.txt", std::ios::app) << "extra\n";
  EXPECT_THROW(read_parallel_files(dir), DatasetError);
  fs::remove_all(dir);
}

TEST(CorpusTsv, RoundTripAndErrors) {
  const auto dir = scratch_dir("tsv");
  const auto records = bucketed({3, 2});
  write_corpus_tsv(records, dir / "c.tsv");
  EXPECT_EQ(read_corpus_tsv(dir / "c.tsv"), records);
  std::ofstream(dir / "bad.tsv") << "1\ta\tb\nx\ty\n";
  try {
    read_corpus_tsv(dir / "bad.tsv");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(write_corpus_tsv({{"a\tb", "t", 1}}, dir / "x.tsv"), DatasetError);
  fs::remove_all(dir);
}

// Oracle: overlap by parsing targets into query graphs and comparing the
// class set and reported pair set directly.
std::map<std::size_t, double> overlap_oracle(const ParallelCorpus& pc, const SchemaGraph& g) {
  using Key = std::pair<std::set<std::string>, std::set<AttributeRef>>;
  auto key = [&](const std::string& t) {
    const auto q = *parse_target(t, g).graph;
    Key k;
    for (const auto& c : q.mentioned_classes()) k.first.insert(c);
    k.second.insert(q.reported.begin(), q.reported.end());
    return k;
  };
  std::vector<Key> train;
  for (std::size_t i : pc.indices(Split::Train)) train.push_back(key(pc.records[i].target));
  std::map<std::size_t, std::pair<double, double>> acc;
  for (std::size_t i : pc.indices(Split::Test)) {
    const auto k = key(pc.records[i].target);
    auto& a = acc[pc.records[i].class_count];
    a.second += 1;
    if (std::find(train.begin(), train.end(), k) != train.end()) a.first += 1;
  }
  std::map<std::size_t, double> out;
  for (const auto& [nc, a] : acc) out[nc] = a.first / a.second;
  return out;
}

TEST(OverlapAnalysis, MatchesOracle) {
  const auto& g = testing::graph_tier();
  GenParams p;
  p.n_queries = 600;
  p.cap_share = 0.1;
  p.seed = 8;
  const auto pc = split_dataset(materialize_corpus(generate_corpus(g, p), g, 8), 8);
  const auto got = overlap_analysis(pc);
  const auto want = overlap_oracle(pc, g);
  ASSERT_EQ(got.size(), want.size());
  for (const auto& [nc, v] : want) EXPECT_DOUBLE_EQ(got.at(nc), v) << nc;
  EXPECT_EQ(got.at(3), 0.0);  // held out: no three-class query is in train
}

TEST(OverlapAnalysis, HandBuilt) {
  ParallelCorpus pc;
  pc.records = {{"a", "gene symbol", 1},
                {"b", "gene symbol ; gene name = x", 1},
                {"c", "gene name", 1},
                {"d", "gene symbol ; organism name", 2}};
  pc.splits = {Split::Train, Split::Test, Split::Test, Split::Test};
  const auto got = overlap_analysis(pc);
  EXPECT_DOUBLE_EQ(got.at(1), 0.5);
  EXPECT_DOUBLE_EQ(got.at(2), 0.0);
}

}  // namespace
}  // namespace nlq
