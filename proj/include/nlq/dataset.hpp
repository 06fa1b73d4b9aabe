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
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlq/nl_gen.hpp"
#include "nlq/query_gen.hpp"

namespace nlq {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One aligned example: tokenized English and its target sequence.
struct CorpusRecord {
  std::string source;
  std::string target;
  std::size_t class_count = 0;

  bool operator==(const CorpusRecord&) const = default;
};

enum class Split { Train, Validation, Test };

inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Validation,
                                                    Split::Test};

/// File-name stem of a split: train, val, test.
std::string_view split_name(Split split);

struct ParallelCorpus {
  std::vector<CorpusRecord> records;
  std::vector<Split> splits;  ///< parallel to records

  std::vector<std::size_t> indices(Split split) const;
  std::vector<CorpusRecord> records_in(Split split) const;
  std::size_t count(Split split) const;
};

/// Renders every generated query into English (one sampled style per query,
/// seeded by (seed, index)) and pairs it with its target sequence.
std::vector<CorpusRecord> materialize_corpus(const std::vector<CorpusEntry>& entries,
                                             const SchemaGraph& g, std::uint64_t seed,
                                             const SynonymTable& table =
                                                 SynonymTable::bundled());

/// 60/20/20 split. When the records span more than one class count, every
/// record with the largest class count goes to test first; the rest are
/// shuffled with `seed` and fill test, validation and train in that order.
/// Throws DatasetError if the held-out bucket exceeds the test quota.
ParallelCorpus split_dataset(std::vector<CorpusRecord> records, std::uint64_t seed);

/// Writes src-{train,val,test}.txt and tgt-{train,val,test}.txt (one record
/// per line, aligned), plus nc-{train,val,test}.txt with class counts.
void write_parallel_files(const ParallelCorpus& corpus,
                          const std::filesystem::path& dir);

/// Reads a directory written by write_parallel_files. Missing nc files give
/// class_count 0.
ParallelCorpus read_parallel_files(const std::filesystem::path& dir);

/// Tab-separated `class_count<TAB>source<TAB>target` lines.
void write_corpus_tsv(const std::vector<CorpusRecord>& records,
                      const std::filesystem::path& path);
std::vector<CorpusRecord> read_corpus_tsv(const std::filesystem::path& path);

/// Fraction of test records, per class count, whose (class set, reported
/// pair set) signature also occurs among training records. Constraints are
/// ignored.
std::map<std::size_t, double> overlap_analysis(const ParallelCorpus& corpus);

}  // namespace nlq
