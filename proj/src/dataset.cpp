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

#include "nlq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "nlq/text.hpp"

namespace nlq {

namespace fs = std::filesystem;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

std::vector<std::size_t> ParallelCorpus::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

std::vector<CorpusRecord> ParallelCorpus::records_in(Split split) const {
  std::vector<CorpusRecord> out;
  for (std::size_t i : indices(split)) out.push_back(records[i]);
  return out;
}

std::size_t ParallelCorpus::count(Split split) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), split));
}

std::vector<CorpusRecord> materialize_corpus(const std::vector<CorpusEntry>& entries,
                                             const SchemaGraph& g, std::uint64_t seed,
                                             const SynonymTable& table) {
  std::vector<CorpusRecord> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Rng rng(derive_seed(seed, {0x656e676cULL, i}));
    const auto sentence = sample_rendering(entries[i].graph, rng, table);
    out.push_back({join(tokenize_sentence(sentence), " "),
                   serialize_target(entries[i].graph, g), entries[i].class_count});
  }
  return out;
}

ParallelCorpus split_dataset(std::vector<CorpusRecord> records, std::uint64_t seed) {
  const std::size_t n = records.size();
  const auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));

  std::set<std::size_t> class_counts;
  for (const auto& r : records) class_counts.insert(r.class_count);
  // A single-bucket corpus has no longer queries to hold out.
  const bool holdout = class_counts.size() > 1;
  const std::size_t longest = class_counts.empty() ? 0 : *class_counts.rbegin();

  ParallelCorpus pc;
  pc.splits.assign(n, Split::Train);
  std::vector<std::size_t> rest;
  std::size_t held = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (holdout && records[i].class_count == longest) {
      pc.splits[i] = Split::Test;
      ++held;
    } else {
      rest.push_back(i);
    }
  }
  if (held > n_test) {
    throw DatasetError(fmt::format(
        "{} records with class count {} exceed the test quota of {} (20% of {})",
        held, longest, n_test, n));
  }
  Rng rng(derive_seed(seed, {0x73706c6974ULL}));
  std::shuffle(rest.begin(), rest.end(), rng);
  const std::size_t more_test = n_test - held;
  for (std::size_t j = 0; j < rest.size(); ++j) {
    if (j < more_test) {
      pc.splits[rest[j]] = Split::Test;
    } else if (j < more_test + n_val) {
      pc.splits[rest[j]] = Split::Validation;
    } else {
      pc.splits[rest[j]] = Split::Train;
    }
  }
  pc.records = std::move(records);
  return pc;
}

namespace {

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw DatasetError(fmt::format("error writing '{}'", path.string()));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void check_single_line(const std::string& s) {
  if (s.find('\n') != std::string::npos || s.find('\t') != std::string::npos) {
    throw DatasetError("corpus text must not contain tabs or newlines");
  }
}

}  // namespace

void write_parallel_files(const ParallelCorpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DatasetError(fmt::format("cannot create directory '{}'", dir.string()));
  }
  for (Split split : kAllSplits) {
    std::vector<std::string> src, tgt, nc;
    for (std::size_t i : corpus.indices(split)) {
      check_single_line(corpus.records[i].source);
      check_single_line(corpus.records[i].target);
      src.push_back(corpus.records[i].source);
      tgt.push_back(corpus.records[i].target);
      nc.push_back(std::to_string(corpus.records[i].class_count));
    }
    const auto name = split_name(split);
    write_lines(dir / fmt::format("src-{}.txt", name), src);
    write_lines(dir / fmt::format("tgt-{}.txt", name), tgt);
    write_lines(dir / fmt::format("nc-{}.txt", name), nc);
  }
}

ParallelCorpus read_parallel_files(const fs::path& dir) {
  ParallelCorpus pc;
  for (Split split : kAllSplits) {
    const auto name = split_name(split);
    const auto src = read_lines(dir / fmt::format("src-{}.txt", name));
    const auto tgt = read_lines(dir / fmt::format("tgt-{}.txt", name));
    if (src.size() != tgt.size()) {
      throw DatasetError(fmt::format("src-{0}.txt has {1} lines but tgt-{0}.txt has {2}",
                                     name, src.size(), tgt.size()));
    }
    std::vector<std::string> nc;
    const auto nc_path = dir / fmt::format("nc-{}.txt", name);
    if (fs::exists(nc_path)) {
      nc = read_lines(nc_path);
      if (nc.size() != src.size()) {
        throw DatasetError(fmt::format("nc-{}.txt is not aligned", name));
      }
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
      const std::size_t count = nc.empty() ? 0 : std::stoul(nc[i]);
      pc.records.push_back({src[i], tgt[i], count});
      pc.splits.push_back(split);
    }
  }
  return pc;
}

void write_corpus_tsv(const std::vector<CorpusRecord>& records, const fs::path& path) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    check_single_line(r.source);
    check_single_line(r.target);
    lines.push_back(fmt::format("{}\t{}\t{}", r.class_count, r.source, r.target));
  }
  write_lines(path, lines);
}

std::vector<CorpusRecord> read_corpus_tsv(const fs::path& path) {
  std::vector<CorpusRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3 || !is_number(fields[0])) {
      throw DatasetError(fmt::format("{}:{}: expected class_count<TAB>source<TAB>target",
                                     path.string(), line_no));
    }
    out.push_back({fields[1], fields[2], std::stoul(fields[0])});
  }
  return out;
}

namespace {

using Signature =
    std::pair<std::set<std::string>, std::set<std::pair<std::string, std::string>>>;

// Classes and reported pairs of a target sequence, read lexically.
Signature signature_of(const std::string& target) {
  Signature sig;
  std::vector<std::string> seg;
  auto flush = [&] {
    if (!seg.empty()) sig.first.insert(seg[0]);
    if (seg.size() == 2) sig.second.emplace(seg[0], seg[1]);
    seg.clear();
  };
  for (auto& tok : split_whitespace(target)) {
    if (tok == kSegmentSeparator) {
      flush();
    } else {
      seg.push_back(std::move(tok));
    }
  }
  flush();
  return sig;
}

}  // namespace

std::map<std::size_t, double> overlap_analysis(const ParallelCorpus& corpus) {
  std::set<Signature> train;
  for (std::size_t i : corpus.indices(Split::Train)) {
    train.insert(signature_of(corpus.records[i].target));
  }
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> hits;  // nc -> (hit, total)
  for (std::size_t i : corpus.indices(Split::Test)) {
    auto& h = hits[corpus.records[i].class_count];
    ++h.second;
    if (train.count(signature_of(corpus.records[i].target))) ++h.first;
  }
  std::map<std::size_t, double> out;
  for (const auto& [nc, h] : hits) {
    out[nc] = static_cast<double>(h.first) / static_cast<double>(h.second);
  }
  return out;
}

}  // namespace nlq
