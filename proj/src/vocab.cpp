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

#include "nlq/vocab.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "nlq/dataset.hpp"
#include "nlq/text.hpp"

namespace nlq {

Vocabulary::Vocabulary()
    : tokens_{std::string(kPadToken), std::string(kBosToken), std::string(kEosToken),
              std::string(kUnkToken)} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved || tokens[kPad] != kPadToken ||
      tokens[kBos] != kBosToken || tokens[kEos] != kEosToken ||
      tokens[kUnk] != kUnkToken) {
    throw std::invalid_argument("vocabulary must start with the reserved tokens");
  }
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (auto& t : tokens) {
    auto [it, fresh] = v.index_.emplace(t, static_cast<int>(v.tokens_.size()));
    if (!fresh) throw std::invalid_argument(fmt::format("duplicate token '{}'", t));
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences,
                             std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [t, c] : counts) {
    const bool reserved = t == kPadToken || t == kBosToken || t == kEosToken ||
                          t == kUnkToken;
    if (c >= min_count && !reserved) kept.emplace_back(t, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = Vocabulary().tokens_;
  for (auto& [t, c] : kept) tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range(fmt::format("token id {} out of range", id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(token(i));
  }
  return out;
}

std::pair<Vocabulary, Vocabulary> build_vocab(const ParallelCorpus& corpus,
                                              std::size_t min_count) {
  std::vector<std::vector<std::string>> src, tgt;
  for (std::size_t i : corpus.indices(Split::Train)) {
    src.push_back(split_whitespace(corpus.records[i].source));
    tgt.push_back(split_whitespace(corpus.records[i].target));
  }
  if (src.empty()) throw std::invalid_argument("training split is empty");
  return {Vocabulary::build(src, min_count), Vocabulary::build(tgt, min_count)};
}

}  // namespace nlq
