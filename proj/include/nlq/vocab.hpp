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

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nlq {

struct ParallelCorpus;

/// Token/id mapping with four reserved ids. Regular tokens are ordered by
/// descending training frequency, ties broken alphabetically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kBosToken = "<bos>";
  static constexpr std::string_view kEosToken = "<eos>";
  static constexpr std::string_view kUnkToken = "<unk>";

  /// Reserved tokens only.
  Vocabulary();

  /// Tokens seen fewer than `min_count` times are left out (they map to UNK).
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences,
                          std::size_t min_count = 1);

  /// Restores a vocabulary from its full token list, reserved tokens first.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  /// Drops PAD and BOS, stops at the first EOS.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Source and target vocabularies from the training split only. Throws
/// std::invalid_argument when the training split is empty.
std::pair<Vocabulary, Vocabulary> build_vocab(const ParallelCorpus& corpus,
                                              std::size_t min_count = 1);

}  // namespace nlq
