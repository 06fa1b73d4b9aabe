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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlq/dataset.hpp"
#include "nlq/query_graph.hpp"
#include "nlq/schema.hpp"
#include "nlq/transformer.hpp"
#include "nlq/vocab.hpp"

namespace nlq {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BeamTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingMetadata {
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  double training_minutes = 0.0;
  std::size_t train_records = 0;
  std::size_t validation_records = 0;

  bool operator==(const TrainingMetadata&) const = default;
};

/// Everything prediction needs: configuration, both vocabularies, weights
/// and training metadata.
struct ModelCheckpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  Transformer<float> model;
  TrainingMetadata metadata;
};

/// Binary layout, little-endian:
///   magic "NLQCKPT\0", u32 version,
///   config block  (u64 length + JSON text),
///   source vocab  (u64 count, then u64 length + bytes per token),
///   target vocab  (same),
///   tensors       (u64 count, then per tensor: u64 name length, name,
///                  u64 rows, u64 cols, rows*cols float32 row-major),
///   metadata block (u64 length + JSON text).
std::string serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Tracks the best validation loss and says when to stop.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one evaluation. Returns true when training should stop.
  bool update(double validation_loss);
  bool improved() const { return improved_; }
  double best() const { return best_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
  std::size_t evaluations_ = 0;
  bool improved_ = false;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double best_validation_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainOptions {
  /// Optional word-vector file for the source embeddings.
  std::optional<std::filesystem::path> embeddings;
  /// Called after every epoch; may be empty.
  std::function<void(const EpochStats&)> on_epoch;
};

/// Inverse-square-root warmup schedule at 1-based step `step`.
double learning_rate(const ModelConfig& config, std::size_t step);

/// Trains on the train split with early stopping on validation loss and
/// returns the best-validation weights. Throws TrainingError when the loss
/// becomes non-finite.
ModelCheckpoint train(const ParallelCorpus& corpus, const ModelConfig& config,
                      const TrainOptions& options = {});

/// Mean label-smoothed loss of `model` over one split.
double evaluate_loss(const ModelCheckpoint& ckpt, const ParallelCorpus& corpus,
                     Split split);

struct EmbeddingInit {
  Mat<float> matrix;  ///< |vocab| x dim
  std::size_t matches = 0;
};

/// Reads `token f1 ... fd` lines (an initial `count dim` header line is
/// tolerated). Matched vocabulary rows are copied, the rest are drawn from
/// N(0, 1/dim). Throws std::runtime_error with the line number on malformed
/// lines or a dimension other than `dim`.
EmbeddingInit load_pretrained_embeddings(const std::filesystem::path& path,
                                         const Vocabulary& vocab, std::size_t dim,
                                         std::uint64_t seed);

struct BeamHypothesis {
  std::vector<int> ids;  ///< without BOS/EOS
  double log_prob = 0.0;
  double score = 0.0;  ///< length-normalized
  bool finished = false;
};

/// GNMT length penalty ((5 + len) / 6)^alpha.
double length_penalty(std::size_t length, double alpha);

/// Beam search of width k. Results are distinct and sorted by score,
/// best first. Throws BeamTimeout when `deadline` passes.
std::vector<BeamHypothesis> beam_search(
    const Transformer<float>& model, const std::vector<int>& source, std::size_t k,
    double alpha, std::size_t max_length = 0,
    std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

struct BeamOutput {
  std::vector<std::string> tokens;
  double score = 0.0;
};

/// Tokenizes `sentence` and decodes the k best target sequences.
std::vector<BeamOutput> beam_predict(
    const std::string& sentence, const ModelCheckpoint& ckpt, std::size_t k,
    std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

struct GraphCandidate {
  std::size_t rank = 0;  ///< 0-based rank in the beam
  QueryGraph graph;
  double score = 0.0;
  std::vector<std::string> tokens;
};

struct PredictionResult {
  std::vector<GraphCandidate> candidates;  ///< parseable beams, in beam order
  std::vector<TargetParseError> failures;  ///< one per dropped beam
  std::size_t beams = 0;

  /// Candidates at their beam ranks; unparseable ranks are empty.
  std::vector<std::optional<QueryGraph>> ranked() const;
};

PredictionResult interpret_beams(const std::vector<BeamOutput>& beams,
                                 const SchemaGraph& g);

PredictionResult predict_query_graphs(
    const std::string& sentence, const ModelCheckpoint& ckpt, const SchemaGraph& g,
    std::size_t k,
    std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

}  // namespace nlq
