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
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace nlq {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class SequenceTooLong : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t model_dim = 128;
  std::size_t feedforward_dim = 512;
  double dropout = 0.1;
  std::size_t max_sequence_length = 128;
  // Inverse-square-root schedule: lr = factor * d^-0.5 * min(s^-0.5, s * w^-1.5)
  double lr_factor = 0.5;
  std::size_t warmup_steps = 800;
  std::size_t batch_size = 32;  ///< sentences per batch
  std::size_t early_stopping_patience = 15;
  std::size_t max_epochs = 200;
  std::size_t beam_size = 5;
  double label_smoothing = 0.1;
  double length_penalty = 0.6;
  std::size_t min_count = 1;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  bool operator==(const ModelConfig&) const = default;
};

/// All weights of the encoder-decoder, addressable by name.
template <typename S>
struct TransformerParams {
  struct Attention {
    Mat<S> wq, wk, wv, wo, bq, bk, bv, bo;
  };
  struct Norm {
    Mat<S> gamma, beta;
  };
  struct FeedForward {
    Mat<S> w1, b1, w2, b2;
  };
  struct EncoderLayer {
    Attention self;
    Norm norm1;
    FeedForward ffn;
    Norm norm2;
  };
  struct DecoderLayer {
    Attention self;
    Norm norm1;
    Attention cross;
    Norm norm2;
    FeedForward ffn;
    Norm norm3;
  };

  Mat<S> src_embedding;
  Mat<S> tgt_embedding;
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  Mat<S> out_w, out_b;

  /// Every tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Mat<S>*>> named();
  std::vector<std::pair<std::string, const Mat<S>*>> named() const;

  /// Same shapes, all zeros.
  TransformerParams zeros_like() const;
  std::size_t parameter_count() const;
};

/// A padded batch. Row b of the source occupies src[b*src_len, (b+1)*src_len);
/// targets likewise. PAD ids are masked as attention keys and ignored by the
/// loss.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<int> src;
  std::vector<int> tgt_in;   ///< BOS-prefixed decoder input
  std::vector<int> tgt_out;  ///< EOS-terminated labels

  /// Pads the given sequences. `targets` are raw label ids without BOS/EOS.
  static Batch make(const std::vector<std::vector<int>>& sources,
                    const std::vector<std::vector<int>>& targets);
};

/// Encoder output for one unpadded source sentence, with the cross-attention
/// keys and values of every decoder layer precomputed.
template <typename S>
struct EncodedSource {
  Mat<S> memory;
  std::vector<Mat<S>> cross_k, cross_v;
};

/// Self-attention keys and values of one partial hypothesis.
template <typename S>
struct DecoderCache {
  std::vector<Mat<S>> self_k, self_v;
  std::size_t length = 0;
};

template <typename S>
class Transformer {
 public:
  Transformer() = default;
  /// Xavier-uniform weights, N(0, 1/d) embeddings, unit norms, zero biases.
  Transformer(const ModelConfig& config, std::size_t src_vocab, std::size_t tgt_vocab,
              std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t src_vocab_size() const { return static_cast<std::size_t>(params_.src_embedding.rows()); }
  std::size_t tgt_vocab_size() const { return static_cast<std::size_t>(params_.tgt_embedding.rows()); }

  TransformerParams<S>& params() { return params_; }
  const TransformerParams<S>& params() const { return params_; }

  /// Output distributions, (size * tgt_len) x |target vocab|, row-major by
  /// batch then position. Evaluation mode (no dropout).
  Mat<S> forward(const Batch& batch) const;

  /// Mean label-smoothed cross-entropy over non-PAD target positions.
  /// When `grad` is given it receives the gradient (overwritten). Dropout
  /// is active only when `dropout_rng` is given.
  double loss(const Batch& batch, TransformerParams<S>* grad = nullptr,
              std::mt19937_64* dropout_rng = nullptr) const;

  /// Sum of the same loss and the number of scored positions, for
  /// aggregating over several batches.
  std::pair<double, std::size_t> loss_sum(const Batch& batch) const;

  EncodedSource<S> encode(const std::vector<int>& source) const;
  DecoderCache<S> start_cache() const;

  /// Advances each hypothesis by one input token and returns next-token
  /// log-probabilities, one row per hypothesis.
  Mat<S> decode_step(const EncodedSource<S>& src, std::vector<DecoderCache<S>*>& caches,
                     const std::vector<int>& tokens) const;

  template <typename T>
  Transformer<T> cast() const;

 private:
  template <typename T>
  friend class Transformer;

  ModelConfig config_;
  TransformerParams<S> params_;
  Mat<S> positions_;  ///< sinusoidal table, max_sequence_length x d

  void init_positions();
  struct Tape;
  double run(const Batch& batch, TransformerParams<S>* grad, std::mt19937_64* rng,
             Mat<S>* probs_out, std::size_t* scored) const;
};

extern template class Transformer<float>;
extern template class Transformer<double>;
extern template struct TransformerParams<float>;
extern template struct TransformerParams<double>;

}  // namespace nlq
