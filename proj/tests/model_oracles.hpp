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

// Reference computations for the sequence model: central-difference
// gradients, a cache-free greedy decoder and a tiny memorization corpus.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "nlq/dataset.hpp"
#include "nlq/seq2seq.hpp"

namespace nlq::testing {

struct GradCheck {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

/// Compares analytic gradients of the loss with central differences at
/// `per_tensor` random coordinates of every tensor. The relative error
/// |a - n| / max(|a| + |n|, floor) keeps near-zero gradients from dividing
/// by rounding noise.
inline GradCheck gradient_check(Transformer<double>& model, const Batch& batch,
                                std::size_t per_tensor, std::uint64_t seed,
                                double step = 1e-5, double floor = 1e-6) {
  TransformerParams<double> grad = model.params().zeros_like();
  model.loss(batch, &grad);
  auto analytic = grad.named();
  auto params = model.params().named();
  std::mt19937_64 rng(seed);
  GradCheck out;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Mat<double>& w = *params[t].second;
    const Mat<double>& g = *analytic[t].second;
    std::uniform_int_distribution<Eigen::Index> pick(0, w.size() - 1);
    for (std::size_t i = 0; i < per_tensor; ++i) {
      const Eigen::Index idx = pick(rng);
      const double saved = w.data()[idx];
      w.data()[idx] = saved + step;
      const double up = model.loss(batch);
      w.data()[idx] = saved - step;
      const double down = model.loss(batch);
      w.data()[idx] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = g.data()[idx];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = params[t].first;
      }
    }
  }
  return out;
}

/// A small random batch with ragged lengths over the given vocab sizes.
inline Batch random_batch(std::size_t src_vocab, std::size_t tgt_vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> s(Vocabulary::kReserved, static_cast<int>(src_vocab) - 1);
  std::uniform_int_distribution<int> t(Vocabulary::kReserved, static_cast<int>(tgt_vocab) - 1);
  std::vector<std::vector<int>> src, tgt;
  for (std::size_t len : {5, 3, 4}) {
    std::vector<int> a(len), b(len - 1);
    for (auto& x : a) x = s(rng);
    for (auto& x : b) x = t(rng);
    src.push_back(a);
    tgt.push_back(b);
  }
  return Batch::make(src, tgt);
}

/// Greedy decoding with a full forward pass per step and no cache. PAD and
/// BOS are never chosen.
template <typename S>
std::vector<int> greedy_decode(const Transformer<S>& model, const std::vector<int>& source,
                               std::size_t max_length) {
  std::vector<int> out;
  while (out.size() < max_length) {
    const auto batch = Batch::make({source}, {out});
    const Mat<S> probs = model.forward(batch);
    const auto row = probs.row(static_cast<Eigen::Index>(out.size()));
    int best = Vocabulary::kEos;
    for (int v = Vocabulary::kEos; v < static_cast<int>(row.size()); ++v) {
      if (row(v) > row(best)) best = v;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
  }
  return out;
}

/// Ten generated records used as both train and validation split.
inline ParallelCorpus memorization_corpus(const SchemaGraph& g, std::uint64_t seed) {
  GenParams p;
  p.n_queries = 10;
  p.cap_classes = 2;
  p.value_mode = ValueMode::Placeholder;
  p.seed = seed;
  auto records = materialize_corpus(generate_corpus(g, p), g, seed);
  ParallelCorpus pc;
  for (Split s : {Split::Train, Split::Validation}) {
    for (const auto& r : records) {
      pc.records.push_back(r);
      pc.splits.push_back(s);
    }
  }
  return pc;
}

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.model_dim = 32;
  c.feedforward_dim = 64;
  c.dropout = 0.0;
  c.batch_size = 10;
  c.warmup_steps = 30;
  c.lr_factor = 1.0;
  c.max_epochs = 500;
  c.early_stopping_patience = 500;
  c.label_smoothing = 0.0;
  c.seed = 3;
  return c;
}

}  // namespace nlq::testing
