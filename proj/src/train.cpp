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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "nlq/query_gen.hpp"
#include "nlq/seq2seq.hpp"
#include "nlq/text.hpp"

namespace nlq {

bool EarlyStopping::update(double validation_loss) {
  ++evaluations_;
  improved_ = validation_loss < best_;
  if (improved_) {
    best_ = validation_loss;
    bad_ = 0;
  } else {
    ++bad_;
  }
  return bad_ >= patience_;
}

double learning_rate(const ModelConfig& config, std::size_t step) {
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(config.warmup_steps);
  return config.lr_factor / std::sqrt(static_cast<double>(config.model_dim)) *
         std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

namespace {

struct Example {
  std::vector<int> src;
  std::vector<int> tgt;
};

std::vector<Example> encode_split(const ParallelCorpus& corpus, Split split,
                                  const Vocabulary& sv, const Vocabulary& tv,
                                  std::size_t max_len) {
  std::vector<Example> out;
  for (std::size_t i : corpus.indices(split)) {
    Example ex{sv.encode(split_whitespace(corpus.records[i].source)),
               tv.encode(split_whitespace(corpus.records[i].target))};
    if (ex.src.size() > max_len || ex.tgt.size() + 1 > max_len) {
      throw SequenceTooLong(fmt::format(
          "{} record {} is longer than max_sequence_length {}", split_name(split), i, max_len));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Batch batch_of(const std::vector<Example>& data, const std::vector<std::size_t>& idx,
               std::size_t begin, std::size_t end) {
  std::vector<std::vector<int>> s, t;
  for (std::size_t j = begin; j < end; ++j) {
    s.push_back(data[idx[j]].src);
    t.push_back(data[idx[j]].tgt);
  }
  return Batch::make(s, t);
}

// Shuffled, then stably sorted by source length so batches carry little
// padding while their composition still varies between epochs.
std::vector<Batch> make_batches(const std::vector<Example>& data, std::size_t batch_size,
                                Rng* rng) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (rng) std::shuffle(idx.begin(), idx.end(), *rng);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return data[a].src.size() < data[b].src.size();
  });
  std::vector<Batch> out;
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    out.push_back(batch_of(data, idx, b, std::min(idx.size(), b + batch_size)));
  }
  if (rng) std::shuffle(out.begin(), out.end(), *rng);
  return out;
}

double mean_loss(const Transformer<float>& model, const std::vector<Batch>& batches) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    auto [sum, n] = model.loss_sum(b);
    total += sum;
    count += n;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

class Adam {
 public:
  explicit Adam(const TransformerParams<float>& p) : m_(p.zeros_like()), v_(p.zeros_like()) {}

  void step(TransformerParams<float>& params, TransformerParams<float>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    const auto step_size = static_cast<float>(lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    auto p = params.named();
    auto g = grad.named();
    auto m = m_.named();
    auto v = v_.named();
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto ga = g[i].second->array();
      m[i].second->array() = kBeta1 * m[i].second->array() + (1.0f - kBeta1) * ga;
      v[i].second->array() = kBeta2 * v[i].second->array() + (1.0f - kBeta2) * ga.square();
      p[i].second->array() -= step_size * m[i].second->array() /
                              ((v[i].second->array() * inv_c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr float kBeta1 = 0.9f;
  static constexpr float kBeta2 = 0.98f;
  static constexpr float kEps = 1e-9f;
  TransformerParams<float> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace

ModelCheckpoint train(const ParallelCorpus& corpus, const ModelConfig& config,
                      const TrainOptions& options) {
  config.validate();
  if (corpus.count(Split::Train) == 0 || corpus.count(Split::Validation) == 0) {
    throw TrainingError("training needs nonempty train and validation splits");
  }
  const auto start = std::chrono::steady_clock::now();
  auto [sv, tv] = build_vocab(corpus, config.min_count);
  const auto train_data = encode_split(corpus, Split::Train, sv, tv, config.max_sequence_length);
  const auto val_data =
      encode_split(corpus, Split::Validation, sv, tv, config.max_sequence_length);
  const auto val_batches = make_batches(val_data, config.batch_size, nullptr);

  Rng rng(derive_seed(config.seed, {0x747261696eULL}));
  ModelCheckpoint ckpt{config, sv, tv,
                       Transformer<float>(config, sv.size(), tv.size(),
                                          derive_seed(config.seed, {0x696e6974ULL})),
                       {}};
  if (options.embeddings) {
    auto init = load_pretrained_embeddings(*options.embeddings, sv, config.model_dim,
                                           derive_seed(config.seed, {0x656d62ULL}));
    ckpt.model.params().src_embedding = std::move(init.matrix);
  }

  Adam adam(ckpt.model.params());
  EarlyStopping stopper(config.early_stopping_patience);
  TransformerParams<float> best = ckpt.model.params();
  std::size_t step = 0;
  TransformerParams<float> grad;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    double total = 0.0;
    std::size_t batches = 0;
    double lr = 0.0;
    for (const auto& batch : make_batches(train_data, config.batch_size, &rng)) {
      const double loss = ckpt.model.loss(batch, &grad, &rng);
      if (!std::isfinite(loss)) {
        throw TrainingError(fmt::format(
            "non-finite training loss at epoch {}, step {} (learning rate {:.3g}, "
            "batch of {} x {})",
            epoch, step + 1, learning_rate(config, step + 1), batch.size, batch.tgt_len));
      }
      ++step;
      lr = learning_rate(config, step);
      adam.step(ckpt.model.params(), grad, lr);
      total += loss;
      ++batches;
    }
    const double val = mean_loss(ckpt.model, val_batches);
    if (!std::isfinite(val)) {
      throw TrainingError(fmt::format("non-finite validation loss at epoch {}", epoch));
    }
    const bool stop = stopper.update(val);
    if (stopper.improved()) {
      best = ckpt.model.params();
      ckpt.metadata.best_epoch = epoch;
    }
    ckpt.metadata.epochs = epoch;
    if (options.on_epoch) {
      options.on_epoch({epoch, batches ? total / static_cast<double>(batches) : 0.0, val,
                        stopper.best(), lr,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                      epoch_start)
                            .count()});
    }
    if (stop) break;
  }
  ckpt.model.params() = std::move(best);
  ckpt.metadata.best_validation_loss = stopper.best();
  ckpt.metadata.train_records = train_data.size();
  ckpt.metadata.validation_records = val_data.size();
  ckpt.metadata.training_minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  return ckpt;
}

double evaluate_loss(const ModelCheckpoint& ckpt, const ParallelCorpus& corpus,
                     Split split) {
  const auto data = encode_split(corpus, split, ckpt.source_vocab, ckpt.target_vocab,
                                 ckpt.config.max_sequence_length);
  return mean_loss(ckpt.model, make_batches(data, ckpt.config.batch_size, nullptr));
}

EmbeddingInit load_pretrained_embeddings(const std::filesystem::path& path,
                                         const Vocabulary& vocab, std::size_t dim,
                                         std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  EmbeddingInit init;
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f / std::sqrt(static_cast<float>(dim)));
  init.matrix.resize(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < init.matrix.size(); ++i) init.matrix.data()[i] = normal(rng);

  std::vector<char> matched(vocab.size(), 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && is_number(fields[0]) && is_number(fields[1])) {
      if (std::stoul(fields[1]) != dim) {
        throw std::runtime_error(fmt::format("{}:1: header declares dimension {}, expected {}",
                                             path.string(), fields[1], dim));
      }
      continue;
    }
    if (fields.size() != dim + 1) {
      throw std::runtime_error(fmt::format("{}:{}: expected {} values, found {}",
                                           path.string(), line_no, dim, fields.size() - 1));
    }
    std::vector<float> row(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string& f = fields[j + 1];
      char* end = nullptr;
      row[j] = std::strtof(f.c_str(), &end);
      if (end != f.c_str() + f.size() || !std::isfinite(row[j])) {
        throw std::runtime_error(
            fmt::format("{}:{}: malformed value '{}'", path.string(), line_no, f));
      }
    }
    if (!vocab.contains(fields[0])) continue;
    const auto id = static_cast<std::size_t>(vocab.id(fields[0]));
    if (matched[id]) continue;
    matched[id] = 1;
    ++init.matches;
    for (std::size_t j = 0; j < dim; ++j) {
      init.matrix(static_cast<Eigen::Index>(id), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return init;
}

}  // namespace nlq
