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
#include <cmath>

#include "nlq/seq2seq.hpp"
#include "nlq/text.hpp"

namespace nlq {

double length_penalty(std::size_t length, double alpha) {
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

namespace {

struct Live {
  std::vector<int> ids;
  double log_prob = 0.0;
  DecoderCache<float> cache;
};

struct Expansion {
  std::size_t parent;
  int token;
  double log_prob;
};

bool better(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.ids < b.ids;
}

}  // namespace

std::vector<BeamHypothesis> beam_search(
    const Transformer<float>& model, const std::vector<int>& source, std::size_t k,
    double alpha, std::size_t max_length,
    std::optional<std::chrono::steady_clock::time_point> deadline) {
  if (k == 0) throw std::invalid_argument("beam size k must be at least 1");
  const std::size_t limit = model.config().max_sequence_length;
  if (max_length == 0 || max_length > limit) max_length = limit;
  const auto encoded =
      model.encode(source.empty() ? std::vector<int>{Vocabulary::kUnk} : source);
  const auto vocab = static_cast<Eigen::Index>(model.tgt_vocab_size());

  std::vector<Live> live(1);
  live[0].cache = model.start_cache();
  std::vector<BeamHypothesis> finished;

  for (std::size_t step = 0; step < max_length && !live.empty(); ++step) {
    if (deadline && std::chrono::steady_clock::now() > *deadline) {
      throw BeamTimeout("beam search exceeded its deadline");
    }
    std::vector<int> inputs;
    std::vector<DecoderCache<float>*> caches;
    for (auto& h : live) {
      inputs.push_back(h.ids.empty() ? Vocabulary::kBos : h.ids.back());
      caches.push_back(&h.cache);
    }
    const Mat<float> logp = model.decode_step(encoded, caches, inputs);

    std::vector<Expansion> cand;
    for (std::size_t i = 0; i < live.size(); ++i) {
      // PAD and BOS are never emitted.
      std::vector<int> order;
      for (int t = Vocabulary::kEos; t < static_cast<int>(vocab); ++t) order.push_back(t);
      const auto row = logp.row(static_cast<Eigen::Index>(i));
      const auto take = std::min<std::size_t>(k, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                        order.end(), [&](int a, int b) {
                          return row(a) != row(b) ? row(a) > row(b) : a < b;
                        });
      for (std::size_t j = 0; j < take; ++j) {
        cand.push_back({i, order[j], live[i].log_prob + static_cast<double>(row(order[j]))});
      }
    }
    std::stable_sort(cand.begin(), cand.end(), [](const Expansion& a, const Expansion& b) {
      return a.log_prob > b.log_prob;
    });

    std::vector<Live> next;
    for (std::size_t c = 0; c < cand.size() && next.size() < k; ++c) {
      const auto& e = cand[c];
      if (e.token == Vocabulary::kEos) {
        // An ending only counts while it ranks inside the beam.
        if (c < k) {
          finished.push_back({live[e.parent].ids, e.log_prob,
                              e.log_prob / length_penalty(live[e.parent].ids.size() + 1, alpha),
                              true});
        }
        continue;
      }
      Live child{live[e.parent].ids, e.log_prob, live[e.parent].cache};
      child.ids.push_back(e.token);
      next.push_back(std::move(child));
    }
    live = std::move(next);
    if (finished.size() >= k) {
      // Log-probabilities only fall and the penalty peaks at max_length, so a
      // live hypothesis can score at most log_prob / lp(max_length). Drop
      // those that cannot overtake the k-th finished one.
      std::nth_element(finished.begin(), finished.begin() + static_cast<std::ptrdiff_t>(k - 1),
                       finished.end(), better);
      const double kth = finished[k - 1].score;
      const double peak = length_penalty(max_length, alpha);
      std::erase_if(live, [&](const Live& h) { return h.log_prob / peak <= kth; });
    }
  }
  if (finished.size() < k) {
    for (const auto& h : live) {
      finished.push_back({h.ids, h.log_prob, h.log_prob / length_penalty(h.ids.size(), alpha),
                          false});
    }
  }
  std::sort(finished.begin(), finished.end(), better);
  if (finished.size() > k) finished.resize(k);
  return finished;
}

std::vector<BeamOutput> beam_predict(
    const std::string& sentence, const ModelCheckpoint& ckpt, std::size_t k,
    std::optional<std::chrono::steady_clock::time_point> deadline) {
  auto src = ckpt.source_vocab.encode(tokenize_sentence(sentence));
  if (src.size() > ckpt.config.max_sequence_length) {
    src.resize(ckpt.config.max_sequence_length);
  }
  std::vector<BeamOutput> out;
  for (const auto& h :
       beam_search(ckpt.model, src, k, ckpt.config.length_penalty, 0, deadline)) {
    out.push_back({ckpt.target_vocab.decode(h.ids), h.score});
  }
  return out;
}

std::vector<std::optional<QueryGraph>> PredictionResult::ranked() const {
  std::vector<std::optional<QueryGraph>> out(beams);
  for (const auto& c : candidates) out[c.rank] = c.graph;
  return out;
}

PredictionResult interpret_beams(const std::vector<BeamOutput>& beams,
                                 const SchemaGraph& g) {
  PredictionResult result;
  result.beams = beams.size();
  for (std::size_t i = 0; i < beams.size(); ++i) {
    auto parsed = parse_target(std::span<const std::string>(beams[i].tokens), g);
    if (parsed.ok()) {
      result.candidates.push_back({i, std::move(*parsed.graph), beams[i].score, beams[i].tokens});
    } else {
      result.failures.push_back(std::move(*parsed.error));
    }
  }
  return result;
}

PredictionResult predict_query_graphs(
    const std::string& sentence, const ModelCheckpoint& ckpt, const SchemaGraph& g,
    std::size_t k, std::optional<std::chrono::steady_clock::time_point> deadline) {
  return interpret_beams(beam_predict(sentence, ckpt, k, deadline), g);
}

}  // namespace nlq
