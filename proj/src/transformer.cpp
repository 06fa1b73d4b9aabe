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

#include "nlq/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "nlq/vocab.hpp"

namespace nlq {

using nlohmann::json;

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (n_layers == 0) fail("n_layers must be positive");
  if (n_heads == 0) fail("n_heads must be positive");
  if (model_dim == 0 || model_dim % n_heads != 0) {
    fail(fmt::format("model_dim {} is not divisible by n_heads {}", model_dim, n_heads));
  }
  if (feedforward_dim == 0) fail("feedforward_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (max_sequence_length < 2) fail("max_sequence_length must be at least 2");
  if (!(lr_factor > 0.0)) fail("lr_factor must be positive");
  if (warmup_steps == 0) fail("warmup_steps must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (early_stopping_patience == 0) fail("early_stopping_patience must be positive");
  if (max_epochs == 0) fail("max_epochs must be positive");
  if (beam_size == 0) fail("beam size k must be at least 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    fail("label_smoothing must be in [0, 1)");
  }
  if (!(length_penalty >= 0.0)) fail("length_penalty must be non-negative");
  if (min_count == 0) fail("min_count must be positive");
}

json ModelConfig::to_json() const {
  return {{"n_layers", n_layers},
          {"n_heads", n_heads},
          {"model_dim", model_dim},
          {"feedforward_dim", feedforward_dim},
          {"dropout", dropout},
          {"max_sequence_length", max_sequence_length},
          {"lr_factor", lr_factor},
          {"warmup_steps", warmup_steps},
          {"batch_size", batch_size},
          {"early_stopping_patience", early_stopping_patience},
          {"max_epochs", max_epochs},
          {"beam_size", beam_size},
          {"label_smoothing", label_smoothing},
          {"length_penalty", length_penalty},
          {"min_count", min_count},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& doc) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_layers", c.n_layers);
  get("n_heads", c.n_heads);
  get("model_dim", c.model_dim);
  get("feedforward_dim", c.feedforward_dim);
  get("dropout", c.dropout);
  get("max_sequence_length", c.max_sequence_length);
  get("lr_factor", c.lr_factor);
  get("warmup_steps", c.warmup_steps);
  get("batch_size", c.batch_size);
  get("early_stopping_patience", c.early_stopping_patience);
  get("max_epochs", c.max_epochs);
  get("beam_size", c.beam_size);
  get("label_smoothing", c.label_smoothing);
  get("length_penalty", c.length_penalty);
  get("min_count", c.min_count);
  get("seed", c.seed);
  c.validate();
  return c;
}

template <typename S>
std::vector<std::pair<std::string, Mat<S>*>> TransformerParams<S>::named() {
  std::vector<std::pair<std::string, Mat<S>*>> out;
  auto attn = [&](const std::string& prefix, Attention& a) {
    out.emplace_back(prefix + ".wq", &a.wq);
    out.emplace_back(prefix + ".bq", &a.bq);
    out.emplace_back(prefix + ".wk", &a.wk);
    out.emplace_back(prefix + ".bk", &a.bk);
    out.emplace_back(prefix + ".wv", &a.wv);
    out.emplace_back(prefix + ".bv", &a.bv);
    out.emplace_back(prefix + ".wo", &a.wo);
    out.emplace_back(prefix + ".bo", &a.bo);
  };
  auto norm = [&](const std::string& prefix, Norm& n) {
    out.emplace_back(prefix + ".gamma", &n.gamma);
    out.emplace_back(prefix + ".beta", &n.beta);
  };
  auto ffn = [&](const std::string& prefix, FeedForward& f) {
    out.emplace_back(prefix + ".w1", &f.w1);
    out.emplace_back(prefix + ".b1", &f.b1);
    out.emplace_back(prefix + ".w2", &f.w2);
    out.emplace_back(prefix + ".b2", &f.b2);
  };
  out.emplace_back("src_embedding", &src_embedding);
  out.emplace_back("tgt_embedding", &tgt_embedding);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const auto p = fmt::format("encoder.{}", l);
    attn(p + ".self", encoder[l].self);
    norm(p + ".norm1", encoder[l].norm1);
    ffn(p + ".ffn", encoder[l].ffn);
    norm(p + ".norm2", encoder[l].norm2);
  }
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const auto p = fmt::format("decoder.{}", l);
    attn(p + ".self", decoder[l].self);
    norm(p + ".norm1", decoder[l].norm1);
    attn(p + ".cross", decoder[l].cross);
    norm(p + ".norm2", decoder[l].norm2);
    ffn(p + ".ffn", decoder[l].ffn);
    norm(p + ".norm3", decoder[l].norm3);
  }
  out.emplace_back("out.w", &out_w);
  out.emplace_back("out.b", &out_b);
  return out;
}

template <typename S>
std::vector<std::pair<std::string, const Mat<S>*>> TransformerParams<S>::named() const {
  std::vector<std::pair<std::string, const Mat<S>*>> out;
  for (auto& [name, m] : const_cast<TransformerParams*>(this)->named()) {
    out.emplace_back(name, m);
  }
  return out;
}

template <typename S>
TransformerParams<S> TransformerParams<S>::zeros_like() const {
  TransformerParams z = *this;
  for (auto& [name, m] : z.named()) m->setZero();
  return z;
}

template <typename S>
std::size_t TransformerParams<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : named()) n += static_cast<std::size_t>(m->size());
  return n;
}

Batch Batch::make(const std::vector<std::vector<int>>& sources,
                  const std::vector<std::vector<int>>& targets) {
  if (sources.size() != targets.size()) {
    throw std::invalid_argument("sources and targets differ in count");
  }
  Batch b;
  b.size = sources.size();
  for (std::size_t i = 0; i < b.size; ++i) {
    b.src_len = std::max(b.src_len, sources[i].size());
    b.tgt_len = std::max(b.tgt_len, targets[i].size() + 1);
  }
  b.src.assign(b.size * b.src_len, Vocabulary::kPad);
  b.tgt_in.assign(b.size * b.tgt_len, Vocabulary::kPad);
  b.tgt_out.assign(b.size * b.tgt_len, Vocabulary::kPad);
  for (std::size_t i = 0; i < b.size; ++i) {
    std::copy(sources[i].begin(), sources[i].end(), b.src.begin() + static_cast<std::ptrdiff_t>(i * b.src_len));
    const std::size_t base = i * b.tgt_len;
    b.tgt_in[base] = Vocabulary::kBos;
    for (std::size_t t = 0; t < targets[i].size(); ++t) {
      b.tgt_in[base + t + 1] = targets[i][t];
      b.tgt_out[base + t] = targets[i][t];
    }
    b.tgt_out[base + targets[i].size()] = Vocabulary::kEos;
  }
  return b;
}

namespace detail {

template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
Mat<S> linear(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b) {
  Mat<S> y(x.rows(), w.cols());
  y.noalias() = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// Accumulates dW and db and returns dX.
template <typename S>
Mat<S> linear_backward(const Mat<S>& x, const Mat<S>& w, const Mat<S>& dy, Mat<S>& dw,
                       Mat<S>& db) {
  dw.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
  Mat<S> dx(dy.rows(), w.rows());
  dx.noalias() = dy * w.transpose();
  return dx;
}

template <typename S>
struct NormTape {
  Mat<S> xhat;
  Col<S> inv_std;
};

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const typename TransformerParams<S>::Norm& p,
                  NormTape<S>* tape) {
  const S eps = S(1e-5);
  const Col<S> mean = x.rowwise().mean();
  Mat<S> xc = x.colwise() - mean;
  const Col<S> var = xc.array().square().rowwise().mean();
  const Col<S> inv = (var.array() + eps).rsqrt();
  Mat<S> xhat = xc.array().colwise() * inv.array();
  Mat<S> y = (xhat.array().rowwise() * p.gamma.row(0).array()).rowwise() +
             p.beta.row(0).array();
  if (tape) {
    tape->xhat = std::move(xhat);
    tape->inv_std = inv;
  }
  return y;
}

template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const typename TransformerParams<S>::Norm& p,
                           typename TransformerParams<S>::Norm& g, const NormTape<S>& t) {
  g.gamma += (dy.array() * t.xhat.array()).colwise().sum().matrix();
  g.beta += dy.colwise().sum();
  const Mat<S> dxhat = dy.array().rowwise() * p.gamma.row(0).array();
  const Col<S> m1 = dxhat.rowwise().mean();
  const Col<S> m2 = (dxhat.array() * t.xhat.array()).rowwise().mean();
  Mat<S> dx = (dxhat.array().colwise() - m1.array()) -
              (t.xhat.array().colwise() * m2.array());
  dx = dx.array().colwise() * t.inv_std.array();
  return dx;
}

template <typename S>
struct DropTape {
  Mat<S> mask;  ///< empty when dropout is inactive
};

template <typename S>
void dropout(Mat<S>& x, double rate, std::mt19937_64* rng, DropTape<S>& tape) {
  if (!rng || rate <= 0.0) {
    tape.mask.resize(0, 0);
    return;
  }
  tape.mask.resize(x.rows(), x.cols());
  const auto threshold = static_cast<std::uint32_t>(rate * 65536.0);
  const S keep = S(1.0 / (1.0 - rate));
  S* m = tape.mask.data();
  const Eigen::Index n = tape.mask.size();
  std::uint64_t bits = 0;
  int left = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (left == 0) {
      bits = (*rng)();
      left = 4;
    }
    const auto draw = static_cast<std::uint32_t>(bits & 0xffffu);
    bits >>= 16;
    --left;
    m[i] = draw >= threshold ? keep : S(0);
  }
  x = x.cwiseProduct(tape.mask);
}

template <typename S>
Mat<S> dropout_backward(const Mat<S>& dy, const DropTape<S>& tape) {
  if (tape.mask.size() == 0) return dy;
  return dy.cwiseProduct(tape.mask);
}

// In-place softmax of each row; rows that are fully masked become zero.
template <typename S>
void softmax_rows(Mat<S>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const S mx = s.row(i).maxCoeff();
    if (mx == -std::numeric_limits<S>::infinity()) {
      s.row(i).setZero();
      continue;
    }
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
}

template <typename S>
struct AttnTape {
  Mat<S> xq, xkv, q, k, v, ctx;
  std::vector<Mat<S>> probs;  ///< per (batch row, head)
};

template <typename S>
Mat<S> attention(const typename TransformerParams<S>::Attention& p, const Mat<S>& xq,
                 const Mat<S>& xkv, std::size_t batch, std::size_t tq, std::size_t tk,
                 const std::vector<char>& key_valid, bool causal, std::size_t heads,
                 AttnTape<S>* tape) {
  const auto d = static_cast<std::size_t>(p.wq.cols());
  const std::size_t dk = d / heads;
  const S scale = S(1.0 / std::sqrt(static_cast<double>(dk)));
  const S neg_inf = -std::numeric_limits<S>::infinity();
  Mat<S> q = linear(xq, p.wq, p.bq);
  Mat<S> k = linear(xkv, p.wk, p.bk);
  Mat<S> v = linear(xkv, p.wv, p.bv);
  Mat<S> ctx(batch * tq, d);
  if (tape) tape->probs.resize(batch * heads);
  const auto Tq = static_cast<Eigen::Index>(tq), Tk = static_cast<Eigen::Index>(tk),
             Dk = static_cast<Eigen::Index>(dk);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto rq = static_cast<Eigen::Index>(b * tq), rk = static_cast<Eigen::Index>(b * tk);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto c = static_cast<Eigen::Index>(h * dk);
      Mat<S> s(Tq, Tk);
      s.noalias() = q.block(rq, c, Tq, Dk) * k.block(rk, c, Tk, Dk).transpose();
      s *= scale;
      for (Eigen::Index j = 0; j < Tk; ++j) {
        if (!key_valid[b * tk + static_cast<std::size_t>(j)]) s.col(j).setConstant(neg_inf);
      }
      if (causal) {
        for (Eigen::Index i = 0; i < Tq; ++i) {
          for (Eigen::Index j = i + 1; j < Tk; ++j) s(i, j) = neg_inf;
        }
      }
      softmax_rows(s);
      ctx.block(rq, c, Tq, Dk).noalias() = s * v.block(rk, c, Tk, Dk);
      if (tape) tape->probs[b * heads + h] = std::move(s);
    }
  }
  Mat<S> out = linear(ctx, p.wo, p.bo);
  if (tape) {
    tape->xq = xq;
    tape->xkv = xkv;
    tape->q = std::move(q);
    tape->k = std::move(k);
    tape->v = std::move(v);
    tape->ctx = std::move(ctx);
  }
  return out;
}

// Returns (dXq, dXkv).
template <typename S>
std::pair<Mat<S>, Mat<S>> attention_backward(
    const typename TransformerParams<S>::Attention& p,
    typename TransformerParams<S>::Attention& g, const AttnTape<S>& t, const Mat<S>& dout,
    std::size_t batch, std::size_t tq, std::size_t tk, std::size_t heads) {
  const auto d = static_cast<std::size_t>(p.wq.cols());
  const std::size_t dk = d / heads;
  const S scale = S(1.0 / std::sqrt(static_cast<double>(dk)));
  const Mat<S> dctx = linear_backward(t.ctx, p.wo, dout, g.wo, g.bo);
  Mat<S> dq(t.q.rows(), t.q.cols());
  Mat<S> dk_(t.k.rows(), t.k.cols());
  Mat<S> dv(t.v.rows(), t.v.cols());
  const auto Tq = static_cast<Eigen::Index>(tq), Tk = static_cast<Eigen::Index>(tk),
             Dk = static_cast<Eigen::Index>(dk);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto rq = static_cast<Eigen::Index>(b * tq), rk = static_cast<Eigen::Index>(b * tk);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto c = static_cast<Eigen::Index>(h * dk);
      const Mat<S>& P = t.probs[b * heads + h];
      const auto dC = dctx.block(rq, c, Tq, Dk);
      dv.block(rk, c, Tk, Dk).noalias() = P.transpose() * dC;
      Mat<S> dP(Tq, Tk);
      dP.noalias() = dC * t.v.block(rk, c, Tk, Dk).transpose();
      const Col<S> rowdot = (dP.array() * P.array()).rowwise().sum();
      Mat<S> dS = P.array() * (dP.array().colwise() - rowdot.array());
      dS *= scale;
      dq.block(rq, c, Tq, Dk).noalias() = dS * t.k.block(rk, c, Tk, Dk);
      dk_.block(rk, c, Tk, Dk).noalias() = dS.transpose() * t.q.block(rq, c, Tq, Dk);
    }
  }
  Mat<S> dxq = linear_backward(t.xq, p.wq, dq, g.wq, g.bq);
  Mat<S> dxkv = linear_backward(t.xkv, p.wk, dk_, g.wk, g.bk);
  dxkv += linear_backward(t.xkv, p.wv, dv, g.wv, g.bv);
  return {std::move(dxq), std::move(dxkv)};
}

template <typename S>
struct FfnTape {
  Mat<S> x, h;
};

template <typename S>
Mat<S> feed_forward(const typename TransformerParams<S>::FeedForward& p, const Mat<S>& x,
                    FfnTape<S>* tape) {
  Mat<S> h = linear(x, p.w1, p.b1).cwiseMax(S(0));
  Mat<S> y = linear(h, p.w2, p.b2);
  if (tape) {
    tape->x = x;
    tape->h = std::move(h);
  }
  return y;
}

template <typename S>
Mat<S> feed_forward_backward(const typename TransformerParams<S>::FeedForward& p,
                             typename TransformerParams<S>::FeedForward& g,
                             const FfnTape<S>& t, const Mat<S>& dy) {
  Mat<S> dh = linear_backward(t.h, p.w2, dy, g.w2, g.b2);
  dh = (t.h.array() > S(0)).select(dh, S(0));
  return linear_backward(t.x, p.w1, dh, g.w1, g.b1);
}

template <typename S>
Mat<S> embed(const Mat<S>& table, const Mat<S>& positions, const std::vector<int>& ids,
             std::size_t len) {
  const auto d = table.cols();
  const S scale = S(std::sqrt(static_cast<double>(d)));
  Mat<S> x(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) =
        table.row(ids[r]) * scale + positions.row(static_cast<Eigen::Index>(r % len));
  }
  return x;
}

template <typename S>
void embed_backward(Mat<S>& gtable, const std::vector<int>& ids, const Mat<S>& dx) {
  const S scale = S(std::sqrt(static_cast<double>(gtable.cols())));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    gtable.row(ids[r]) += dx.row(static_cast<Eigen::Index>(r)) * scale;
  }
}

}  // namespace detail

template <typename S>
struct Transformer<S>::Tape {
  struct Enc {
    detail::AttnTape<S> self;
    detail::DropTape<S> d1;
    detail::NormTape<S> n1;
    detail::FfnTape<S> ffn;
    detail::DropTape<S> d2;
    detail::NormTape<S> n2;
  };
  struct Dec {
    detail::AttnTape<S> self;
    detail::DropTape<S> d1;
    detail::NormTape<S> n1;
    detail::AttnTape<S> cross;
    detail::DropTape<S> d2;
    detail::NormTape<S> n2;
    detail::FfnTape<S> ffn;
    detail::DropTape<S> d3;
    detail::NormTape<S> n3;
  };
  detail::DropTape<S> src_drop, tgt_drop;
  std::vector<Enc> enc;
  std::vector<Dec> dec;
  Mat<S> dec_out;
};

template <typename S>
Transformer<S>::Transformer(const ModelConfig& config, std::size_t src_vocab,
                            std::size_t tgt_vocab, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(config.model_dim);
  const auto ff = static_cast<Eigen::Index>(config.feedforward_dim);
  auto xavier = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    Mat<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = S(u(rng));
    return m;
  };
  auto normal = [&](Eigen::Index rows, Eigen::Index cols, double sd) {
    std::normal_distribution<double> n(0.0, sd);
    Mat<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = S(n(rng));
    return m;
  };
  auto zeros = [](Eigen::Index cols) { return Mat<S>::Zero(1, cols); };
  auto attn = [&] {
    typename TransformerParams<S>::Attention a;
    a.wq = xavier(d, d);
    a.wk = xavier(d, d);
    a.wv = xavier(d, d);
    a.wo = xavier(d, d);
    a.bq = zeros(d);
    a.bk = zeros(d);
    a.bv = zeros(d);
    a.bo = zeros(d);
    return a;
  };
  auto norm = [&] {
    return typename TransformerParams<S>::Norm{Mat<S>::Ones(1, d), zeros(d)};
  };
  auto ffn = [&] {
    return typename TransformerParams<S>::FeedForward{xavier(d, ff), zeros(ff),
                                                      xavier(ff, d), zeros(d)};
  };
  const double embed_sd = 1.0 / std::sqrt(static_cast<double>(config.model_dim));
  params_.src_embedding = normal(static_cast<Eigen::Index>(src_vocab), d, embed_sd);
  params_.tgt_embedding = normal(static_cast<Eigen::Index>(tgt_vocab), d, embed_sd);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    typename TransformerParams<S>::EncoderLayer e;
    e.self = attn();
    e.norm1 = norm();
    e.ffn = ffn();
    e.norm2 = norm();
    params_.encoder.push_back(std::move(e));
  }
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    typename TransformerParams<S>::DecoderLayer dl;
    dl.self = attn();
    dl.norm1 = norm();
    dl.cross = attn();
    dl.norm2 = norm();
    dl.ffn = ffn();
    dl.norm3 = norm();
    params_.decoder.push_back(std::move(dl));
  }
  params_.out_w = xavier(d, static_cast<Eigen::Index>(tgt_vocab));
  params_.out_b = zeros(static_cast<Eigen::Index>(tgt_vocab));
  init_positions();
}

template <typename S>
void Transformer<S>::init_positions() {
  const auto n = static_cast<Eigen::Index>(config_.max_sequence_length);
  const auto d = static_cast<Eigen::Index>(config_.model_dim);
  positions_.resize(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (Eigen::Index i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      positions_(pos, i) = S(std::sin(angle));
      if (i + 1 < d) positions_(pos, i + 1) = S(std::cos(angle));
    }
  }
}

template <typename S>
double Transformer<S>::run(const Batch& batch, TransformerParams<S>* grad,
                           std::mt19937_64* rng, Mat<S>* probs_out,
                           std::size_t* scored) const {
  using namespace detail;
  const std::size_t B = batch.size, Ls = batch.src_len, Lt = batch.tgt_len;
  const std::size_t H = config_.n_heads;
  if (Ls > config_.max_sequence_length || Lt > config_.max_sequence_length) {
    throw SequenceTooLong(fmt::format(
        "sequence length {} exceeds max_sequence_length {}", std::max(Ls, Lt),
        config_.max_sequence_length));
  }
  const double rate = config_.dropout;
  const bool train = grad != nullptr;
  Tape tape;
  tape.enc.resize(params_.encoder.size());
  tape.dec.resize(params_.decoder.size());

  std::vector<char> src_valid(B * Ls), tgt_valid(B * Lt);
  for (std::size_t i = 0; i < B * Ls; ++i) src_valid[i] = batch.src[i] != Vocabulary::kPad;
  for (std::size_t i = 0; i < B * Lt; ++i) tgt_valid[i] = batch.tgt_in[i] != Vocabulary::kPad;

  // Encoder.
  Mat<S> x = embed(params_.src_embedding, positions_, batch.src, Ls);
  dropout(x, rate, rng, tape.src_drop);
  for (std::size_t l = 0; l < params_.encoder.size(); ++l) {
    const auto& P = params_.encoder[l];
    auto& T = tape.enc[l];
    Mat<S> a = attention(P.self, x, x, B, Ls, Ls, src_valid, false, H, train ? &T.self : nullptr);
    dropout(a, rate, rng, T.d1);
    Mat<S> x1 = layer_norm<S>(x + a, P.norm1, train ? &T.n1 : nullptr);
    Mat<S> f = feed_forward(P.ffn, x1, train ? &T.ffn : nullptr);
    dropout(f, rate, rng, T.d2);
    x = layer_norm<S>(x1 + f, P.norm2, train ? &T.n2 : nullptr);
  }
  const Mat<S> memory = std::move(x);

  // Decoder.
  Mat<S> y = embed(params_.tgt_embedding, positions_, batch.tgt_in, Lt);
  dropout(y, rate, rng, tape.tgt_drop);
  for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
    const auto& P = params_.decoder[l];
    auto& T = tape.dec[l];
    Mat<S> a = attention(P.self, y, y, B, Lt, Lt, tgt_valid, true, H, train ? &T.self : nullptr);
    dropout(a, rate, rng, T.d1);
    Mat<S> y1 = layer_norm<S>(y + a, P.norm1, train ? &T.n1 : nullptr);
    Mat<S> c = attention(P.cross, y1, memory, B, Lt, Ls, src_valid, false, H,
                         train ? &T.cross : nullptr);
    dropout(c, rate, rng, T.d2);
    Mat<S> y2 = layer_norm<S>(y1 + c, P.norm2, train ? &T.n2 : nullptr);
    Mat<S> f = feed_forward(P.ffn, y2, train ? &T.ffn : nullptr);
    dropout(f, rate, rng, T.d3);
    y = layer_norm<S>(y2 + f, P.norm3, train ? &T.n3 : nullptr);
  }

  Mat<S> logits = linear(y, params_.out_w, params_.out_b);
  const auto V = logits.cols();
  // Row-wise log-softmax.
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const S mx = logits.row(r).maxCoeff();
    const S lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    logits.row(r).array() -= lse;
  }
  Mat<S>& logp = logits;

  const double eps = config_.label_smoothing;
  const double off = V > 2 ? eps / static_cast<double>(V - 2) : 0.0;
  const double on = 1.0 - eps;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < B * Lt; ++r) {
    const int label = batch.tgt_out[r];
    if (label == Vocabulary::kPad) continue;
    const auto row = logp.row(static_cast<Eigen::Index>(r));
    const double all = static_cast<double>(row.sum()) - static_cast<double>(row(Vocabulary::kPad));
    const double at = static_cast<double>(row(label));
    total -= on * at + off * (all - at);
    ++count;
  }
  if (scored) *scored = count;
  if (probs_out) *probs_out = logp.array().exp();
  if (!train) return total;

  // Backward: d(mean loss)/d(logits) = (p - q) / count.
  *grad = params_.zeros_like();
  Mat<S> dlogits = logp.array().exp();
  const S inv = count ? S(1.0 / static_cast<double>(count)) : S(0);
  for (std::size_t r = 0; r < B * Lt; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const int label = batch.tgt_out[r];
    if (label == Vocabulary::kPad) {
      dlogits.row(ri).setZero();
      continue;
    }
    dlogits.row(ri).array() -= S(off);
    dlogits(ri, Vocabulary::kPad) += S(off);
    dlogits(ri, label) += S(off) - S(on);
    dlogits.row(ri) *= inv;
  }
  Mat<S> dy = linear_backward(y, params_.out_w, dlogits, grad->out_w, grad->out_b);
  Mat<S> dmem = Mat<S>::Zero(memory.rows(), memory.cols());
  for (std::size_t li = params_.decoder.size(); li-- > 0;) {
    const auto& P = params_.decoder[li];
    auto& G = grad->decoder[li];
    const auto& T = tape.dec[li];
    Mat<S> dr3 = layer_norm_backward<S>(dy, P.norm3, G.norm3, T.n3);
    Mat<S> dy2 = dr3 + feed_forward_backward<S>(P.ffn, G.ffn, T.ffn, dropout_backward(dr3, T.d3));
    Mat<S> dr2 = layer_norm_backward<S>(dy2, P.norm2, G.norm2, T.n2);
    auto [dq_c, dkv_c] = attention_backward<S>(P.cross, G.cross, T.cross,
                                               dropout_backward(dr2, T.d2), B, Lt, Ls, H);
    dmem += dkv_c;
    Mat<S> dy1 = dr2 + dq_c;
    Mat<S> dr1 = layer_norm_backward<S>(dy1, P.norm1, G.norm1, T.n1);
    auto [dq_s, dkv_s] = attention_backward<S>(P.self, G.self, T.self,
                                               dropout_backward(dr1, T.d1), B, Lt, Lt, H);
    dy = dr1 + dq_s + dkv_s;
  }
  embed_backward(grad->tgt_embedding, batch.tgt_in, dropout_backward(dy, tape.tgt_drop));

  Mat<S> dx = std::move(dmem);
  for (std::size_t li = params_.encoder.size(); li-- > 0;) {
    const auto& P = params_.encoder[li];
    auto& G = grad->encoder[li];
    const auto& T = tape.enc[li];
    Mat<S> dr2 = layer_norm_backward<S>(dx, P.norm2, G.norm2, T.n2);
    Mat<S> dx1 = dr2 + feed_forward_backward<S>(P.ffn, G.ffn, T.ffn, dropout_backward(dr2, T.d2));
    Mat<S> dr1 = layer_norm_backward<S>(dx1, P.norm1, G.norm1, T.n1);
    auto [dq, dkv] = attention_backward<S>(P.self, G.self, T.self,
                                           dropout_backward(dr1, T.d1), B, Ls, Ls, H);
    dx = dr1 + dq + dkv;
  }
  embed_backward(grad->src_embedding, batch.src, dropout_backward(dx, tape.src_drop));
  return count ? total / static_cast<double>(count) : 0.0;
}

template <typename S>
Mat<S> Transformer<S>::forward(const Batch& batch) const {
  Mat<S> probs;
  run(batch, nullptr, nullptr, &probs, nullptr);
  return probs;
}

template <typename S>
double Transformer<S>::loss(const Batch& batch, TransformerParams<S>* grad,
                            std::mt19937_64* dropout_rng) const {
  if (grad) return run(batch, grad, dropout_rng, nullptr, nullptr);
  std::size_t count = 0;
  const double total = run(batch, nullptr, nullptr, nullptr, &count);
  return count ? total / static_cast<double>(count) : 0.0;
}

template <typename S>
std::pair<double, std::size_t> Transformer<S>::loss_sum(const Batch& batch) const {
  std::size_t count = 0;
  const double total = run(batch, nullptr, nullptr, nullptr, &count);
  return {total, count};
}

template <typename S>
EncodedSource<S> Transformer<S>::encode(const std::vector<int>& source) const {
  using namespace detail;
  const std::size_t n = source.size();
  if (n > config_.max_sequence_length) {
    throw SequenceTooLong(fmt::format("source length {} exceeds max_sequence_length {}", n,
                                      config_.max_sequence_length));
  }
  const std::vector<char> valid(n, 1);
  Mat<S> x = embed(params_.src_embedding, positions_, source, std::max<std::size_t>(n, 1));
  for (const auto& P : params_.encoder) {
    Mat<S> a = attention<S>(P.self, x, x, 1, n, n, valid, false, config_.n_heads, nullptr);
    Mat<S> x1 = layer_norm<S>(x + a, P.norm1, nullptr);
    x = layer_norm<S>(x1 + feed_forward<S>(P.ffn, x1, nullptr), P.norm2, nullptr);
  }
  EncodedSource<S> out;
  for (const auto& P : params_.decoder) {
    out.cross_k.push_back(linear(x, P.cross.wk, P.cross.bk));
    out.cross_v.push_back(linear(x, P.cross.wv, P.cross.bv));
  }
  out.memory = std::move(x);
  return out;
}

template <typename S>
DecoderCache<S> Transformer<S>::start_cache() const {
  DecoderCache<S> c;
  const auto d = static_cast<Eigen::Index>(config_.model_dim);
  c.self_k.assign(params_.decoder.size(), Mat<S>(0, d));
  c.self_v.assign(params_.decoder.size(), Mat<S>(0, d));
  return c;
}

template <typename S>
Mat<S> Transformer<S>::decode_step(const EncodedSource<S>& src,
                                   std::vector<DecoderCache<S>*>& caches,
                                   const std::vector<int>& tokens) const {
  using namespace detail;
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(config_.model_dim);
  const auto H = static_cast<Eigen::Index>(config_.n_heads);
  const Eigen::Index dk = d / H;
  const S scale = S(1.0 / std::sqrt(static_cast<double>(dk)));
  const S emb_scale = S(std::sqrt(static_cast<double>(d)));

  Mat<S> x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t pos = caches[static_cast<std::size_t>(i)]->length;
    if (pos >= config_.max_sequence_length) {
      throw SequenceTooLong("decoder reached max_sequence_length");
    }
    x.row(i) = params_.tgt_embedding.row(tokens[static_cast<std::size_t>(i)]) * emb_scale +
               positions_.row(static_cast<Eigen::Index>(pos));
  }

  // Attention of one query row over all rows of (K, V).
  auto attend = [&](const auto& qrow, const Mat<S>& K, const Mat<S>& V, auto&& out_row) {
    for (Eigen::Index h = 0; h < H; ++h) {
      Eigen::Matrix<S, 1, Eigen::Dynamic> s =
          qrow.segment(h * dk, dk) * K.middleCols(h * dk, dk).transpose();
      s *= scale;
      const S mx = s.maxCoeff();
      s = (s.array() - mx).exp();
      s /= s.sum();
      out_row.segment(h * dk, dk).noalias() = s * V.middleCols(h * dk, dk);
    }
  };

  for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
    const auto& P = params_.decoder[l];
    const Mat<S> q = linear(x, P.self.wq, P.self.bq);
    const Mat<S> k = linear(x, P.self.wk, P.self.bk);
    const Mat<S> v = linear(x, P.self.wv, P.self.bv);
    Mat<S> ctx(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& c = *caches[static_cast<std::size_t>(i)];
      const Eigen::Index t = c.self_k[l].rows();
      c.self_k[l].conservativeResize(t + 1, d);
      c.self_v[l].conservativeResize(t + 1, d);
      c.self_k[l].row(t) = k.row(i);
      c.self_v[l].row(t) = v.row(i);
      attend(q.row(i), c.self_k[l], c.self_v[l], ctx.row(i));
    }
    Mat<S> x1 = layer_norm<S>(x + linear(ctx, P.self.wo, P.self.bo), P.norm1, nullptr);
    const Mat<S> qc = linear(x1, P.cross.wq, P.cross.bq);
    for (Eigen::Index i = 0; i < n; ++i) attend(qc.row(i), src.cross_k[l], src.cross_v[l], ctx.row(i));
    Mat<S> x2 = layer_norm<S>(x1 + linear(ctx, P.cross.wo, P.cross.bo), P.norm2, nullptr);
    x = layer_norm<S>(x2 + feed_forward<S>(P.ffn, x2, nullptr), P.norm3, nullptr);
  }
  for (auto* c : caches) ++c->length;

  Mat<S> logits = linear(x, params_.out_w, params_.out_b);
  for (Eigen::Index r = 0; r < n; ++r) {
    const S mx = logits.row(r).maxCoeff();
    const S lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    logits.row(r).array() -= lse;
  }
  return logits;
}

template <typename S>
template <typename T>
Transformer<T> Transformer<S>::cast() const {
  Transformer<T> out;
  out.config_ = config_;
  out.params_.encoder.resize(params_.encoder.size());
  out.params_.decoder.resize(params_.decoder.size());
  auto dst = out.params_.named();
  const auto src = params_.named();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<T>();
  out.init_positions();
  return out;
}

template struct TransformerParams<float>;
template struct TransformerParams<double>;
template class Transformer<float>;
template class Transformer<double>;
template Transformer<double> Transformer<float>::cast<double>() const;
template Transformer<float> Transformer<double>::cast<float>() const;
template Transformer<float> Transformer<float>::cast<float>() const;

}  // namespace nlq
