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

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "nlq/seq2seq.hpp"

namespace nlq {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'N', 'L', 'Q', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void raw(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void raw(void* data, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(fmt::format("truncated checkpoint while reading {}", what));
    }
    std::memcpy(data, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    raw(&v, sizeof v, what);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v;
    raw(&v, sizeof v, what);
    return v;
  }
  std::string str(const char* what) {
    const auto n = u64(what);
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(fmt::format("truncated checkpoint while reading {}", what));
    }
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metadata_json(const TrainingMetadata& m) {
  return {{"epochs", m.epochs},
          {"best_epoch", m.best_epoch},
          {"best_validation_loss", finite_or_null(m.best_validation_loss)},
          {"training_minutes", m.training_minutes},
          {"train_records", m.train_records},
          {"validation_records", m.validation_records}};
}

TrainingMetadata metadata_from(const json& j) {
  TrainingMetadata m;
  m.epochs = j.at("epochs").get<std::size_t>();
  m.best_epoch = j.at("best_epoch").get<std::size_t>();
  const auto& best = j.at("best_validation_loss");
  m.best_validation_loss =
      best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
  m.training_minutes = j.at("training_minutes").get<double>();
  m.train_records = j.at("train_records").get<std::size_t>();
  m.validation_records = j.at("validation_records").get<std::size_t>();
  return m;
}

void write_vocab(Writer& w, const Vocabulary& v) {
  w.u64(v.size());
  for (const auto& t : v.tokens()) w.str(t);
}

Vocabulary read_vocab(Reader& r) {
  const auto n = r.u64("vocabulary size");
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.str("vocabulary token"));
  try {
    return Vocabulary::from_tokens(std::move(tokens));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(fmt::format("bad vocabulary block: {}", e.what()));
  }
}

}  // namespace

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(ModelCheckpoint::kVersion);
  w.str(ckpt.config.to_json().dump());
  write_vocab(w, ckpt.source_vocab);
  write_vocab(w, ckpt.target_vocab);
  const auto tensors = ckpt.model.params().named();
  w.u64(tensors.size());
  for (const auto& [name, m] : tensors) {
    w.str(name);
    w.u64(static_cast<std::uint64_t>(m->rows()));
    w.u64(static_cast<std::uint64_t>(m->cols()));
    w.raw(m->data(), static_cast<std::size_t>(m->size()) * sizeof(float));
  }
  w.str(metadata_json(ckpt.metadata).dump());
  return w.take();
}

ModelCheckpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic, "header");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = r.u32("version");
  if (version != ModelCheckpoint::kVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));
  }
  ModelCheckpoint ckpt;
  try {
    ckpt.config = ModelConfig::from_json(json::parse(r.str("config")));
  } catch (const std::exception& e) {
    throw CheckpointError(fmt::format("bad config block: {}", e.what()));
  }
  ckpt.source_vocab = read_vocab(r);
  ckpt.target_vocab = read_vocab(r);
  ckpt.model = Transformer<float>(ckpt.config, ckpt.source_vocab.size(),
                                  ckpt.target_vocab.size(), 0);
  auto tensors = ckpt.model.params().named();
  const auto count = r.u64("tensor count");
  if (count != tensors.size()) {
    throw CheckpointError(
        fmt::format("checkpoint has {} tensors, configuration expects {}", count, tensors.size()));
  }
  for (auto& [name, m] : tensors) {
    const auto stored = r.str("tensor name");
    const auto rows = r.u64("tensor rows");
    const auto cols = r.u64("tensor cols");
    if (stored != name || rows != static_cast<std::uint64_t>(m->rows()) ||
        cols != static_cast<std::uint64_t>(m->cols())) {
      throw CheckpointError(fmt::format("tensor '{}' [{}x{}] does not match expected '{}' [{}x{}]",
                                        stored, rows, cols, name, m->rows(), m->cols()));
    }
    r.raw(m->data(), static_cast<std::size_t>(m->size()) * sizeof(float), "tensor data");
  }
  try {
    ckpt.metadata = metadata_from(json::parse(r.str("metadata")));
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("bad metadata block: {}", e.what()));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(fmt::format("error writing '{}'", path.string()));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace nlq
