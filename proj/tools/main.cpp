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

// nlq: one entry point for schema ingestion, corpus generation, training,
// prediction, translation, evaluation and the HTTP service.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlq/dataset.hpp"
#include "nlq/eval.hpp"
#include "nlq/seq2seq.hpp"
#include "nlq/text.hpp"
#include "nlq/translate.hpp"
#include "service.hpp"

// After Eigen users: <resolv.h> defines an _res macro.
#include "httplib.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << text;
}

json stats_json(const nlq::SchemaGraph& g) {
  const auto s = nlq::schema_stats(g);
  return {{"classes", s.class_count},
          {"attributes", s.attribute_count},
          {"unique_attributes", s.unique_attribute_count},
          {"edges", s.edge_count}};
}

nlq::Dialect dialect_or_throw(const std::string& name) {
  auto d = nlq::parse_dialect(name);
  if (!d) throw UsageError(fmt::format("unknown dialect '{}'", name));
  return *d;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

struct CorpusArgs {
  std::string schema, out;
  std::size_t n = 1000;
  double p_attr = 0.25, p_constr = 0.05, p_traverse = 0.5;
  std::size_t cap = 0;
  double cap_share = 0.0;
  std::uint64_t seed = 0;
  std::string value_mode = "sampled";
};

struct TrainArgs {
  std::string data, out, config_file, embeddings;
  nlq::ModelConfig config;
};

void add_model_flags(CLI::App* cmd, nlq::ModelConfig& c) {
  cmd->add_option("--layers", c.n_layers, "Encoder and decoder layers")->capture_default_str();
  cmd->add_option("--heads", c.n_heads, "Attention heads")->capture_default_str();
  cmd->add_option("--dim", c.model_dim, "Model dimension")->capture_default_str();
  cmd->add_option("--ff", c.feedforward_dim, "Feed-forward dimension")->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--max-len", c.max_sequence_length, "Maximum sequence length")
      ->capture_default_str();
  cmd->add_option("--lr-factor", c.lr_factor, "Learning-rate schedule factor")
      ->capture_default_str();
  cmd->add_option("--warmup", c.warmup_steps, "Warmup steps")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "Sentences per batch")->capture_default_str();
  cmd->add_option("--patience", c.early_stopping_patience,
                  "Epochs without validation improvement before stopping")
      ->capture_default_str();
  cmd->add_option("--max-epochs", c.max_epochs, "Epoch limit")->capture_default_str();
  cmd->add_option("--beam", c.beam_size, "Default beam width")->capture_default_str();
  cmd->add_option("--label-smoothing", c.label_smoothing, "Label smoothing")
      ->capture_default_str();
  cmd->add_option("--length-penalty", c.length_penalty, "Beam length penalty alpha")
      ->capture_default_str();
  cmd->add_option("--min-count", c.min_count, "Minimum token count for the vocabulary")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

int run_corpus_gen(const CorpusArgs& a) {
  const auto g = nlq::load_schema_file(a.schema);
  nlq::GenParams p;
  p.n_queries = a.n;
  p.attribute_choice_probability = a.p_attr;
  p.constraint_choice_probability = a.p_constr;
  p.graph_traversal_probability = a.p_traverse;
  p.cap_classes = a.cap ? a.cap : nlq::default_cap_for_schema(g.class_count());
  if (a.cap_share > 0) p.cap_share = a.cap_share;
  p.seed = a.seed;
  auto mode = nlq::parse_value_mode(a.value_mode);
  if (!mode) throw UsageError(fmt::format("unknown value mode '{}'", a.value_mode));
  p.value_mode = *mode;
  const auto records = nlq::materialize_corpus(nlq::generate_corpus(g, p), g, a.seed);
  nlq::write_corpus_tsv(records, a.out);
  std::cerr << fmt::format("wrote {} records to {}\n", records.size(), a.out);
  return 0;
}

int run_train(TrainArgs a) {
  if (!a.config_file.empty()) {
    a.config = nlq::ModelConfig::from_json(json::parse(nlq::read_text_file(a.config_file)));
  }
  a.config.validate();
  const auto corpus = nlq::read_parallel_files(a.data);
  nlq::TrainOptions options;
  if (!a.embeddings.empty()) options.embeddings = fs::path(a.embeddings);
  options.on_epoch = [](const nlq::EpochStats& s) {
    std::cerr << fmt::format("epoch {} train {:.4f} val {:.4f} best {:.4f} lr {:.2e} {:.1f}s\n",
                             s.epoch, s.train_loss, s.validation_loss,
                             s.best_validation_loss, s.learning_rate, s.seconds);
  };
  const auto ckpt = nlq::train(corpus, a.config, options);
  nlq::save_checkpoint(ckpt, a.out);
  std::cerr << fmt::format("saved {} (best epoch {}, {:.2f} min)\n", a.out,
                           ckpt.metadata.best_epoch, ckpt.metadata.training_minutes);
  return 0;
}

// One line per test record; beams separated by " ||| ".
std::vector<nlq::RankedCandidates> read_predictions(const std::string& path,
                                                    const nlq::SchemaGraph& g) {
  std::vector<nlq::RankedCandidates> out;
  std::istringstream in(nlq::read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    nlq::RankedCandidates ranked;
    std::size_t start = 0;
    while (true) {
      const auto sep = line.find("|||", start);
      const auto piece = line.substr(start, sep == std::string::npos ? std::string::npos : sep - start);
      auto parsed = nlq::parse_target(piece, g);
      ranked.push_back(parsed.graph);
      if (sep == std::string::npos) break;
      start = sep + 3;
    }
    out.push_back(std::move(ranked));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlq: natural-language questions to SQL, Cypher and service queries"};
  app.require_subcommand(1);

  // schema
  auto* schema = app.add_subcommand("schema", "Schema ingestion and statistics");
  schema->require_subcommand(1);
  std::string schema_in, schema_out = "-";
  auto* schema_import =
      schema->add_subcommand("import", "Read a descriptor or SQL DDL file, write a descriptor");
  schema_import->add_option("input", schema_in, "Schema file (.sql is DDL)")
      ->required()
      ->check(CLI::ExistingFile);
  schema_import->add_option("--out", schema_out, "Output descriptor path ('-' for stdout)");
  auto* schema_stats_cmd = schema->add_subcommand("stats", "Print class/attribute/edge counts");
  schema_stats_cmd->add_option("input", schema_in, "Schema file")
      ->required()
      ->check(CLI::ExistingFile);

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Synthetic corpus generation");
  corpus->require_subcommand(1);
  CorpusArgs ca;
  auto* corpus_gen = corpus->add_subcommand("gen", "Generate an English/target corpus");
  corpus_gen->add_option("--schema", ca.schema, "Schema file")->required()->check(CLI::ExistingFile);
  corpus_gen->add_option("--out", ca.out, "Output TSV path")->required();
  corpus_gen->add_option("--n", ca.n, "Number of queries")->capture_default_str();
  corpus_gen->add_option("--p-attr", ca.p_attr, "Attribute choice probability")
      ->capture_default_str();
  corpus_gen->add_option("--p-constr", ca.p_constr, "Constraint choice probability")
      ->capture_default_str();
  corpus_gen->add_option("--p-traverse", ca.p_traverse, "Graph traversal probability")
      ->capture_default_str();
  corpus_gen->add_option("--cap", ca.cap,
                         "Maximum classes per query (default 3, 4 or 5 by schema size)");
  corpus_gen->add_option("--cap-share", ca.cap_share,
                         "Fraction of queries at the cap (default: equal buckets)");
  corpus_gen->add_option("--seed", ca.seed, "Random seed")->capture_default_str();
  corpus_gen->add_option("--value-mode", ca.value_mode, "sampled or placeholder")
      ->capture_default_str();

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Dataset splitting and analysis");
  dataset->require_subcommand(1);
  std::string ds_corpus, ds_out, ds_data;
  std::uint64_t ds_seed = 0;
  auto* ds_split = dataset->add_subcommand("split", "60/20/20 split with class-count holdout");
  ds_split->add_option("--corpus", ds_corpus, "Corpus TSV")->required()->check(CLI::ExistingFile);
  ds_split->add_option("--out", ds_out, "Output directory")->required();
  ds_split->add_option("--seed", ds_seed, "Shuffle seed")->capture_default_str();
  auto* ds_overlap = dataset->add_subcommand("overlap", "Train/test signature overlap per class count");
  ds_overlap->add_option("--data", ds_data, "Split directory")->required()->check(CLI::ExistingDirectory);

  // train
  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the sequence model");
  train_cmd->add_option("--data", ta.data, "Split directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", ta.out, "Checkpoint path")->required();
  train_cmd->add_option("--config", ta.config_file, "Model configuration JSON (overrides flags)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--embeddings", ta.embeddings, "Pretrained source word vectors")
      ->check(CLI::ExistingFile);
  add_model_flags(train_cmd, ta.config);

  // predict
  std::string pr_ckpt, pr_schema, pr_question, pr_dialect = "sql";
  std::size_t pr_k = 5;
  auto* predict = app.add_subcommand("predict", "Rank query graphs for a question");
  predict->add_option("--checkpoint", pr_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--schema", pr_schema, "Schema file")->required()->check(CLI::ExistingFile);
  predict->add_option("--question", pr_question, "English question")->required();
  predict->add_option("--k", pr_k, "Candidates to show")
      ->check(CLI::IsMember({1, 3, 5}))
      ->capture_default_str();
  predict->add_option("--dialect", pr_dialect, "sql, cypher or service")->capture_default_str();

  // translate
  std::string tr_schema, tr_target, tr_doc, tr_dialect = "sql";
  auto* translate = app.add_subcommand("translate", "Emit a query from a target sequence or document");
  translate->add_option("--schema", tr_schema, "Schema file")->required()->check(CLI::ExistingFile);
  auto* tr_target_opt = translate->add_option("--target", tr_target, "Target token sequence");
  auto* tr_doc_opt = translate->add_option("--document", tr_doc, "Service document JSON file")
                         ->check(CLI::ExistingFile);
  tr_target_opt->excludes(tr_doc_opt);
  translate->add_option("--dialect", tr_dialect, "sql, cypher or service")->capture_default_str();

  // eval
  std::string ev_schema, ev_data, ev_ckpt, ev_preds, ev_out = "-";
  std::size_t ev_k = 5;
  auto* eval = app.add_subcommand("eval", "Accuracy report on the test split");
  eval->add_option("--schema", ev_schema, "Schema file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ev_data, "Split directory")->required()->check(CLI::ExistingDirectory);
  auto* ev_ckpt_opt = eval->add_option("--checkpoint", ev_ckpt, "Checkpoint to decode with")
                          ->check(CLI::ExistingFile);
  auto* ev_pred_opt =
      eval->add_option("--predictions", ev_preds,
                       "Precomputed predictions, one line per test record, beams split by |||")
          ->check(CLI::ExistingFile);
  ev_ckpt_opt->excludes(ev_pred_opt);
  eval->add_option("--k", ev_k, "Largest k")->check(CLI::IsMember({1, 3, 5}))->capture_default_str();
  eval->add_option("--out", ev_out, "Report path ('-' for stdout)");

  // serve
  std::string sv_schema, sv_ckpt, sv_host = "127.0.0.1", sv_origin = "*";
  int sv_port = 8080;
  long sv_timeout = 10000;
  auto* serve = app.add_subcommand("serve", "HTTP service under /v1/");
  serve->add_option("--schema", sv_schema, "Schema file")->required()->check(CLI::ExistingFile);
  serve->add_option("--checkpoint", sv_ckpt, "Checkpoint (predict returns 503 without one)")
      ->check(CLI::ExistingFile);
  serve->add_option("--host", sv_host, "Bind address")->capture_default_str();
  serve->add_option("--port", sv_port, "Port")->capture_default_str();
  serve->add_option("--timeout-ms", sv_timeout, "Prediction timeout")->capture_default_str();
  serve->add_option("--cors-origin", sv_origin, "Allowed console origin")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (schema_import->parsed()) {
      const auto g = nlq::load_schema_file(schema_in);
      write_output(nlq::serialize_schema_descriptor(g), schema_out);
    } else if (schema_stats_cmd->parsed()) {
      std::cout << stats_json(nlq::load_schema_file(schema_in)).dump(2) << '\n';
    } else if (corpus_gen->parsed()) {
      return run_corpus_gen(ca);
    } else if (ds_split->parsed()) {
      const auto pc = nlq::split_dataset(nlq::read_corpus_tsv(ds_corpus), ds_seed);
      nlq::write_parallel_files(pc, ds_out);
      std::cerr << fmt::format("train {} val {} test {}\n", pc.count(nlq::Split::Train),
                               pc.count(nlq::Split::Validation), pc.count(nlq::Split::Test));
    } else if (ds_overlap->parsed()) {
      json out = json::object();
      for (const auto& [nc, v] : nlq::overlap_analysis(nlq::read_parallel_files(ds_data))) {
        out[std::to_string(nc)] = v;
      }
      std::cout << out.dump(2) << '\n';
    } else if (train_cmd->parsed()) {
      return run_train(ta);
    } else if (predict->parsed()) {
      const auto dialect = dialect_or_throw(pr_dialect);
      const auto g = nlq::load_schema_file(pr_schema);
      const auto ckpt = nlq::load_checkpoint(pr_ckpt);
      const auto result = nlq::predict_query_graphs(pr_question, ckpt, g, pr_k);
      for (const auto& c : result.candidates) {
        std::cout << fmt::format("#{} score {:.4f}\n  target: {}\n  paraphrase: {}\n  {}: {}\n",
                                 c.rank + 1, c.score, nlq::serialize_target(c.graph, g),
                                 nlq::paraphrase(c.graph), nlq::to_string(dialect),
                                 nlq::translate(c.graph, g, dialect));
      }
      if (!result.failures.empty()) {
        std::cerr << fmt::format("{} of {} beams did not parse\n", result.failures.size(),
                                 result.beams);
      }
    } else if (translate->parsed()) {
      const auto dialect = dialect_or_throw(tr_dialect);
      const auto g = nlq::load_schema_file(tr_schema);
      nlq::QueryGraph q;
      if (!tr_doc.empty()) {
        q = nlq::from_service_document(json::parse(nlq::read_text_file(tr_doc)), g);
      } else if (!tr_target.empty()) {
        auto parsed = nlq::parse_target(tr_target, g);
        if (!parsed.ok()) throw std::runtime_error(parsed.error->message());
        q = *parsed.graph;
      } else {
        throw UsageError("one of --target or --document is required");
      }
      std::cout << nlq::translate(q, g, dialect) << '\n';
    } else if (eval->parsed()) {
      const auto g = nlq::load_schema_file(ev_schema);
      const auto pc = nlq::read_parallel_files(ev_data);
      const auto test = pc.records_in(nlq::Split::Test);
      std::vector<nlq::QueryGraph> truths;
      std::vector<std::size_t> nc;
      for (const auto& r : test) {
        auto parsed = nlq::parse_target(r.target, g);
        if (!parsed.ok()) throw std::runtime_error("test target: " + parsed.error->message());
        truths.push_back(*parsed.graph);
        nc.push_back(r.class_count);
      }
      std::vector<nlq::RankedCandidates> preds;
      std::optional<double> minutes;
      if (!ev_preds.empty()) {
        preds = read_predictions(ev_preds, g);
      } else if (!ev_ckpt.empty()) {
        const auto ckpt = nlq::load_checkpoint(ev_ckpt);
        minutes = ckpt.metadata.training_minutes;
        for (const auto& r : test) {
          preds.push_back(nlq::predict_query_graphs(r.source, ckpt, g, ev_k).ranked());
        }
      } else {
        throw UsageError("one of --checkpoint or --predictions is required");
      }
      if (preds.size() != truths.size()) {
        throw std::runtime_error(fmt::format("{} predictions for {} test records",
                                             preds.size(), truths.size()));
      }
      const auto report = nlq::per_class_count_report(preds, truths, nc, ev_k, minutes);
      write_output(nlq::report_to_json(report).dump(2) + "\n", ev_out);
    } else if (serve->parsed()) {
      nlq::service::ServiceState state{nlq::load_schema_file(sv_schema), std::nullopt,
                                       std::chrono::milliseconds(sv_timeout), sv_origin};
      if (!sv_ckpt.empty()) state.model = nlq::load_checkpoint(sv_ckpt);
      auto server = nlq::service::make_server(state);
      std::cerr << fmt::format("listening on http://{}:{}/v1/\n", sv_host, sv_port);
      if (!server->listen(sv_host, sv_port)) {
        throw std::runtime_error(fmt::format("cannot listen on {}:{}", sv_host, sv_port));
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
