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

#include <gtest/gtest.h>

#include <thread>

#include "model_oracles.hpp"
#include "nlq/translate.hpp"
#include "service.hpp"
#include "support.hpp"

// After Eigen users: <resolv.h> defines an _res macro.
#include "httplib.h"

namespace nlq::service {
namespace {

using nlohmann::json;

class Service : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new ParallelCorpus(testing::memorization_corpus(testing::graph_tier(), 5));
    state_ = new ServiceState{testing::graph_tier(), train(*corpus_, testing::tiny_config())};
    bare_ = new ServiceState{testing::graph_tier()};
  }
  static void TearDownTestSuite() {
    delete bare_;
    delete state_;
    delete corpus_;
  }
  static ParallelCorpus* corpus_;
  static ServiceState* state_;
  static ServiceState* bare_;
};

ParallelCorpus* Service::corpus_ = nullptr;
ServiceState* Service::state_ = nullptr;
ServiceState* Service::bare_ = nullptr;

std::string predict_body(const std::string& q, int k) {
  return json{{"question", q}, {"k", k}}.dump();
}

TEST_F(Service, SchemaIsStable) {
  const auto a = handle_schema(*state_);
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.text(), handle_schema(*state_).text());
  EXPECT_EQ(a.body["schema"]["classes"].size(), state_->schema.class_count());
  const auto stats = schema_stats(state_->schema);
  EXPECT_EQ(a.body["stats"]["classes"], stats.class_count);
  EXPECT_EQ(a.body["stats"]["attributes"], stats.attribute_count);
  EXPECT_EQ(a.body["stats"]["unique_attributes"], stats.unique_attribute_count);
  EXPECT_EQ(a.body["stats"]["edges"], stats.edge_count);
}

TEST_F(Service, PredictValidation) {
  EXPECT_EQ(handle_predict(*state_, predict_body("show x", 0)).status, 400);
  EXPECT_EQ(handle_predict(*state_, predict_body("show x", 11)).status, 400);
  EXPECT_EQ(handle_predict(*state_, predict_body("   ", 3)).status, 400);
  EXPECT_EQ(handle_predict(*state_, "not json").status, 400);
  EXPECT_EQ(handle_predict(*state_, R"({"question": "x", "k": "3"})").status, 400);
  EXPECT_EQ(handle_predict(*bare_, predict_body("show x", 3)).status, 503);
}

TEST_F(Service, PredictReturnsTrainingGraphAtRankOne) {
  const auto& g = state_->schema;
  for (const auto& r : corpus_->records_in(Split::Train)) {
    const auto res = handle_predict(*state_, predict_body(r.source, 3));
    ASSERT_EQ(res.status, 200);
    const auto& cands = res.body["candidates"];
    ASSERT_FALSE(cands.empty());
    EXPECT_EQ(cands[0]["rank"], 0);
    const auto top = from_service_document(cands[0]["query_graph"], g);
    EXPECT_TRUE(query_graph_equal(top, *parse_target(r.target, g).graph)) << r.source;
    EXPECT_EQ(cands[0]["paraphrase"], paraphrase(top));
    EXPECT_EQ(cands.size() + res.body["failures"].get<std::size_t>(), 3u);
    // Every parseable candidate translates.
    for (const auto& c : cands) {
      const auto tr = handle_translate(*state_, json{{"query_graph", c["query_graph"]},
                                                     {"dialect", "sql"}}.dump());
      EXPECT_EQ(tr.status, 200) << tr.text();
    }
  }
}

TEST_F(Service, PredictTimesOut) {
  ServiceState hurried{state_->schema, state_->model, std::chrono::milliseconds(-1)};
  EXPECT_EQ(handle_predict(hurried, predict_body("show symbol in gene", 5)).status, 504);
}

TEST_F(Service, TranslateDelegates) {
  const auto& g = state_->schema;
  const auto q = *parse_target("gene symbol ; organism name = homo", g).graph;
  const auto doc = to_service_document(q, g);
  for (auto d : {Dialect::Sql, Dialect::Cypher, Dialect::Service}) {
    const auto r = handle_translate(*state_, json{{"query_graph", doc},
                                                  {"dialect", std::string(to_string(d))}}.dump());
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body["query_text"], translate(q, g, d));
  }
  EXPECT_EQ(handle_translate(*state_, json{{"query_graph", doc}, {"dialect", "sparql"}}.dump()).status,
            400);
  EXPECT_EQ(handle_translate(*state_, json{{"query_graph", {{"select", 1}}}, {"dialect", "sql"}}.dump())
                .status,
            400);
  EXPECT_EQ(handle_translate(*state_, R"({"dialect": "sql"})").status, 400);
}

TEST_F(Service, HttpRoundTripWithCors) {
  auto server = make_server(*state_);
  const int port = server->bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server->listen_after_bind(); });
  server->wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto schema = client.Get("/v1/schema");
  ASSERT_TRUE(schema);
  EXPECT_EQ(schema->status, 200);
  EXPECT_EQ(schema->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(schema->body, handle_schema(*state_).text());

  const auto& r = corpus_->records.front();
  auto pred = client.Post("/v1/predict", predict_body(r.source, 1), "application/json");
  ASSERT_TRUE(pred);
  EXPECT_EQ(pred->status, 200);
  EXPECT_EQ(pred->body, handle_predict(*state_, predict_body(r.source, 1)).text());

  auto bad = client.Post("/v1/predict", predict_body(r.source, 0), "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto pre = client.Options("/v1/translate");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  server->stop();
  t.join();
}

}  // namespace
}  // namespace nlq::service
