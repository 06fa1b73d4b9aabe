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

#include "service.hpp"

#include <fmt/format.h>

#include "httplib.h"
#include "nlq/nl_gen.hpp"
#include "nlq/text.hpp"
#include "nlq/translate.hpp"

namespace nlq::service {

using nlohmann::json;

namespace {

Response error(int status, const std::string& message) {
  return {status, json{{"error", message}}};
}

std::optional<json> parse_body(const std::string& body) {
  auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  return doc;
}

}  // namespace

Response handle_schema(const ServiceState& state) {
  const auto stats = schema_stats(state.schema);
  return {200, json{{"schema", json::parse(serialize_schema_descriptor(state.schema))},
                    {"stats",
                     {{"classes", stats.class_count},
                      {"attributes", stats.attribute_count},
                      {"unique_attributes", stats.unique_attribute_count},
                      {"edges", stats.edge_count}}}}};
}

Response handle_predict(const ServiceState& state, const std::string& body) {
  const auto doc = parse_body(body);
  if (!doc) return error(400, "request body must be a JSON object");
  if (!doc->contains("question") || !(*doc)["question"].is_string() ||
      trim((*doc)["question"].get<std::string>()).empty()) {
    return error(400, "question must be a nonempty string");
  }
  std::int64_t k = 5;
  if (doc->contains("k")) {
    if (!(*doc)["k"].is_number_integer()) return error(400, "k must be an integer");
    k = (*doc)["k"].get<std::int64_t>();
  }
  if (k < 1 || k > 10) return error(400, fmt::format("k must be in [1, 10], got {}", k));
  if (!state.model) return error(503, "no model loaded");

  const auto deadline = std::chrono::steady_clock::now() + state.predict_timeout;
  PredictionResult result;
  try {
    result = predict_query_graphs((*doc)["question"].get<std::string>(), *state.model,
                                  state.schema, static_cast<std::size_t>(k), deadline);
  } catch (const BeamTimeout&) {
    return error(504, fmt::format("prediction exceeded {} ms",
                                  state.predict_timeout.count()));
  }
  json candidates = json::array();
  for (const auto& c : result.candidates) {
    candidates.push_back({{"rank", c.rank},
                          {"score", c.score},
                          {"query_graph", to_service_document(c.graph, state.schema)},
                          {"paraphrase", paraphrase(c.graph)}});
  }
  return {200, json{{"candidates", candidates}, {"failures", result.failures.size()}}};
}

Response handle_translate(const ServiceState& state, const std::string& body) {
  const auto doc = parse_body(body);
  if (!doc) return error(400, "request body must be a JSON object");
  if (!doc->contains("dialect") || !(*doc)["dialect"].is_string()) {
    return error(400, "dialect must be a string");
  }
  const auto dialect = parse_dialect((*doc)["dialect"].get<std::string>());
  if (!dialect) {
    return error(400, fmt::format("unknown dialect '{}'",
                                  (*doc)["dialect"].get<std::string>()));
  }
  if (!doc->contains("query_graph")) return error(400, "query_graph is required");
  try {
    const auto q = from_service_document((*doc)["query_graph"], state.schema);
    return {200, json{{"query_text", translate(q, state.schema, *dialect)}}};
  } catch (const TranslationError& e) {
    return error(400, e.what());
  } catch (const json::exception& e) {
    return error(400, fmt::format("invalid query_graph: {}", e.what()));
  }
}

std::unique_ptr<httplib::Server> make_server(const ServiceState& state) {
  auto server = std::make_unique<httplib::Server>();
  server->set_default_headers({{"Access-Control-Allow-Origin", state.cors_origin},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                               {"Access-Control-Allow-Headers", "Content-Type"}});
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.text(), "application/json");
  };
  server->Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server->Get("/v1/schema", [&state, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, handle_schema(state));
  });
  server->Post("/v1/predict", [&state, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_predict(state, req.body));
  });
  server->Post("/v1/translate",
               [&state, reply](const httplib::Request& req, httplib::Response& res) {
                 reply(res, handle_translate(state, req.body));
               });
  return server;
}

}  // namespace nlq::service
