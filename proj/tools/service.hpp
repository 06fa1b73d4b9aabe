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
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "nlq/schema.hpp"
#include "nlq/seq2seq.hpp"

namespace httplib {
class Server;
}

namespace nlq::service {

/// Startup-loaded artifacts. Read-only once serving begins.
struct ServiceState {
  SchemaGraph schema;
  std::optional<ModelCheckpoint> model;
  std::chrono::milliseconds predict_timeout{10000};
  std::string cors_origin = "*";
};

struct Response {
  int status = 200;
  nlohmann::json body;

  std::string text() const { return body.dump(2); }
};

/// GET /v1/schema: {"schema": descriptor, "stats": {...}}.
Response handle_schema(const ServiceState& state);

/// POST /v1/predict with {"question", "k"}. Returns rank-ordered candidates
/// in service-document form with paraphrases, and the count of beams that
/// did not parse.
Response handle_predict(const ServiceState& state, const std::string& body);

/// POST /v1/translate with {"query_graph", "dialect"}.
Response handle_translate(const ServiceState& state, const std::string& body);

/// Routes the three handlers under /v1/ with CORS headers.
std::unique_ptr<httplib::Server> make_server(const ServiceState& state);

}  // namespace nlq::service
