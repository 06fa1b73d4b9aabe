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

#include "nlq/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace nlq {

using nlohmann::json;

namespace {

void check_sizes(std::size_t predictions, std::size_t truths) {
  if (predictions != truths) {
    throw std::invalid_argument(fmt::format(
        "{} prediction lists for {} ground-truth records", predictions, truths));
  }
}

double fraction(std::size_t hit, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

bool correct_within(const RankedCandidates& ranked, const QueryGraph& truth,
                    std::size_t k) {
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (ranked[r] && query_graph_equal(*ranked[r], truth)) return true;
  }
  return false;
}

template <typename T>
std::set<T> as_set(const std::vector<T>& items) {
  return {items.begin(), items.end()};
}

}  // namespace

double global_accuracy(const std::vector<RankedCandidates>& predictions,
                       const std::vector<QueryGraph>& truths, std::size_t k) {
  check_sizes(predictions.size(), truths.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (correct_within(predictions[i], truths[i], k)) ++hit;
  }
  return fraction(hit, truths.size());
}

ComponentAccuracy component_accuracy(const std::vector<RankedCandidates>& predictions,
                                     const std::vector<QueryGraph>& truths) {
  check_sizes(predictions.size(), truths.size());
  std::size_t classes = 0, attributes = 0, constraints = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (predictions[i].empty() || !predictions[i].front()) continue;
    const QueryGraph& p = *predictions[i].front();
    const QueryGraph& t = truths[i];
    if (as_set(p.mentioned_classes()) == as_set(t.mentioned_classes())) ++classes;
    if (as_set(p.reported) == as_set(t.reported)) ++attributes;
    if (as_set(p.constraints) == as_set(t.constraints)) ++constraints;
  }
  return {fraction(classes, truths.size()), fraction(attributes, truths.size()),
          fraction(constraints, truths.size())};
}

std::vector<ClassCountRow> per_class_count_accuracy(
    const std::vector<RankedCandidates>& predictions,
    const std::vector<QueryGraph>& truths,
    const std::vector<std::size_t>& class_counts) {
  check_sizes(predictions.size(), truths.size());
  check_sizes(class_counts.size(), truths.size());
  std::map<std::size_t, ClassCountRow> rows;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    auto& row = rows[class_counts[i]];
    row.class_count = class_counts[i];
    ++row.records;
    if (correct_within(predictions[i], truths[i], 1)) ++row.correct;
  }
  std::vector<ClassCountRow> out;
  for (auto& [nc, row] : rows) {
    row.accuracy = fraction(row.correct, row.records);
    out.push_back(row);
  }
  return out;
}

EvalReport per_class_count_report(const std::vector<RankedCandidates>& predictions,
                                  const std::vector<QueryGraph>& truths,
                                  const std::vector<std::size_t>& class_counts,
                                  std::size_t max_k,
                                  std::optional<double> training_minutes) {
  if (max_k == 0) throw std::invalid_argument("k must be at least 1");
  EvalReport report;
  report.dataset_size = truths.size();
  report.k = max_k;
  for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
    if (k <= max_k) report.global_accuracy[k] = global_accuracy(predictions, truths, k);
  }
  if (max_k != 1 && max_k != 3 && max_k != 5) {
    report.global_accuracy[max_k] = global_accuracy(predictions, truths, max_k);
  }
  report.components = component_accuracy(predictions, truths);
  report.per_nc = per_class_count_accuracy(predictions, truths, class_counts);
  report.training_minutes = training_minutes;
  report.constraint_inversion = report.components.constraints > report.components.classes;
  if (report.per_nc.size() > 1) {
    report.class_count_inversion =
        report.per_nc.front().accuracy < report.per_nc.back().accuracy;
  }
  return report;
}

json report_to_json(const EvalReport& r) {
  json doc;
  doc["dataset_size"] = r.dataset_size;
  doc["k"] = r.k;
  json global = json::object();
  for (const auto& [k, acc] : r.global_accuracy) global[std::to_string(k)] = acc;
  doc["global_accuracy"] = global;
  doc["components"] = {{"classes", r.components.classes},
                       {"attributes", r.components.attributes},
                       {"constraints", r.components.constraints}};
  doc["per_nc"] = json::array();
  for (const auto& row : r.per_nc) {
    doc["per_nc"].push_back({{"nc", row.class_count},
                             {"records", row.records},
                             {"correct", row.correct},
                             {"accuracy", row.accuracy}});
  }
  doc["training_minutes"] =
      r.training_minutes ? json(*r.training_minutes) : json(nullptr);
  doc["constraint_inversion"] = r.constraint_inversion;
  doc["class_count_inversion"] = r.class_count_inversion;
  return doc;
}

EvalReport report_from_json(const json& doc) {
  try {
    EvalReport r;
    r.dataset_size = doc.at("dataset_size").get<std::size_t>();
    r.k = doc.at("k").get<std::size_t>();
    for (const auto& [key, value] : doc.at("global_accuracy").items()) {
      r.global_accuracy[std::stoul(key)] = value.get<double>();
    }
    const auto& c = doc.at("components");
    r.components = {c.at("classes").get<double>(), c.at("attributes").get<double>(),
                    c.at("constraints").get<double>()};
    for (const auto& row : doc.at("per_nc")) {
      r.per_nc.push_back({row.at("nc").get<std::size_t>(),
                          row.at("records").get<std::size_t>(),
                          row.at("correct").get<std::size_t>(),
                          row.at("accuracy").get<double>()});
    }
    if (!doc.at("training_minutes").is_null()) {
      r.training_minutes = doc.at("training_minutes").get<double>();
    }
    r.constraint_inversion = doc.at("constraint_inversion").get<bool>();
    r.class_count_inversion = doc.at("class_count_inversion").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(fmt::format("malformed report: {}", e.what()));
  }
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << report_to_json(report).dump(2) << '\n';
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return report_from_json(json::parse(buf.str()));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(fmt::format("malformed report: {}", e.what()));
  }
}

}  // namespace nlq
