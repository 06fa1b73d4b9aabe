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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlq/query_graph.hpp"

namespace nlq {

/// Ranked candidates for one test record. A disengaged entry is a beam
/// output that did not parse; it keeps its rank but never matches.
using RankedCandidates = std::vector<std::optional<QueryGraph>>;

/// Fraction of records whose top-k candidates contain one equal to the
/// truth. Entries beyond rank k are ignored.
double global_accuracy(const std::vector<RankedCandidates>& predictions,
                       const std::vector<QueryGraph>& truths, std::size_t k);

struct ComponentAccuracy {
  double classes = 0.0;
  double attributes = 0.0;
  double constraints = 0.0;

  bool operator==(const ComponentAccuracy&) const = default;
};

/// Per-record set exactness of the rank-1 candidate: mentioned class sets,
/// reported pair sets and constraint triple sets. An unparseable or missing
/// rank-1 candidate is wrong on all three.
ComponentAccuracy component_accuracy(const std::vector<RankedCandidates>& predictions,
                                     const std::vector<QueryGraph>& truths);

struct ClassCountRow {
  std::size_t class_count = 0;
  std::size_t records = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;

  bool operator==(const ClassCountRow&) const = default;
};

struct EvalReport {
  std::size_t dataset_size = 0;  ///< records in the evaluated split
  std::size_t k = 1;             ///< largest k evaluated
  std::map<std::size_t, double> global_accuracy;  ///< keyed by k
  ComponentAccuracy components;
  std::vector<ClassCountRow> per_nc;  ///< top-1 accuracy by truth class count
  std::optional<double> training_minutes;
  /// Set when constraint accuracy exceeds class accuracy.
  bool constraint_inversion = false;
  /// Set when the smallest class count scores below the largest.
  bool class_count_inversion = false;

  bool operator==(const EvalReport&) const = default;
};

/// Top-1 accuracy partitioned by class count.
std::vector<ClassCountRow> per_class_count_accuracy(
    const std::vector<RankedCandidates>& predictions,
    const std::vector<QueryGraph>& truths,
    const std::vector<std::size_t>& class_counts);

/// Builds the full report for k in {1, 3, 5} capped at `max_k`.
EvalReport per_class_count_report(const std::vector<RankedCandidates>& predictions,
                                  const std::vector<QueryGraph>& truths,
                                  const std::vector<std::size_t>& class_counts,
                                  std::size_t max_k,
                                  std::optional<double> training_minutes);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace nlq
