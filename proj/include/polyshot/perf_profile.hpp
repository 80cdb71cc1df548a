// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polyshot/datamodel.hpp"
#include "polyshot/llm_gateway.hpp"
#include "polyshot/prompting.hpp"

namespace polyshot {

struct PerfEntry {
  double per = 0.0;  // mean over records of the mean reference-token logprob
  std::size_t n_examples = 0;
  std::uint64_t sample_seed = 0;

  bool operator==(const PerfEntry&) const = default;
};

struct PerfTable {
  std::string model_id;
  std::string dataset_id;
  std::map<std::string, PerfEntry> entries;

  /// code -> per, the form ScoringContext consumes.
  std::map<std::string, double> scores() const;
  bool operator==(const PerfTable&) const = default;
};

/// Language buckets of the pool, each in pool order.
std::map<std::string, std::vector<ExampleRecord>> partition_by_language(const ExamplePool& pool);

struct PerfOptions {
  /// Records scored per language; nullopt scores every record.
  std::optional<std::size_t> cap = 200;
  std::uint64_t seed = 0;
  AnswerFormat answer_format = AnswerFormat::letter;
  std::size_t jobs = 1;
};

/// Ids that language_performance scores: all of them when under the cap,
/// otherwise a seeded sample drawn from the id-sorted list.
std::vector<std::string> perf_sample_ids(std::vector<std::string> ids, std::optional<std::size_t> cap,
                                         std::uint64_t seed);

/// Mean over the sampled records of mean_token_logprob(reference | instruction, source).
PerfEntry language_performance(const std::string& language, std::span<const ExampleRecord> records, Gateway& gateway,
                               const TaskSpec& task, const PerfOptions& opts);

/// One entry per pool language. With `cache_dir`, the table is stored at
/// <cache_dir>/perf/<key>.json and reloaded without model calls on rerun.
PerfTable build_perf_table(const ExamplePool& pool, Gateway& gateway, const TaskSpec& task,
                           const std::string& dataset_id, const PerfOptions& opts,
                           const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

nlohmann::json perf_table_json(const PerfTable& table, const PerfOptions& opts);
PerfTable parse_perf_table(const nlohmann::json& j);

}  // namespace polyshot
