// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace polyshot {

/// One labeled answer option of a multiple-choice item.
struct Choice {
  std::string label;
  std::string text;

  bool operator==(const Choice&) const = default;
};

/// One candidate demonstration in the example pool.
///
/// `source` is the question text. Multiple-choice pools additionally carry
/// the five options in `choices`; reading-comprehension pools carry the
/// passage in `context` (or embed it in `source` as "Context: ...\nQuestion: ...").
struct ExampleRecord {
  std::string id;
  std::string source;
  std::string reference;
  std::string language;
  std::string embedding_ref;  // defaults to id
  std::vector<Choice> choices;
  std::optional<std::string> context;

  bool operator==(const ExampleRecord&) const = default;
};

/// One input to answer. `gold` is present for evaluation splits only.
struct QueryInstance {
  std::string id;
  std::string input;
  std::string language;
  std::optional<std::string> gold;
  std::vector<Choice> choices;
  std::optional<std::string> context;
  std::string embedding_ref;  // defaults to id

  bool operator==(const QueryInstance&) const = default;
};

/// Immutable-after-construction collection of pool records with id lookup.
class ExamplePool {
 public:
  ExamplePool() = default;
  explicit ExamplePool(std::vector<ExampleRecord> records);

  /// Throws ValidationError on a duplicate id.
  void add(ExampleRecord record);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<ExampleRecord>& records() const noexcept { return records_; }
  const ExampleRecord* find(std::string_view id) const;
  const ExampleRecord& at(std::size_t i) const { return records_.at(i); }

  /// Distinct language codes, sorted.
  std::set<std::string> languages() const;

  bool operator==(const ExamplePool& other) const { return records_ == other.records_; }

 private:
  std::vector<ExampleRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Simplex point (semantic, linguistic, performance) of the weighted score.
struct FactorWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  double sum() const noexcept { return alpha + beta + gamma; }
  bool operator==(const FactorWeights&) const = default;
};

enum class Factor { semantic, linguistic, performance };

std::string_view factor_name(Factor f) noexcept;  // "sem" | "lag" | "per"
Factor parse_factor(std::string_view name);

/// Rescales non-negative weights to sum to exactly 1. With `ablation` set the
/// weights are checked for sign only and returned unchanged.
FactorWeights validate_weights(const FactorWeights& w, bool ablation = false);

/// Zeroes the dropped coefficient; the remaining two are NOT rescaled.
FactorWeights ablate(const FactorWeights& w, Factor drop) noexcept;

/// Weights file / config block: {"alpha", "beta", "gamma", optional "ablate"}.
struct WeightsConfig {
  FactorWeights weights;
  std::optional<Factor> drop;

  /// Weights the scorer should use (ablation applied).
  FactorWeights effective() const noexcept;
};

/// Strict parse: without "ablate" the weights must already sum to 1 within
/// 1e-9, otherwise ConfigError.
WeightsConfig parse_weights_config(std::string_view json_text);

enum class TaskId { mcsqa, tydi };

std::string_view task_name(TaskId t) noexcept;
TaskId parse_task(std::string_view name);

/// Task definition text and shot count.
struct TaskSpec {
  TaskId task = TaskId::mcsqa;
  std::string instruction;
  std::size_t k = 8;
};

void validate_task(const TaskSpec& task);

/// A pool record with its factor scores under one query.
struct ScoredExample {
  std::string record_id;
  double score_sem = 0.0;
  double score_lag = 0.0;
  double score_per = 0.0;
  double combined = 0.0;
};

struct InstanceOutcome {
  std::string query_id;
  bool correct = false;
};

/// Per-instance correctness of one configuration, ordered by query id.
struct EvalResult {
  std::string config_label;
  std::vector<InstanceOutcome> per_instance;
  double accuracy = 0.0;
  std::size_t failures = 0;

  /// Sorts instances by id and recomputes accuracy from the bits.
  void finalize();
  double recomputed_accuracy() const noexcept;
};

/// Known language codes plus an optional detector for unlabeled lines.
struct IngestOptions {
  std::set<std::string> known_languages;
  std::function<std::string(const std::string&)> detect;
};

/// Non-fatal findings collected while loading.
struct Diagnostics {
  std::vector<std::string> warnings;
};

/// Loads a pool JSONL file. Strings are NFC-normalized on ingest. Throws
/// ValidationError naming the line number on malformed lines, duplicate ids
/// and unknown language codes.
ExamplePool load_pool(const std::filesystem::path& path, const IngestOptions& opts,
                      Diagnostics* diag = nullptr);
void save_pool(const ExamplePool& pool, const std::filesystem::path& path);

ExamplePool parse_pool(std::string_view jsonl, const IngestOptions& opts, Diagnostics* diag = nullptr);
std::string serialize_pool(const ExamplePool& pool);

std::vector<QueryInstance> load_queries(const std::filesystem::path& path, const IngestOptions& opts,
                                        Diagnostics* diag = nullptr);
std::vector<QueryInstance> parse_queries(std::string_view jsonl, const IngestOptions& opts,
                                         Diagnostics* diag = nullptr);
std::string serialize_queries(const std::vector<QueryInstance>& queries);

/// Checks the five-option a..e invariant. Throws ValidationError.
void validate_choices(const std::vector<Choice>& choices, std::string_view owner_id);

}  // namespace polyshot
