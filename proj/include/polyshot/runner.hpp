// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polyshot/datamodel.hpp"
#include "polyshot/experiments.hpp"
#include "polyshot/langfeatures.hpp"
#include "polyshot/llm_gateway.hpp"
#include "polyshot/perf_profile.hpp"
#include "polyshot/prompting.hpp"
#include "polyshot/scoring.hpp"
#include "polyshot/vectorstore.hpp"

namespace polyshot {

/// A parsed run config. Relative paths are resolved against the directory
/// holding the config file.
struct RunConfig {
  TaskId task = TaskId::mcsqa;
  std::string dataset_id;
  std::filesystem::path pool;
  std::optional<std::filesystem::path> dev;
  std::optional<std::filesystem::path> test;
  std::vector<std::filesystem::path> vectors;
  std::filesystem::path lang_registry;
  std::optional<std::filesystem::path> langid_model;
  ModelHandle model;
  Strategy strategy = Strategy::multi_factor;
  std::optional<WeightsConfig> weights;
  std::map<std::string, FactorWeights> language_weights;  // fixed overrides of `weights`
  std::optional<GridSpec> grid;
  bool tune_per_language = true;
  std::size_t k = 8;
  std::uint64_t seed = 0;
  std::optional<std::size_t> perf_cap = 200;
  Normalization normalization = Normalization::raw;
  std::string template_id;
  ExampleOrder order = ExampleOrder::ascending;
  bool include_target_language = true;
  AnswerFormat answer_format = AnswerFormat::letter;
  std::optional<std::set<std::string>> allowed_languages;
  bool instruction_without_examples = true;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::size_t jobs = 0;  // 0 = available parallelism
};

/// Checks the whole config before any file is read or model called. Throws ConfigError.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Loaded inputs of a run. Non-copyable because contexts point into it.
struct Workspace {
  ExamplePool pool;
  std::vector<QueryInstance> dev;
  std::vector<QueryInstance> test;
  EmbeddingMatrix embeddings;
  std::unique_ptr<LanguageRegistry> registry;

  Workspace() = default;
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  Workspace(Workspace&&) = default;
  Workspace& operator=(Workspace&&) = default;
};

Workspace load_workspace(const RunConfig& cfg);

/// Orchestrates perf, tuning and evaluation for one config.
class Runner {
 public:
  explicit Runner(RunConfig cfg, std::unique_ptr<Backend> backend = nullptr);

  const RunConfig& config() const noexcept { return cfg_; }
  const Workspace& workspace() const noexcept { return ws_; }
  Gateway& gateway() noexcept { return *gateway_; }

  TaskSpec task() const;
  RunOptions run_options() const;

  /// Zero-filled for strategies that ignore the performance factor.
  const PerfTable& perf_table();
  ScoringContext context(FactorWeights w);

  /// Weights from the config, or tuned on dev when a grid is given.
  struct Tuning {
    FactorWeights weights;
    std::map<std::string, FactorWeights> per_language;
    std::optional<GridResult> global;
    std::map<std::string, GridResult> grids;
  };
  const Tuning& tuning();

  RunOutput evaluate(std::optional<Factor> drop = std::nullopt);
  Selection select(const std::string& query_id);

  /// Writes results.jsonl, traces.jsonl, summary.json, perf.json and, when
  /// applicable, grid.json and diversity.json into `dir`. Returns the summary.
  nlohmann::json write_outputs(const RunOutput& out, const std::filesystem::path& dir,
                               std::optional<Factor> drop = std::nullopt);

 private:
  RunConfig cfg_;
  Workspace ws_;
  std::unique_ptr<Gateway> gateway_;
  std::optional<PerfTable> perf_;
  std::optional<Tuning> tuning_;
};

struct ValidationInputs {
  std::filesystem::path pool;
  std::vector<std::filesystem::path> queries;
  std::vector<std::filesystem::path> vectors;
  std::filesystem::path lang_registry;
};

/// Cross-checks schema, vector coverage and language registration. Returns
/// one human-readable finding per problem; empty means clean.
std::vector<std::string> validate_inputs(const ValidationInputs& in);

}  // namespace polyshot
