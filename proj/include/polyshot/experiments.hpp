// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "polyshot/datamodel.hpp"
#include "polyshot/llm_gateway.hpp"
#include "polyshot/prompting.hpp"
#include "polyshot/scoring.hpp"

namespace polyshot {

// ---------------------------------------------------------------------------
// Weight grid

struct GridSpec {
  double step = 0.1;
};

/// Every (alpha, beta, gamma) on the simplex lattice of the given step, alpha
/// major, beta minor. Throws ConfigError unless 1/step is an integer within 1e-9.
std::vector<FactorWeights> enumerate_simplex(const GridSpec& grid);

// ---------------------------------------------------------------------------
// Grading

/// NFC, trim, casefold and whitespace collapse on both sides, then equality.
/// For multiple-choice items the gold letter, the gold choice text and
/// "<letter>. <text>" are all accepted.
bool exact_match(std::string_view prediction, std::string_view gold, TaskId task,
                 std::span<const Choice> choices = {});

// ---------------------------------------------------------------------------
// Strategies

enum class Strategy {
  multi_factor,
  random_icl,               // random examples of the query's language
  non_icl,                  // no examples
  english_examples,         // random English examples
  random_multilingual,      // random examples from every language but the query's
  embedding_high_resource,  // semantic top-k within a fixed high-resource language set
  translate_english,        // needs a translation backend; not provided
  pseudo_reference,         // needs a translation backend; not provided
};

Strategy parse_strategy(std::string_view s);
std::string_view strategy_name(Strategy s) noexcept;

struct StrategyConfig {
  Strategy strategy = Strategy::multi_factor;
  std::size_t k = 8;
  std::uint64_t seed = 0;
  ExampleOrder order = ExampleOrder::ascending;
  /// multi_factor only: false drops candidates in the query's language.
  bool include_target_language = true;
  /// Restricts multi_factor candidates; defines the embedding_high_resource set.
  std::optional<std::set<std::string>> allowed_languages;
  std::string english_code = "en";
};

/// Default high-resource set of embedding_high_resource for a task.
std::set<std::string> default_high_resource_languages(TaskId task);

/// Examples (prompt order) chosen by the configured strategy, with a trace.
Selection select_for(const QueryInstance& query, const ScoringContext& ctx, const StrategyConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation

struct RunOptions {
  StrategyConfig strategy;
  TaskSpec task;
  PromptOptions prompt;
  /// Per target language weights overriding the context's (multi_factor only).
  std::map<std::string, FactorWeights> language_weights;
  std::size_t jobs = 1;
  std::string label;
};

struct InstanceRecord {
  std::string query_id;
  std::string language;
  std::string prediction;
  std::string gold;
  bool correct = false;
  bool failed = false;
  std::string error;

  bool operator==(const InstanceRecord&) const = default;
};

struct RunOutput {
  EvalResult result;
  std::vector<InstanceRecord> instances;  // ordered by query id
  std::vector<SelectionTrace> traces;     // ordered by query id
};

/// Select, prompt, complete and grade every query. Model failures mark the
/// instance incorrect and are counted in result.failures; anything else
/// propagates.
RunOutput run_config(std::span<const QueryInstance> queries, const ScoringContext& ctx, Gateway& gateway,
                     const RunOptions& opts);

/// run_config with one factor zeroed and the others left as they are.
RunOutput ablation_run(std::span<const QueryInstance> queries, const ScoringContext& ctx, Gateway& gateway,
                       const RunOptions& opts, Factor drop);

struct GridPoint {
  FactorWeights weights;
  double accuracy = 0.0;
};

struct GridResult {
  FactorWeights best;
  double best_accuracy = 0.0;
  std::vector<GridPoint> table;  // enumerate_simplex order
};

/// Dev-accuracy maximizer over the simplex grid; ties go to the earliest
/// triple. Triples run one after another so identical prompts hit the cache.
GridResult grid_search_weights(std::span<const QueryInstance> dev, const ScoringContext& ctx, Gateway& gateway,
                               const RunOptions& opts, const GridSpec& grid);

/// grid_search_weights separately for each language present in `dev`.
std::map<std::string, GridResult> grid_search_per_language(std::span<const QueryInstance> dev,
                                                           const ScoringContext& ctx, Gateway& gateway,
                                                           const RunOptions& opts, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Significance

struct McNemarResult {
  std::size_t b01 = 0;  // a correct, b wrong
  std::size_t b10 = 0;  // a wrong, b correct
  double statistic = 0.0;
  double p = 1.0;        // chi-square(1) tail
  double p_exact = 1.0;  // two-sided binomial at 0.5
};

/// Continuity-corrected statistic (|b01 - b10| - 1)^2 / (b01 + b10). p is its
/// chi-square(1) tail with the correction floored at zero, so b01 == b10
/// gives p = 1. The exact binomial p is reported alongside for small counts.
McNemarResult mcnemar_counts(std::size_t b01, std::size_t b10);

/// Throws ValidationError unless both results list the same ids in the same order.
McNemarResult mcnemar(const EvalResult& a, const EvalResult& b);

/// Upper tail of chi-square with one degree of freedom.
double chi2_sf_1(double x);

/// Two-sided exact binomial p for `low` successes out of n at 0.5.
double binomial_two_sided(std::size_t low, std::size_t n);

// ---------------------------------------------------------------------------
// Language diversity

/// key: distinct languages among an instance's k examples; value: share of instances.
using DiversityHistogram = std::map<std::size_t, double>;

DiversityHistogram diversity_histogram(std::span<const SelectionTrace> traces, std::size_t k);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json instance_json(const InstanceRecord& r);
std::string serialize_results(std::span<const InstanceRecord> records);
std::vector<InstanceRecord> parse_results(std::string_view jsonl);
EvalResult eval_result_from(std::span<const InstanceRecord> records, std::string label = {});

nlohmann::json trace_json(const SelectionTrace& t);
std::string serialize_traces(std::span<const SelectionTrace> traces);
std::vector<SelectionTrace> parse_traces(std::string_view jsonl);

nlohmann::json weights_json(const FactorWeights& w);
nlohmann::json grid_json(const GridResult& g);
nlohmann::json diversity_json(const DiversityHistogram& h);

}  // namespace polyshot
