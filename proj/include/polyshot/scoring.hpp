// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "polyshot/datamodel.hpp"
#include "polyshot/langfeatures.hpp"
#include "polyshot/vectorstore.hpp"

namespace polyshot {

enum class Normalization { raw, minmax };

/// Position of the best example inside the prompt.
///  ascending  - lowest score first, best example adjacent to the query
///  descending - best example first
///  selection  - the order the strategy produced (rank order for scored ones)
enum class ExampleOrder { ascending, descending, selection };

Normalization parse_normalization(std::string_view s);
ExampleOrder parse_order(std::string_view s);
std::string_view normalization_name(Normalization n) noexcept;
std::string_view order_name(ExampleOrder o) noexcept;

/// Everything the weighted scorer reads. Holds non-owning references; the
/// referenced pool, matrix and registry must outlive the context.
class ScoringContext {
 public:
  ScoringContext(FactorWeights weights, const ExamplePool& pool, const EmbeddingMatrix& embeddings,
                 const LanguageRegistry& registry, std::map<std::string, double> perf_table,
                 Normalization normalization = Normalization::raw);

  /// Same inputs, different weights.
  ScoringContext with_weights(FactorWeights w) const;
  ScoringContext with_perf_table(std::map<std::string, double> perf_table) const;

  const FactorWeights& weights() const noexcept { return weights_; }
  const ExamplePool& pool() const noexcept { return *pool_; }
  const EmbeddingMatrix& embeddings() const noexcept { return *embeddings_; }
  const LanguageRegistry& registry() const noexcept { return *registry_; }
  const std::map<std::string, double>& perf_table() const noexcept { return perf_table_; }
  Normalization normalization() const noexcept { return normalization_; }

  /// Raw per(l); throws LookupError when the language has no entry.
  double perf(std::string_view language) const;

 private:
  FactorWeights weights_;
  const ExamplePool* pool_;
  const EmbeddingMatrix* embeddings_;
  const LanguageRegistry* registry_;
  std::map<std::string, double> perf_table_;
  Normalization normalization_;
};

/// Which pool records may be selected. The query's own id is always excluded.
struct CandidateFilter {
  std::optional<std::set<std::string>> allowed_languages;
  std::set<std::string> excluded_languages;

  bool admits(const ExampleRecord& r) const;
};

struct SelectionOptions {
  std::size_t k = 8;
  bool allow_short = false;  // return fewer than k instead of failing
  ExampleOrder order = ExampleOrder::ascending;
  CandidateFilter filter;
};

/// Cosine between the query's and the candidate's sentence embeddings.
double semantic_score(const QueryInstance& query, const ExampleRecord& candidate, const ScoringContext& ctx);

/// Typological alignment between the query's and the candidate's languages.
double alignment_score(const QueryInstance& query, const ExampleRecord& candidate, const ScoringContext& ctx);

/// per(l) of the candidate's language; min-max scaled over the pool's
/// languages when the context asks for it.
double performance_score(const ExampleRecord& candidate, const ScoringContext& ctx);

/// alpha*sem + beta*lag + gamma*per. In minmax mode each factor is scaled over
/// every pool record except the query itself.
ScoredExample combined_score(const QueryInstance& query, const ExampleRecord& candidate, const ScoringContext& ctx);

/// Factor scores of every admissible candidate, in pool order.
std::vector<ScoredExample> score_candidates(const QueryInstance& query, const ScoringContext& ctx,
                                            const CandidateFilter& filter = {});

/// Recomputes `combined` under w and sorts best-first: combined descending,
/// record id ascending on ties. This is the whole ranking rule.
void rank_scored(std::vector<ScoredExample>& scored, const FactorWeights& w);

/// Re-orders a best-first list for prompt placement.
template <typename T>
std::vector<T> arrange(std::vector<T> best_first, ExampleOrder order) {
  if (order == ExampleOrder::ascending) return {best_first.rbegin(), best_first.rend()};
  return best_first;
}

struct TraceEntry {
  ScoredExample scores;
  std::string language;
  bool selected = false;
};

/// Full account of one selection. `selected_ids` is in prompt order.
struct SelectionTrace {
  std::string query_id;
  std::string query_language;
  std::string strategy;
  std::vector<TraceEntry> candidates;  // empty for unscored strategies
  std::vector<std::string> selected_ids;
  std::vector<std::string> selected_languages;
};

struct Selection {
  std::vector<ExampleRecord> examples;  // prompt order
  SelectionTrace trace;
};

/// Top-k by combined score. Throws ValidationError when fewer than k
/// candidates remain and allow_short is off.
Selection select_with_trace(const QueryInstance& query, const ScoringContext& ctx, const SelectionOptions& opts);
std::vector<ExampleRecord> select_examples(const QueryInstance& query, const ScoringContext& ctx,
                                           const SelectionOptions& opts);

}  // namespace polyshot
