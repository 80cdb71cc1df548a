// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/scoring.hpp"

#include <algorithm>
#include <limits>

#include "polyshot/error.hpp"

namespace polyshot {

Normalization parse_normalization(std::string_view s) {
  if (s == "raw") return Normalization::raw;
  if (s == "minmax") return Normalization::minmax;
  throw ConfigError("unknown normalization \"" + std::string(s) + "\" (expected raw or minmax)");
}

ExampleOrder parse_order(std::string_view s) {
  if (s == "ascending") return ExampleOrder::ascending;
  if (s == "descending") return ExampleOrder::descending;
  if (s == "selection") return ExampleOrder::selection;
  throw ConfigError("unknown order \"" + std::string(s) + "\" (expected ascending, descending or selection)");
}

std::string_view normalization_name(Normalization n) noexcept { return n == Normalization::raw ? "raw" : "minmax"; }

std::string_view order_name(ExampleOrder o) noexcept {
  switch (o) {
    case ExampleOrder::ascending: return "ascending";
    case ExampleOrder::descending: return "descending";
    case ExampleOrder::selection: return "selection";
  }
  return "?";
}

ScoringContext::ScoringContext(FactorWeights weights, const ExamplePool& pool, const EmbeddingMatrix& embeddings,
                               const LanguageRegistry& registry, std::map<std::string, double> perf_table,
                               Normalization normalization)
    : weights_(weights),
      pool_(&pool),
      embeddings_(&embeddings),
      registry_(&registry),
      perf_table_(std::move(perf_table)),
      normalization_(normalization) {
  validate_weights(weights_, true);
  for (const auto& lang : pool.languages()) {
    if (!perf_table_.contains(lang)) throw ValidationError("performance table has no entry for pool language \"" + lang + "\"");
  }
}

ScoringContext ScoringContext::with_weights(FactorWeights w) const {
  ScoringContext c = *this;
  validate_weights(w, true);
  c.weights_ = w;
  return c;
}

ScoringContext ScoringContext::with_perf_table(std::map<std::string, double> perf_table) const {
  return ScoringContext(weights_, *pool_, *embeddings_, *registry_, std::move(perf_table), normalization_);
}

double ScoringContext::perf(std::string_view language) const {
  auto it = perf_table_.find(std::string(language));
  if (it == perf_table_.end()) throw LookupError("no performance score for language \"" + std::string(language) + "\"");
  return it->second;
}

bool CandidateFilter::admits(const ExampleRecord& r) const {
  if (allowed_languages && !allowed_languages->contains(r.language)) return false;
  return !excluded_languages.contains(r.language);
}

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // A degenerate range maps everything to 0.
  double scale(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
};

double weighted(const FactorWeights& w, double sem, double lag, double per) {
  return w.alpha * sem + w.beta * lag + w.gamma * per;
}

ScoredExample raw_scores(const QueryInstance& q, const ExampleRecord& c, const ScoringContext& ctx) {
  ScoredExample s;
  s.record_id = c.id;
  s.score_sem = semantic_score(q, c, ctx);
  s.score_lag = alignment_score(q, c, ctx);
  s.score_per = ctx.perf(c.language);
  return s;
}

void normalize_in_place(std::vector<ScoredExample>& scored) {
  Range sem, lag, per;
  for (const auto& s : scored) {
    sem.add(s.score_sem);
    lag.add(s.score_lag);
    per.add(s.score_per);
  }
  for (auto& s : scored) {
    s.score_sem = sem.scale(s.score_sem);
    s.score_lag = lag.scale(s.score_lag);
    s.score_per = per.scale(s.score_per);
  }
}

}  // namespace

double semantic_score(const QueryInstance& query, const ExampleRecord& candidate, const ScoringContext& ctx) {
  return ctx.embeddings().cosine_keys(query.embedding_ref.empty() ? query.id : query.embedding_ref,
                                      candidate.embedding_ref.empty() ? candidate.id : candidate.embedding_ref);
}

double alignment_score(const QueryInstance& query, const ExampleRecord& candidate, const ScoringContext& ctx) {
  return ctx.registry().score(query.language, candidate.language);
}

double performance_score(const ExampleRecord& candidate, const ScoringContext& ctx) {
  const double v = ctx.perf(candidate.language);
  if (ctx.normalization() == Normalization::raw) return v;
  Range r;
  for (const auto& lang : ctx.pool().languages()) r.add(ctx.perf(lang));
  return r.scale(v);
}

std::vector<ScoredExample> score_candidates(const QueryInstance& query, const ScoringContext& ctx,
                                            const CandidateFilter& filter) {
  std::vector<ScoredExample> out;
  out.reserve(ctx.pool().size());
  for (const auto& r : ctx.pool().records()) {
    if (r.id == query.id || !filter.admits(r)) continue;
    out.push_back(raw_scores(query, r, ctx));
  }
  if (ctx.normalization() == Normalization::minmax) normalize_in_place(out);
  const auto& w = ctx.weights();
  for (auto& s : out) s.combined = weighted(w, s.score_sem, s.score_lag, s.score_per);
  return out;
}

ScoredExample combined_score(const QueryInstance& query, const ExampleRecord& candidate, const ScoringContext& ctx) {
  if (ctx.normalization() == Normalization::raw) {
    ScoredExample s = raw_scores(query, candidate, ctx);
    s.combined = weighted(ctx.weights(), s.score_sem, s.score_lag, s.score_per);
    return s;
  }
  auto all = score_candidates(query, ctx);
  auto it = std::find_if(all.begin(), all.end(), [&](const ScoredExample& s) { return s.record_id == candidate.id; });
  if (it == all.end()) throw LookupError("candidate \"" + candidate.id + "\" is not a selectable pool record");
  return *it;
}

void rank_scored(std::vector<ScoredExample>& scored, const FactorWeights& w) {
  for (auto& s : scored) s.combined = weighted(w, s.score_sem, s.score_lag, s.score_per);
  std::sort(scored.begin(), scored.end(), [](const ScoredExample& a, const ScoredExample& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.record_id < b.record_id;
  });
}

Selection select_with_trace(const QueryInstance& query, const ScoringContext& ctx, const SelectionOptions& opts) {
  if (ctx.pool().empty()) throw ValidationError("cannot select examples from an empty pool");
  auto scored = score_candidates(query, ctx, opts.filter);
  if (opts.k > scored.size() && !opts.allow_short) {
    throw ValidationError("k=" + std::to_string(opts.k) + " exceeds the " + std::to_string(scored.size()) +
                          " selectable candidates for query \"" + query.id + "\"");
  }
  rank_scored(scored, ctx.weights());
  const std::size_t take = std::min(opts.k, scored.size());

  Selection sel;
  sel.trace.query_id = query.id;
  sel.trace.query_language = query.language;
  sel.trace.strategy = "multi_factor";
  std::vector<ExampleRecord> best_first;
  best_first.reserve(take);
  sel.trace.candidates.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const ExampleRecord* rec = ctx.pool().find(scored[i].record_id);
    if (i < take) best_first.push_back(*rec);
    sel.trace.candidates.push_back({scored[i], rec->language, i < take});
  }
  sel.examples = arrange(std::move(best_first), opts.order);
  for (const auto& e : sel.examples) {
    sel.trace.selected_ids.push_back(e.id);
    sel.trace.selected_languages.push_back(e.language);
  }
  return sel;
}

std::vector<ExampleRecord> select_examples(const QueryInstance& query, const ScoringContext& ctx,
                                           const SelectionOptions& opts) {
  return select_with_trace(query, ctx, opts).examples;
}

}  // namespace polyshot
