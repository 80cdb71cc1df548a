// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "polyshot/error.hpp"
#include "polyshot/scoring.hpp"
#include "toy.hpp"

using namespace polyshot;
using namespace polyshot::testing;

namespace {

struct Fixture {
  ExamplePool pool;
  EmbeddingMatrix emb{3};
  LanguageRegistry reg = toy_registry();
  std::map<std::string, double> perf{{"en", -0.5}, {"ja", -1.2}, {"de", -0.8}};

  Fixture() {
    pool.add(record("en-1", "en"));
    pool.add(record("en-2", "en"));
    pool.add(record("ja-1", "ja"));
    pool.add(record("de-1", "de"));
    emb.add("q", {1, 2, 2});
    emb.add("en-1", {2, 1, 2});
    emb.add("en-2", {1, 2, 2});
    emb.add("ja-1", {0, 1, 0});
    emb.add("de-1", {1, 0, 0});
  }
  ScoringContext ctx(FactorWeights w, Normalization n = Normalization::raw) const {
    return ScoringContext(w, pool, emb, reg, perf, n);
  }
};

std::vector<std::string> ids(const std::vector<ExampleRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.id);
  return out;
}

}  // namespace

TEST(Semantic, Examples) {
  Fixture f;
  const auto c = f.ctx({1, 0, 0});
  const auto q = query("q", "en");
  EXPECT_EQ(semantic_score(q, *f.pool.find("en-2"), c), 1.0);
  EXPECT_NEAR(semantic_score(q, *f.pool.find("en-1"), c), 8.0 / 9.0, 1e-15);
  EmbeddingMatrix orth(3);
  orth.add("q", {1, 0, 0});
  orth.add("en-1", {0, 1, 0});
  ExamplePool p1;
  p1.add(record("en-1", "en"));
  const ScoringContext c2({1, 0, 0}, p1, orth, f.reg, {{"en", 0.0}});
  EXPECT_EQ(semantic_score(q, p1.at(0), c2), 0.0);
}

TEST(Semantic, MissingEmbedding) {
  Fixture f;
  EXPECT_THROW(semantic_score(query("nope", "en"), f.pool.at(0), f.ctx({1, 0, 0})), LookupError);
}

TEST(Performance, TableLookupAndMinmax) {
  ExamplePool pool;
  pool.add(record("en-1", "en"));
  pool.add(record("ja-1", "ja"));
  EmbeddingMatrix emb(1);
  emb.add("en-1", {1});
  emb.add("ja-1", {1});
  const auto reg = toy_registry();
  const std::map<std::string, double> perf{{"en", -0.5}, {"ja", -1.2}};
  const ScoringContext raw({0, 0, 1}, pool, emb, reg, perf);
  EXPECT_EQ(performance_score(pool.at(0), raw), -0.5);
  const ScoringContext mm({0, 0, 1}, pool, emb, reg, perf, Normalization::minmax);
  EXPECT_EQ(performance_score(pool.at(0), mm), 1.0);
  EXPECT_EQ(performance_score(pool.at(1), mm), 0.0);
  EXPECT_THROW(performance_score(record("xx-1", "xx"), raw), LookupError);
}

TEST(Context, PerfTableMustCoverPool) {
  Fixture f;
  EXPECT_THROW(ScoringContext({1, 0, 0}, f.pool, f.emb, f.reg, {{"en", -1.0}}), ValidationError);
}

TEST(Combined, VertexEqualsSemantic) {
  Fixture f;
  const auto c = f.ctx({1, 0, 0});
  const auto q = query("q", "en");
  for (const auto& r : f.pool.records()) EXPECT_EQ(combined_score(q, r, c).combined, semantic_score(q, r, c));
}

TEST(Combined, HandArithmetic) {
  // sub-scores (0.5, 0.8, -0.2) under (0.4, 0.4, 0.2): 0.2 + 0.32 - 0.04 = 0.48
  std::vector<ScoredExample> one{{"x", 0.5, 0.8, -0.2, 0.0}};
  rank_scored(one, {0.4, 0.4, 0.2});
  EXPECT_NEAR(one[0].combined, 0.48, 1e-12);
}

TEST(Combined, PerOnlySameLanguageTies) {
  Fixture f;
  const auto c = f.ctx({0, 0, 1});
  const auto q = query("q", "ja");
  EXPECT_EQ(combined_score(q, *f.pool.find("en-1"), c).combined, combined_score(q, *f.pool.find("en-2"), c).combined);
}

TEST(Combined, RecordsSubScores) {
  Fixture f;
  const auto c = f.ctx({0.4, 0.4, 0.2});
  const auto s = combined_score(query("q", "en"), *f.pool.find("de-1"), c);
  EXPECT_NEAR(s.score_sem, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.score_lag, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.score_per, -0.8);
  EXPECT_NEAR(s.combined, 0.4 * s.score_sem + 0.4 * s.score_lag + 0.2 * s.score_per, 1e-12);
}

TEST(Select, FullPoolOrderedAscending) {
  Fixture f;
  SelectionOptions o;
  o.k = 4;
  const auto sel = select_examples(query("q", "en"), f.ctx({1, 0, 0}), o);
  // best (en-2, cos 1) must sit last, next to the query
  EXPECT_EQ(ids(sel), (std::vector<std::string>{"de-1", "ja-1", "en-1", "en-2"}));
  o.order = ExampleOrder::descending;
  EXPECT_EQ(ids(select_examples(query("q", "en"), f.ctx({1, 0, 0}), o)),
            (std::vector<std::string>{"en-2", "en-1", "ja-1", "de-1"}));
}

TEST(Select, TieGoesToSmallerId) {
  ExamplePool pool;
  pool.add(record("b", "en"));
  pool.add(record("a", "en"));
  EmbeddingMatrix emb(2);
  emb.add("q", {1, 0});
  emb.add("a", {1, 1});
  emb.add("b", {1, 1});
  const auto reg = toy_registry();
  const ScoringContext c({1, 0, 0}, pool, emb, reg, {{"en", -1.0}});
  SelectionOptions o;
  o.k = 1;
  EXPECT_EQ(select_examples(query("q", "en"), c, o).front().id, "a");
}

TEST(Select, ExcludesQueryAndChecksK) {
  Fixture f;
  SelectionOptions o;
  o.k = 4;
  // query shares id with a pool record: only 3 candidates remain
  EXPECT_THROW(select_examples(query("en-2", "en"), f.ctx({1, 0, 0}), o), ValidationError);
  o.allow_short = true;
  const auto sel = select_examples(query("en-2", "en"), f.ctx({1, 0, 0}), o);
  EXPECT_EQ(sel.size(), 3u);
  for (const auto& r : sel) EXPECT_NE(r.id, "en-2");
}

TEST(Select, EmptyPool) {
  ExamplePool pool;
  EmbeddingMatrix emb(1);
  emb.add("q", {1});
  const auto reg = toy_registry();
  const ScoringContext c({1, 0, 0}, pool, emb, reg, {});
  EXPECT_THROW(select_examples(query("q", "en"), c, {}), ValidationError);
}

TEST(Select, FilterRestrictsLanguages) {
  Fixture f;
  SelectionOptions o;
  o.k = 2;
  o.filter.excluded_languages = {"en"};
  const auto sel = select_examples(query("q", "en"), f.ctx({1, 0, 0}), o);
  for (const auto& r : sel) EXPECT_NE(r.language, "en");
}

TEST(Select, MinmaxScalesPerCandidateList) {
  Fixture f;
  const auto scored = score_candidates(query("q", "en"), f.ctx({0.4, 0.4, 0.2}, Normalization::minmax));
  double lo_sem = 1, hi_sem = 0;
  for (const auto& s : scored) {
    lo_sem = std::min(lo_sem, s.score_sem);
    hi_sem = std::max(hi_sem, s.score_sem);
    EXPECT_GE(s.score_per, 0.0);
    EXPECT_LE(s.score_per, 1.0);
  }
  EXPECT_EQ(lo_sem, 0.0);
  EXPECT_EQ(hi_sem, 1.0);
}

TEST(Select, TraceMatchesSelection) {
  Fixture f;
  SelectionOptions o;
  o.k = 2;
  const auto sel = select_with_trace(query("q", "en"), f.ctx({0.5, 0.3, 0.2}), o);
  EXPECT_EQ(sel.trace.candidates.size(), 4u);
  std::size_t flagged = 0;
  for (const auto& c : sel.trace.candidates) flagged += c.selected;
  EXPECT_EQ(flagged, 2u);
  EXPECT_EQ(sel.trace.selected_ids, ids(sel.examples));
}

// ---------------------------------------------------------------------------
// properties

namespace {

struct RandomWorld {
  ExamplePool pool;
  EmbeddingMatrix emb{4};
  LanguageRegistry reg = toy_registry();
  std::map<std::string, double> perf;

  explicit RandomWorld(std::uint64_t seed, std::size_t n = 40) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> pu(-3.0, 0.0);
    const char* langs[] = {"en", "de", "ja"};
    for (const char* l : langs) perf[l] = pu(rng);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = record("r" + std::to_string(i), langs[rng() % 3]);
      pool.add(r);
      emb.add(r.id, {g(rng), g(rng), g(rng), g(rng)});
    }
    emb.add("q", {g(rng), g(rng), g(rng), g(rng)});
  }
};

}  // namespace

TEST(Properties, ZeroWeightFactorIrrelevant) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    RandomWorld w(s);
    const ScoringContext base({0.6, 0.4, 0.0}, w.pool, w.emb, w.reg, w.perf);
    auto perturbed = w.perf;
    for (auto& [k, v] : perturbed) v -= 5.0 * static_cast<double>(s % 7);
    const auto c2 = base.with_perf_table(perturbed);
    SelectionOptions o;
    o.k = 8;
    EXPECT_EQ(ids(select_examples(query("q", "ja"), base, o)), ids(select_examples(query("q", "ja"), c2, o)));
  }
}

TEST(Properties, AffineTransformOfCombinedKeepsOrder) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    RandomWorld w(s);
    const ScoringContext c({0.5, 0.3, 0.2}, w.pool, w.emb, w.reg, w.perf);
    auto scored = score_candidates(query("q", "de"), c);
    rank_scored(scored, c.weights());
    auto shifted = scored;
    for (auto& x : shifted) x.combined = 2.5 * x.combined + 7.0;
    std::stable_sort(shifted.begin(), shifted.end(), [](const auto& a, const auto& b) {
      return a.combined != b.combined ? a.combined > b.combined : a.record_id < b.record_id;
    });
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(scored[i].record_id, shifted[i].record_id);
  }
}

TEST(Properties, RaisingSemanticNeverLowersRank) {
  RandomWorld w(3);
  const ScoringContext c({0.5, 0.3, 0.2}, w.pool, w.emb, w.reg, w.perf);
  auto scored = score_candidates(query("q", "en"), c);
  auto rank_of = [](std::vector<ScoredExample> v, const std::string& id, const FactorWeights& fw) {
    rank_scored(v, fw);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].record_id == id) return i;
    }
    return v.size();
  };
  for (std::size_t t = 0; t < scored.size(); ++t) {
    const auto before = rank_of(scored, scored[t].record_id, c.weights());
    auto bumped = scored;
    bumped[t].score_sem += 0.3;
    EXPECT_LE(rank_of(bumped, scored[t].record_id, c.weights()), before);
  }
}

TEST(Properties, DeterministicAndOrderIndependent) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    RandomWorld w(s);
    std::vector<ExampleRecord> shuffled = w.pool.records();
    std::mt19937_64 rng(s + 100);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const ExamplePool p2(shuffled);
    const ScoringContext c1({0.2, 0.5, 0.3}, w.pool, w.emb, w.reg, w.perf);
    const ScoringContext c2({0.2, 0.5, 0.3}, p2, w.emb, w.reg, w.perf);
    SelectionOptions o;
    o.k = 10;
    const auto a = ids(select_examples(query("q", "en"), c1, o));
    EXPECT_EQ(a, ids(select_examples(query("q", "en"), c1, o)));
    EXPECT_EQ(a, ids(select_examples(query("q", "en"), c2, o)));
  }
}
