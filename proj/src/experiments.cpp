// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "polyshot/error.hpp"
#include "polyshot/text.hpp"
#include "polyshot/util.hpp"

namespace polyshot {

using json = nlohmann::json;

std::vector<FactorWeights> enumerate_simplex(const GridSpec& grid) {
  if (!(grid.step > 0.0) || grid.step > 1.0) throw ConfigError("grid step must lie in (0, 1]");
  const double inv = 1.0 / grid.step;
  const double n_real = std::round(inv);
  if (std::abs(n_real * grid.step - 1.0) > 1e-9) {
    throw ConfigError("grid step " + std::to_string(grid.step) + " does not divide 1");
  }
  const auto n = static_cast<int>(n_real);
  std::vector<FactorWeights> out;
  out.reserve(static_cast<std::size_t>((n + 1) * (n + 2) / 2));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n - i; ++j) {
      out.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n, static_cast<double>(n - i - j) / n});
    }
  }
  return out;
}

bool exact_match(std::string_view prediction, std::string_view gold, TaskId task, std::span<const Choice> choices) {
  const std::string p = text::normalize_for_match(prediction);
  const std::string g = text::normalize_for_match(gold);
  if (p == g) return true;
  if (task != TaskId::mcsqa) return false;
  for (const auto& c : choices) {
    const std::string label = text::normalize_for_match(c.label);
    const std::string body = text::normalize_for_match(c.text);
    if (g != label && g != body) continue;
    return p == label || p == body || p == text::normalize_for_match(c.label + ". " + c.text);
  }
  return false;
}

// ---------------------------------------------------------------------------

Strategy parse_strategy(std::string_view s) {
  static const std::map<std::string_view, Strategy> kNames = {
      {"multi_factor", Strategy::multi_factor},
      {"random_icl", Strategy::random_icl},
      {"non_icl", Strategy::non_icl},
      {"english_examples", Strategy::english_examples},
      {"random_multilingual", Strategy::random_multilingual},
      {"embedding_high_resource", Strategy::embedding_high_resource},
      {"translate_english", Strategy::translate_english},
      {"pseudo_reference", Strategy::pseudo_reference},
  };
  auto it = kNames.find(s);
  if (it == kNames.end()) throw ConfigError("unknown strategy \"" + std::string(s) + "\"");
  return it->second;
}

std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::multi_factor: return "multi_factor";
    case Strategy::random_icl: return "random_icl";
    case Strategy::non_icl: return "non_icl";
    case Strategy::english_examples: return "english_examples";
    case Strategy::random_multilingual: return "random_multilingual";
    case Strategy::embedding_high_resource: return "embedding_high_resource";
    case Strategy::translate_english: return "translate_english";
    case Strategy::pseudo_reference: return "pseudo_reference";
  }
  return "?";
}

std::set<std::string> default_high_resource_languages(TaskId task) {
  if (task == TaskId::mcsqa) return {"de", "en", "zh"};
  return {"ar", "en"};
}

namespace {

template <typename Pred>
Selection random_selection(const QueryInstance& q, const ExamplePool& pool, Pred admit, const StrategyConfig& cfg) {
  std::vector<const ExampleRecord*> candidates;
  for (const auto& r : pool.records()) {
    if (r.id != q.id && admit(r)) candidates.push_back(&r);
  }
  if (candidates.size() < cfg.k) {
    throw ValidationError(std::string(strategy_name(cfg.strategy)) + ": only " + std::to_string(candidates.size()) +
                          " candidates for query \"" + q.id + "\", need " + std::to_string(cfg.k));
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const ExampleRecord* a, const ExampleRecord* b) { return a->id < b->id; });
  Selection sel;
  sel.trace.query_id = q.id;
  sel.trace.query_language = q.language;
  sel.trace.strategy = std::string(strategy_name(cfg.strategy));
  for (std::size_t i : sample_indices(candidates.size(), cfg.k, derive_seed(cfg.seed, q.id))) {
    sel.examples.push_back(*candidates[i]);
    sel.trace.selected_ids.push_back(candidates[i]->id);
    sel.trace.selected_languages.push_back(candidates[i]->language);
  }
  return sel;
}

Selection scored_selection(const QueryInstance& q, const ScoringContext& ctx, const StrategyConfig& cfg,
                           CandidateFilter filter) {
  SelectionOptions opts;
  opts.k = cfg.k;
  opts.order = cfg.order;
  opts.filter = std::move(filter);
  auto sel = select_with_trace(q, ctx, opts);
  sel.trace.strategy = std::string(strategy_name(cfg.strategy));
  return sel;
}

}  // namespace

Selection select_for(const QueryInstance& query, const ScoringContext& ctx, const StrategyConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::multi_factor: {
      CandidateFilter f;
      f.allowed_languages = cfg.allowed_languages;
      if (!cfg.include_target_language) f.excluded_languages.insert(query.language);
      return scored_selection(query, ctx, cfg, std::move(f));
    }
    case Strategy::embedding_high_resource: {
      CandidateFilter f;
      f.allowed_languages = cfg.allowed_languages;
      if (!f.allowed_languages) throw ConfigError("embedding_high_resource needs allowed_languages");
      return scored_selection(query, ctx.with_weights({1.0, 0.0, 0.0}), cfg, std::move(f));
    }
    case Strategy::random_icl:
      return random_selection(
          query, ctx.pool(), [&](const ExampleRecord& r) { return r.language == query.language; }, cfg);
    case Strategy::english_examples:
      return random_selection(
          query, ctx.pool(), [&](const ExampleRecord& r) { return r.language == cfg.english_code; }, cfg);
    case Strategy::random_multilingual:
      return random_selection(
          query, ctx.pool(), [&](const ExampleRecord& r) { return r.language != query.language; }, cfg);
    case Strategy::non_icl: {
      Selection sel;
      sel.trace.query_id = query.id;
      sel.trace.query_language = query.language;
      sel.trace.strategy = "non_icl";
      return sel;
    }
    case Strategy::translate_english:
    case Strategy::pseudo_reference:
      throw ConfigError(std::string(strategy_name(cfg.strategy)) + " requires external translation backend");
  }
  throw ConfigError("unhandled strategy");
}

// ---------------------------------------------------------------------------

RunOutput run_config(std::span<const QueryInstance> queries, const ScoringContext& ctx, Gateway& gateway,
                     const RunOptions& opts) {
  if (opts.strategy.strategy == Strategy::translate_english || opts.strategy.strategy == Strategy::pseudo_reference) {
    throw ConfigError(std::string(strategy_name(opts.strategy.strategy)) + " requires external translation backend");
  }
  std::vector<const QueryInstance*> order;
  order.reserve(queries.size());
  for (const auto& q : queries) {
    if (!q.gold || q.gold->empty()) throw ValidationError("query \"" + q.id + "\" has no gold answer");
    order.push_back(&q);
  }
  std::sort(order.begin(), order.end(), [](const QueryInstance* a, const QueryInstance* b) { return a->id < b->id; });

  TaskSpec task = opts.task;
  if (opts.strategy.strategy == Strategy::non_icl) task.k = 0;
  validate_task(task);
  StrategyConfig cfg = opts.strategy;
  cfg.k = task.k;

  std::map<std::string, ScoringContext> per_language;
  if (cfg.strategy == Strategy::multi_factor) {
    for (const auto& [lang, w] : opts.language_weights) per_language.emplace(lang, ctx.with_weights(w));
  }

  RunOutput out;
  out.instances.resize(order.size());
  out.traces.resize(order.size());
  parallel_for(order.size(), opts.jobs, [&](std::size_t i) {
    const QueryInstance& q = *order[i];
    auto it = per_language.find(q.language);
    const ScoringContext& qctx = it == per_language.end() ? ctx : it->second;
    Selection sel = select_for(q, qctx, cfg);
    const std::string prompt = build_prompt(task, sel.examples, q, opts.prompt);

    InstanceRecord& rec = out.instances[i];
    rec.query_id = q.id;
    rec.language = q.language;
    rec.gold = *q.gold;
    try {
      rec.prediction = gateway.complete(prompt);
      rec.correct = exact_match(rec.prediction, rec.gold, task.task, q.choices);
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.traces[i] = std::move(sel.trace);
  });
  out.result = eval_result_from(out.instances, opts.label);
  return out;
}

RunOutput ablation_run(std::span<const QueryInstance> queries, const ScoringContext& ctx, Gateway& gateway,
                       const RunOptions& opts, Factor drop) {
  RunOptions o = opts;
  for (auto& [lang, w] : o.language_weights) w = ablate(w, drop);
  if (o.label.empty()) o.label = "ablate-" + std::string(factor_name(drop));
  return run_config(queries, ctx.with_weights(ablate(ctx.weights(), drop)), gateway, o);
}

GridResult grid_search_weights(std::span<const QueryInstance> dev, const ScoringContext& ctx, Gateway& gateway,
                               const RunOptions& opts, const GridSpec& grid) {
  if (dev.empty()) throw ValidationError("grid search needs a non-empty dev split");
  if (opts.strategy.strategy != Strategy::multi_factor) throw ConfigError("grid search applies to multi_factor only");
  RunOptions o = opts;
  o.language_weights.clear();
  GridResult g;
  bool first = true;
  for (const auto& w : enumerate_simplex(grid)) {
    const double acc = run_config(dev, ctx.with_weights(w), gateway, o).result.accuracy;
    g.table.push_back({w, acc});
    if (first || acc > g.best_accuracy) {
      g.best = w;
      g.best_accuracy = acc;
      first = false;
    }
  }
  return g;
}

std::map<std::string, GridResult> grid_search_per_language(std::span<const QueryInstance> dev,
                                                           const ScoringContext& ctx, Gateway& gateway,
                                                           const RunOptions& opts, const GridSpec& grid) {
  std::map<std::string, std::vector<QueryInstance>> by_lang;
  for (const auto& q : dev) by_lang[q.language].push_back(q);
  std::map<std::string, GridResult> out;
  for (const auto& [lang, qs] : by_lang) out.emplace(lang, grid_search_weights(qs, ctx, gateway, opts, grid));
  return out;
}

// ---------------------------------------------------------------------------

double chi2_sf_1(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

double binomial_two_sided(std::size_t low, std::size_t n) {
  if (n == 0) return 1.0;
  low = std::min(low, n - low);
  const double ln2 = std::log(2.0);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  double tail = 0.0;
  for (std::size_t i = 0; i <= low; ++i) {
    const double lc = lgn - std::lgamma(static_cast<double>(i) + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0);
    tail += std::exp(lc - static_cast<double>(n) * ln2);
  }
  return std::min(1.0, 2.0 * tail);
}

McNemarResult mcnemar_counts(std::size_t b01, std::size_t b10) {
  McNemarResult r;
  r.b01 = b01;
  r.b10 = b10;
  const std::size_t n = b01 + b10;
  if (n == 0) return r;
  const double d = std::abs(static_cast<double>(b01) - static_cast<double>(b10));
  r.statistic = (d - 1.0) * (d - 1.0) / static_cast<double>(n);
  const double c = std::max(0.0, d - 1.0);
  r.p = chi2_sf_1(c * c / static_cast<double>(n));
  r.p_exact = binomial_two_sided(std::min(b01, b10), n);
  return r;
}

McNemarResult mcnemar(const EvalResult& a, const EvalResult& b) {
  if (a.per_instance.size() != b.per_instance.size()) {
    throw ValidationError("results are misaligned: " + std::to_string(a.per_instance.size()) + " vs " +
                          std::to_string(b.per_instance.size()) + " instances");
  }
  std::size_t b01 = 0, b10 = 0;
  for (std::size_t i = 0; i < a.per_instance.size(); ++i) {
    const auto& x = a.per_instance[i];
    const auto& y = b.per_instance[i];
    if (x.query_id != y.query_id) {
      throw ValidationError("results are misaligned at position " + std::to_string(i) + ": \"" + x.query_id +
                            "\" vs \"" + y.query_id + "\"");
    }
    if (x.correct && !y.correct) ++b01;
    if (!x.correct && y.correct) ++b10;
  }
  return mcnemar_counts(b01, b10);
}

// ---------------------------------------------------------------------------

DiversityHistogram diversity_histogram(std::span<const SelectionTrace> traces, std::size_t k) {
  if (traces.empty()) throw ValidationError("diversity histogram needs at least one trace");
  if (k == 0) throw ValidationError("diversity histogram needs k >= 1");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& t : traces) {
    if (t.selected_languages.size() != k) {
      throw ValidationError("trace for \"" + t.query_id + "\" has " + std::to_string(t.selected_languages.size()) +
                            " selections, expected " + std::to_string(k));
    }
    std::set<std::string> distinct(t.selected_languages.begin(), t.selected_languages.end());
    ++counts[distinct.size()];
  }
  DiversityHistogram h;
  for (const auto& [n, c] : counts) h[n] = static_cast<double>(c) / static_cast<double>(traces.size());
  return h;
}

// ---------------------------------------------------------------------------

json instance_json(const InstanceRecord& r) {
  json j = {{"query_id", r.query_id}, {"language", r.language}, {"prediction", r.prediction},
            {"gold", r.gold},         {"correct", r.correct},   {"failed", r.failed}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::string serialize_results(std::span<const InstanceRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += instance_json(r).dump();
    out += '\n';
  }
  return out;
}

namespace {

template <typename F>
void for_each_line(std::string_view jsonl, std::string_view what, F fn) {
  std::size_t line_no = 0, pos = 0;
  while (pos < jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<InstanceRecord> parse_results(std::string_view jsonl) {
  std::vector<InstanceRecord> out;
  for_each_line(jsonl, "results", [&](const json& j) {
    InstanceRecord r;
    r.query_id = j.at("query_id").get<std::string>();
    r.language = j.value("language", "");
    r.prediction = j.value("prediction", "");
    r.gold = j.value("gold", "");
    r.correct = j.at("correct").get<bool>();
    r.failed = j.value("failed", false);
    r.error = j.value("error", "");
    out.push_back(std::move(r));
  });
  return out;
}

EvalResult eval_result_from(std::span<const InstanceRecord> records, std::string label) {
  EvalResult r;
  r.config_label = std::move(label);
  for (const auto& rec : records) {
    r.per_instance.push_back({rec.query_id, rec.correct});
    if (rec.failed) ++r.failures;
  }
  r.finalize();
  return r;
}

json trace_json(const SelectionTrace& t) {
  json selected = json::array();
  for (const auto& c : t.candidates) {
    if (!c.selected) continue;
    selected.push_back({{"id", c.scores.record_id},
                        {"language", c.language},
                        {"sem", c.scores.score_sem},
                        {"lag", c.scores.score_lag},
                        {"per", c.scores.score_per},
                        {"combined", c.scores.combined}});
  }
  return {{"query_id", t.query_id},
          {"query_language", t.query_language},
          {"strategy", t.strategy},
          {"selected_ids", t.selected_ids},
          {"selected_languages", t.selected_languages},
          {"scores", selected}};
}

std::string serialize_traces(std::span<const SelectionTrace> traces) {
  std::string out;
  for (const auto& t : traces) {
    out += trace_json(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<SelectionTrace> parse_traces(std::string_view jsonl) {
  std::vector<SelectionTrace> out;
  for_each_line(jsonl, "traces", [&](const json& j) {
    SelectionTrace t;
    t.query_id = j.at("query_id").get<std::string>();
    t.query_language = j.value("query_language", "");
    t.strategy = j.value("strategy", "");
    t.selected_ids = j.at("selected_ids").get<std::vector<std::string>>();
    t.selected_languages = j.at("selected_languages").get<std::vector<std::string>>();
    for (const auto& s : j.value("scores", json::array())) {
      TraceEntry e;
      e.scores.record_id = s.at("id").get<std::string>();
      e.language = s.value("language", "");
      e.scores.score_sem = s.value("sem", 0.0);
      e.scores.score_lag = s.value("lag", 0.0);
      e.scores.score_per = s.value("per", 0.0);
      e.scores.combined = s.value("combined", 0.0);
      e.selected = true;
      t.candidates.push_back(std::move(e));
    }
    out.push_back(std::move(t));
  });
  return out;
}

json weights_json(const FactorWeights& w) { return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}}; }

json grid_json(const GridResult& g) {
  json table = json::array();
  for (const auto& p : g.table) {
    json row = weights_json(p.weights);
    row["accuracy"] = p.accuracy;
    table.push_back(row);
  }
  return {{"best", weights_json(g.best)}, {"best_accuracy", g.best_accuracy}, {"table", table}};
}

json diversity_json(const DiversityHistogram& h) {
  json j = json::object();
  for (const auto& [n, share] : h) j[std::to_string(n)] = share;
  return j;
}

}  // namespace polyshot
