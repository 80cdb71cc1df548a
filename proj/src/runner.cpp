// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/runner.hpp"

#include <cstdlib>

#include "polyshot/error.hpp"
#include "polyshot/util.hpp"

namespace polyshot {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> kKeys = {
      "task",     "dataset_id",   "pool",          "dev",          "test",
      "vectors",  "lang_registry", "langid_model", "model",        "strategy",
      "weights",  "language_weights", "grid",         "tune",          "k",            "seed",
      "perf_cap", "normalization", "template",     "order",        "include_target_language",
      "answer_format", "allowed_languages", "instruction_without_examples", "output_dir", "cache_dir",
      "jobs"};
  return kKeys;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw ConfigError(std::string("config needs string \"") + key + "\"");
  return j[key].get<std::string>();
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known_keys().contains(it.key())) throw ConfigError("unknown config key \"" + it.key() + "\"");
  }
  RunConfig c;
  c.task = parse_task(required_string(j, "task"));
  c.dataset_id = get<std::string>(j, "dataset_id", std::string(task_name(c.task)));
  c.pool = resolve(base, required_string(j, "pool"));
  if (j.contains("dev")) c.dev = resolve(base, required_string(j, "dev"));
  if (j.contains("test")) c.test = resolve(base, required_string(j, "test"));
  if (!j.contains("vectors")) throw ConfigError("config needs \"vectors\"");
  if (j["vectors"].is_string()) {
    c.vectors.push_back(resolve(base, j["vectors"].get<std::string>()));
  } else {
    for (const auto& v : get<std::vector<std::string>>(j, "vectors", {})) c.vectors.push_back(resolve(base, v));
  }
  if (c.vectors.empty()) throw ConfigError("config \"vectors\" lists no files");
  c.lang_registry = resolve(base, required_string(j, "lang_registry"));
  if (j.contains("langid_model")) c.langid_model = resolve(base, required_string(j, "langid_model"));

  if (!j.contains("model")) throw ConfigError("config needs \"model\"");
  c.model = parse_model_handle(j["model"]);
  if (!c.model.decode.greedy) throw ConfigError("evaluation runs require greedy decoding");
  if (c.model.endpoint.starts_with("mock:table(")) {
    // table paths are config-relative like every other path
    const auto inner = c.model.endpoint.substr(11, c.model.endpoint.size() - 12);
    c.model.endpoint = "mock:table(" + resolve(base, inner).string() + ")";
  }

  c.strategy = parse_strategy(get<std::string>(j, "strategy", "multi_factor"));
  if (c.strategy == Strategy::translate_english || c.strategy == Strategy::pseudo_reference) {
    throw ConfigError(std::string(strategy_name(c.strategy)) + " requires external translation backend");
  }

  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (w.is_string()) {
      c.weights = parse_weights_config(read_file(resolve(base, w.get<std::string>())));
    } else {
      c.weights = parse_weights_config(w.dump());
    }
  }
  if (j.contains("language_weights")) {
    const auto& lw = j["language_weights"];
    if (!lw.is_object()) throw ConfigError("\"language_weights\" must map languages to weights");
    for (auto it = lw.begin(); it != lw.end(); ++it) {
      const auto w = it->is_string() ? parse_weights_config(read_file(resolve(base, it->get<std::string>())))
                                     : parse_weights_config(it->dump());
      if (w.drop) throw ConfigError("language_weights." + it.key() + ": \"ablate\" is only allowed globally");
      c.language_weights.emplace(it.key(), w.weights);
    }
  }
  if (j.contains("grid")) {
    GridSpec g;
    if (j["grid"].is_number()) {
      g.step = j["grid"].get<double>();
    } else {
      g.step = get<double>(j["grid"], "step", 0.1);
    }
    enumerate_simplex(g);  // rejects a bad step now
    c.grid = g;
  }
  if (c.strategy == Strategy::multi_factor) {
    if (c.weights && c.grid) throw ConfigError("give either \"weights\" or \"grid\", not both");
    if (!c.weights && !c.grid) throw ConfigError("multi_factor needs \"weights\" or \"grid\"");
    if (c.grid && !c.dev) throw ConfigError("grid search needs a \"dev\" split");
    if (!c.language_weights.empty() && !c.weights) throw ConfigError("\"language_weights\" needs global \"weights\"");
  } else if (!c.language_weights.empty()) {
    throw ConfigError("\"language_weights\" only applies to multi_factor");
  }
  const auto tune = get<std::string>(j, "tune", "per_language");
  if (tune != "per_language" && tune != "global") throw ConfigError("\"tune\" must be per_language or global");
  c.tune_per_language = tune == "per_language";

  c.k = get<std::size_t>(j, "k", 8);
  if (c.k == 0 && c.strategy != Strategy::non_icl) throw ConfigError("k must be >= 1 (use strategy non_icl for k = 0)");
  c.seed = get<std::uint64_t>(j, "seed", 0);
  if (j.contains("perf_cap")) {
    if (j["perf_cap"].is_null()) {
      c.perf_cap.reset();
    } else {
      c.perf_cap = get<std::size_t>(j, "perf_cap", 200);
      if (*c.perf_cap == 0) throw ConfigError("perf_cap must be >= 1 or null");
    }
  }
  c.normalization = parse_normalization(get<std::string>(j, "normalization", "raw"));
  c.template_id = get<std::string>(j, "template", default_template(c.task).id);
  if (find_template(c.template_id).task != c.task) {
    throw ConfigError("template \"" + c.template_id + "\" belongs to another task");
  }
  c.order = parse_order(get<std::string>(j, "order", "ascending"));
  c.include_target_language = get<bool>(j, "include_target_language", true);
  c.answer_format = parse_answer_format(get<std::string>(j, "answer_format", "letter"));
  if (j.contains("allowed_languages")) {
    auto langs = get<std::vector<std::string>>(j, "allowed_languages", {});
    c.allowed_languages = std::set<std::string>(langs.begin(), langs.end());
  } else if (c.strategy == Strategy::embedding_high_resource) {
    c.allowed_languages = default_high_resource_languages(c.task);
  }
  c.instruction_without_examples = get<bool>(j, "instruction_without_examples", true);
  c.output_dir = resolve(base, get<std::string>(j, "output_dir", "out"));
  if (j.contains("cache_dir")) c.cache_dir = resolve(base, required_string(j, "cache_dir"));
  if (const char* env = std::getenv("POLYSHOT_CACHE_DIR"); env && *env) c.cache_dir = fs::path(env);
  c.jobs = get<std::size_t>(j, "jobs", 0);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, fs::absolute(path).parent_path());
}

Workspace load_workspace(const RunConfig& cfg) {
  Workspace ws;
  ws.registry = std::make_unique<LanguageRegistry>(LanguageRegistry::load(cfg.lang_registry));
  IngestOptions ingest;
  ingest.known_languages = ws.registry->codes();
  std::shared_ptr<TrigramDetector> detector;
  if (cfg.langid_model) {
    detector = std::make_shared<TrigramDetector>(TrigramDetector::load(*cfg.langid_model));
    const LanguageRegistry* reg = ws.registry.get();
    ingest.detect = [detector, reg](const std::string& t) { return detect_language(t, *detector, std::nullopt, *reg); };
  }
  ws.pool = load_pool(cfg.pool, ingest);
  if (cfg.dev) ws.dev = load_queries(*cfg.dev, ingest);
  if (cfg.test) ws.test = load_queries(*cfg.test, ingest);
  ws.embeddings = load_vectors(std::span<const fs::path>(cfg.vectors));
  return ws;
}

// ---------------------------------------------------------------------------

Runner::Runner(RunConfig cfg, std::unique_ptr<Backend> backend) : cfg_(std::move(cfg)), ws_(load_workspace(cfg_)) {
  GatewayOptions gopts;
  gopts.cache_dir = cfg_.cache_dir;
  gateway_ = backend ? std::make_unique<Gateway>(cfg_.model, std::move(backend), gopts)
                     : std::make_unique<Gateway>(cfg_.model, gopts);
  if (cfg_.jobs == 0) cfg_.jobs = default_jobs();
}

TaskSpec Runner::task() const { return make_task(find_template(cfg_.template_id), cfg_.k); }

RunOptions Runner::run_options() const {
  RunOptions o;
  o.task = task();
  o.strategy.strategy = cfg_.strategy;
  o.strategy.k = cfg_.k;
  o.strategy.seed = cfg_.seed;
  o.strategy.order = cfg_.order;
  o.strategy.include_target_language = cfg_.include_target_language;
  o.strategy.allowed_languages = cfg_.allowed_languages;
  o.prompt.answer_format = cfg_.answer_format;
  o.prompt.instruction_without_examples = cfg_.instruction_without_examples;
  o.jobs = cfg_.jobs;
  o.label = std::string(strategy_name(cfg_.strategy));
  return o;
}

const PerfTable& Runner::perf_table() {
  if (perf_) return *perf_;
  if (cfg_.strategy == Strategy::multi_factor) {
    PerfOptions po;
    po.cap = cfg_.perf_cap;
    po.seed = cfg_.seed;
    po.answer_format = cfg_.answer_format;
    po.jobs = cfg_.jobs;
    perf_ = build_perf_table(ws_.pool, *gateway_, task(), cfg_.dataset_id, po, cfg_.cache_dir);
  } else {
    PerfTable t;
    t.model_id = cfg_.model.model_id;
    t.dataset_id = cfg_.dataset_id;
    for (const auto& lang : ws_.pool.languages()) t.entries[lang] = {0.0, 1, 0};
    perf_ = std::move(t);
  }
  return *perf_;
}

ScoringContext Runner::context(FactorWeights w) {
  return ScoringContext(w, ws_.pool, ws_.embeddings, *ws_.registry, perf_table().scores(), cfg_.normalization);
}

const Runner::Tuning& Runner::tuning() {
  if (tuning_) return *tuning_;
  Tuning t;
  if (cfg_.strategy != Strategy::multi_factor) {
    t.weights = {1.0, 0.0, 0.0};
  } else if (cfg_.weights) {
    t.weights = cfg_.weights->weights;
    t.per_language = cfg_.language_weights;
  } else {
    if (ws_.dev.empty()) throw ValidationError("grid search needs a non-empty dev split");
    const auto ctx = context({1.0, 0.0, 0.0});
    const auto opts = run_options();
    // Per-language runs repeat prompts of the global run, so the second pass is served from cache.
    t.global = grid_search_weights(ws_.dev, ctx, *gateway_, opts, *cfg_.grid);
    t.weights = t.global->best;
    if (cfg_.tune_per_language) {
      t.grids = grid_search_per_language(ws_.dev, ctx, *gateway_, opts, *cfg_.grid);
      for (const auto& [lang, g] : t.grids) t.per_language.emplace(lang, g.best);
    }
  }
  tuning_ = std::move(t);
  return *tuning_;
}

RunOutput Runner::evaluate(std::optional<Factor> drop) {
  if (!cfg_.test) throw ConfigError("config has no \"test\" split to evaluate");
  if (!drop && cfg_.weights) drop = cfg_.weights->drop;
  const auto& t = tuning();
  auto opts = run_options();
  opts.language_weights = t.per_language;
  const auto ctx = context(t.weights);
  if (drop) return ablation_run(ws_.test, ctx, *gateway_, opts, *drop);
  return run_config(ws_.test, ctx, *gateway_, opts);
}

Selection Runner::select(const std::string& query_id) {
  for (const auto* split : {&ws_.test, &ws_.dev}) {
    for (const auto& q : *split) {
      if (q.id != query_id) continue;
      const auto& t = tuning();
      auto it = t.per_language.find(q.language);
      auto cfg = run_options().strategy;
      if (cfg.strategy == Strategy::non_icl) cfg.k = 0;
      return select_for(q, context(it == t.per_language.end() ? t.weights : it->second), cfg);
    }
  }
  throw LookupError("no query \"" + query_id + "\" in the dev or test split");
}

json Runner::write_outputs(const RunOutput& out, const fs::path& dir, std::optional<Factor> drop) {
  if (!drop && cfg_.weights) drop = cfg_.weights->drop;
  const auto& t = tuning();
  fs::create_directories(dir);
  atomic_write(dir / "results.jsonl", serialize_results(out.instances));
  atomic_write(dir / "traces.jsonl", serialize_traces(out.traces));
  PerfOptions po;
  po.cap = cfg_.perf_cap;
  po.seed = cfg_.seed;
  atomic_write(dir / "perf.json", perf_table_json(perf_table(), po).dump(2) + "\n");

  json summary = {{"label", out.result.config_label},
                  {"task", task_name(cfg_.task)},
                  {"dataset_id", cfg_.dataset_id},
                  {"strategy", strategy_name(cfg_.strategy)},
                  {"model_id", cfg_.model.model_id},
                  {"k", cfg_.strategy == Strategy::non_icl ? 0 : cfg_.k},
                  {"seed", cfg_.seed},
                  {"n_instances", out.result.per_instance.size()},
                  {"accuracy", out.result.accuracy},
                  {"failures", out.result.failures},
                  {"flagged", out.result.failures > 0},
                  {"ablate", drop ? json(std::string(factor_name(*drop))) : json(nullptr)}};
  if (cfg_.strategy == Strategy::multi_factor) {
    summary["weights"] = weights_json(drop ? ablate(t.weights, *drop) : t.weights);
    json per_lang = json::object();
    for (const auto& [lang, w] : t.per_language) per_lang[lang] = weights_json(drop ? ablate(w, *drop) : w);
    summary["per_language_weights"] = per_lang;
  }
  if (t.global) {
    json grid = {{"global", grid_json(*t.global)}, {"per_language", json::object()}};
    for (const auto& [lang, g] : t.grids) grid["per_language"][lang] = grid_json(g);
    atomic_write(dir / "grid.json", grid.dump(2) + "\n");
  }
  if (cfg_.strategy != Strategy::non_icl && !out.traces.empty()) {
    const auto hist = diversity_histogram(out.traces, cfg_.k);
    atomic_write(dir / "diversity.json", diversity_json(hist).dump(2) + "\n");
    summary["diversity"] = diversity_json(hist);
  }
  atomic_write(dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------

std::vector<std::string> validate_inputs(const ValidationInputs& in) {
  std::vector<std::string> findings;
  std::optional<LanguageRegistry> registry;
  try {
    registry = LanguageRegistry::load(in.lang_registry);
  } catch (const Error& e) {
    findings.push_back(std::string("registry: ") + e.what());
  }
  std::optional<EmbeddingMatrix> vectors;
  try {
    vectors = load_vectors(std::span<const fs::path>(in.vectors));
  } catch (const Error& e) {
    findings.push_back(std::string("vectors: ") + e.what());
  }

  std::map<std::string, std::size_t> unregistered;
  auto check_item = [&](const std::string& kind, const std::string& id, const std::string& lang,
                        const std::string& ref) {
    if (registry && !registry->contains(lang)) ++unregistered[lang];
    if (vectors && !vectors->contains(ref)) {
      findings.push_back(kind + " \"" + id + "\" has no vector (embedding_ref \"" + ref + "\")");
    }
  };

  const IngestOptions ingest;  // languages are checked below, not on load
  try {
    const auto pool = load_pool(in.pool, ingest);
    if (pool.empty()) findings.push_back("pool: no records");
    for (const auto& r : pool.records()) check_item("record", r.id, r.language, r.embedding_ref);
  } catch (const Error& e) {
    findings.push_back("pool: " + std::string(e.what()));
  }
  for (const auto& qpath : in.queries) {
    try {
      for (const auto& q : load_queries(qpath, ingest)) {
        check_item("query", q.id, q.language, q.embedding_ref.empty() ? q.id : q.embedding_ref);
      }
    } catch (const Error& e) {
      findings.push_back(qpath.filename().string() + ": " + e.what());
    }
  }
  for (const auto& [lang, n] : unregistered) {
    findings.push_back("language \"" + lang + "\" is not in the registry (" + std::to_string(n) + " items)");
  }
  return findings;
}

}  // namespace polyshot
