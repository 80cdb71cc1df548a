// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/perf_profile.hpp"

#include <algorithm>

#include "polyshot/error.hpp"
#include "polyshot/util.hpp"

namespace polyshot {

using json = nlohmann::json;

std::map<std::string, double> PerfTable::scores() const {
  std::map<std::string, double> out;
  for (const auto& [code, e] : entries) out.emplace(code, e.per);
  return out;
}

std::map<std::string, std::vector<ExampleRecord>> partition_by_language(const ExamplePool& pool) {
  std::map<std::string, std::vector<ExampleRecord>> out;
  for (const auto& r : pool.records()) out[r.language].push_back(r);
  return out;
}

std::vector<std::string> perf_sample_ids(std::vector<std::string> ids, std::optional<std::size_t> cap,
                                         std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  if (!cap || *cap >= ids.size()) return ids;
  std::vector<std::string> out;
  out.reserve(*cap);
  for (std::size_t i : sample_indices(ids.size(), *cap, seed)) out.push_back(ids[i]);
  std::sort(out.begin(), out.end());
  return out;
}

PerfEntry language_performance(const std::string& language, std::span<const ExampleRecord> records, Gateway& gateway,
                               const TaskSpec& task, const PerfOptions& opts) {
  if (records.empty()) throw ValidationError("no pool records for language \"" + language + "\"");
  if (opts.cap && *opts.cap == 0) throw ConfigError("perf cap must be >= 1");

  std::map<std::string, const ExampleRecord*> by_id;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    by_id.emplace(r.id, &r);
    ids.push_back(r.id);
  }
  const std::uint64_t seed = derive_seed(opts.seed, language);
  const auto chosen = perf_sample_ids(std::move(ids), opts.cap, seed);

  std::vector<double> means(chosen.size());
  parallel_for(chosen.size(), opts.jobs, [&](std::size_t i) {
    const ExampleRecord& r = *by_id.at(chosen[i]);
    const std::string context = task.instruction + "\n\n" + render_source(task.task, r);
    const auto scores = gateway.score_continuation(context, render_answer(task.task, r, opts.answer_format));
    means[i] = mean_token_logprob(scores);
  });
  return {running_mean(means), means.size(), seed};
}

json perf_table_json(const PerfTable& table, const PerfOptions& opts) {
  json entries = json::object();
  for (const auto& [code, e] : table.entries) {
    entries[code] = {{"per", e.per}, {"n_examples", e.n_examples}, {"sample_seed", e.sample_seed}};
  }
  return {{"model_id", table.model_id},
          {"dataset_id", table.dataset_id},
          {"cap", opts.cap ? json(*opts.cap) : json(nullptr)},
          {"seed", opts.seed},
          {"entries", entries}};
}

PerfTable parse_perf_table(const json& j) {
  try {
    PerfTable t;
    t.model_id = j.at("model_id").get<std::string>();
    t.dataset_id = j.at("dataset_id").get<std::string>();
    for (auto it = j.at("entries").begin(); it != j.at("entries").end(); ++it) {
      PerfEntry e;
      e.per = it.value().at("per").get<double>();
      e.n_examples = it.value().at("n_examples").get<std::size_t>();
      e.sample_seed = it.value().value("sample_seed", std::uint64_t{0});
      if (e.per > 0.0) throw FormatError("perf entry \"" + it.key() + "\" has positive per");
      if (e.n_examples == 0) throw FormatError("perf entry \"" + it.key() + "\" has n_examples = 0");
      t.entries.emplace(it.key(), e);
    }
    return t;
  } catch (const json::exception& e) {
    throw FormatError(std::string("perf table: ") + e.what());
  }
}

namespace {

std::string perf_cache_key(const ExamplePool& pool, const Gateway& gateway, const TaskSpec& task,
                           const std::string& dataset_id, const PerfOptions& opts) {
  json j = {{"model", model_handle_json(gateway.handle())},
            {"dataset_id", dataset_id},
            {"task", task_name(task.task)},
            {"instruction", task.instruction},
            {"cap", opts.cap ? json(*opts.cap) : json(nullptr)},
            {"seed", opts.seed},
            {"answer_format", opts.answer_format == AnswerFormat::letter ? "letter" : "text"},
            {"pool", sha256_hex(serialize_pool(pool))}};
  return sha256_hex(j.dump());
}

}  // namespace

PerfTable build_perf_table(const ExamplePool& pool, Gateway& gateway, const TaskSpec& task,
                           const std::string& dataset_id, const PerfOptions& opts,
                           const std::optional<std::filesystem::path>& cache_dir) {
  std::optional<std::filesystem::path> cache_file;
  if (cache_dir) {
    cache_file = *cache_dir / "perf" / (perf_cache_key(pool, gateway, task, dataset_id, opts) + ".json");
    std::error_code ec;
    if (std::filesystem::exists(*cache_file, ec)) return parse_perf_table(json::parse(read_file(*cache_file)));
  }
  PerfTable table;
  table.model_id = gateway.handle().model_id;
  table.dataset_id = dataset_id;
  for (const auto& [lang, records] : partition_by_language(pool)) {
    table.entries.emplace(lang, language_performance(lang, records, gateway, task, opts));
  }
  if (cache_file) atomic_write(*cache_file, perf_table_json(table, opts).dump(2) + "\n");
  return table;
}

}  // namespace polyshot
