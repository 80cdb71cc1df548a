// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

// polyshot: command-line driver for example selection experiments.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure, 3 config error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polyshot/error.hpp"
#include "polyshot/experiments.hpp"
#include "polyshot/runner.hpp"
#include "polyshot/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace polyshot;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;
constexpr int kConfig = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> output_dir;
  std::optional<std::string> cache_dir;
};

void add_overrides(CLI::App* cmd, std::string& config, Overrides& o) {
  cmd->add_option("-c,--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("-j,--jobs", o.jobs, "Worker threads");
  cmd->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
  cmd->add_option("--cache-dir", o.cache_dir, "Override the cache directory");
}

RunConfig configure(const std::string& path, const Overrides& o) {
  RunConfig cfg = load_run_config(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.cache_dir) cfg.cache_dir = fs::path(*o.cache_dir);
  return cfg;
}

void report_stats(const Gateway& g) {
  const auto s = g.stats();
  std::cerr << "model calls: " << s.backend_calls << " (network " << s.network_calls << "), cache hits: "
            << s.cache_hits << ", retries: " << s.retries << "\n";
}

int cmd_validate(const ValidationInputs& in) {
  const auto findings = validate_inputs(in);
  for (const auto& f : findings) std::cout << f << "\n";
  std::cout << findings.size() << (findings.size() == 1 ? " issue" : " issues") << "\n";
  return findings.empty() ? kOk : kValidation;
}

int cmd_perf(const RunConfig& cfg) {
  Runner runner(cfg);
  PerfOptions po;
  po.cap = cfg.perf_cap;
  po.seed = cfg.seed;
  const auto table = perf_table_json(runner.perf_table(), po);
  fs::create_directories(cfg.output_dir);
  atomic_write(cfg.output_dir / "perf.json", table.dump(2) + "\n");
  std::cout << table.dump(2) << "\n";
  report_stats(runner.gateway());
  return kOk;
}

int cmd_tune(const RunConfig& cfg) {
  if (!cfg.grid) throw ConfigError("tune needs a \"grid\" in the config");
  Runner runner(cfg);
  const auto& t = runner.tuning();
  json out = {{"global", grid_json(*t.global)}, {"per_language", json::object()}};
  for (const auto& [lang, g] : t.grids) out["per_language"][lang] = grid_json(g);
  fs::create_directories(cfg.output_dir);
  atomic_write(cfg.output_dir / "grid.json", out.dump(2) + "\n");
  json best = {{"global", weights_json(t.weights)}, {"per_language", json::object()}};
  for (const auto& [lang, w] : t.per_language) best["per_language"][lang] = weights_json(w);
  std::cout << best.dump(2) << "\n";
  report_stats(runner.gateway());
  return kOk;
}

int cmd_select(const RunConfig& cfg, const std::string& query_id) {
  Runner runner(cfg);
  const auto sel = runner.select(query_id);
  std::cout << trace_json(sel.trace).dump(2) << "\n";
  return kOk;
}

int cmd_run(const RunConfig& cfg, std::optional<Factor> drop, const fs::path& dir) {
  Runner runner(cfg);
  const auto out = runner.evaluate(drop);
  const auto summary = runner.write_outputs(out, dir, drop);
  std::cout << summary.dump(2) << "\n";
  report_stats(runner.gateway());
  return kOk;
}

int cmd_diversity(const std::string& traces_path, std::size_t k, const std::optional<std::string>& output) {
  const auto traces = parse_traces(read_file(traces_path));
  const auto hist = diversity_json(diversity_histogram(traces, k));
  if (output) atomic_write(*output, hist.dump(2) + "\n");
  std::cout << hist.dump(2) << "\n";
  return kOk;
}

int cmd_compare(const std::string& a, const std::string& b, double alpha) {
  const auto ra = eval_result_from(parse_results(read_file(a)));
  const auto rb = eval_result_from(parse_results(read_file(b)));
  const auto m = mcnemar(ra, rb);
  std::printf("b01 %zu\nb10 %zu\nstatistic %.6f\np %.6g\np_exact %.6g\n", m.b01, m.b10, m.statistic, m.p,
              m.p_exact);
  std::printf("%s at %g\n", m.p < alpha ? "significant" : "not significant", alpha);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual in-context example selection and evaluation"};
  app.require_subcommand(1);

  ValidationInputs vin;
  std::vector<std::string> vqueries, vvectors;
  std::string vpool, vregistry;
  auto* validate = app.add_subcommand("validate", "Cross-check pool, queries, vectors and registry");
  validate->add_option("--pool", vpool, "Pool JSONL")->required();
  validate->add_option("--queries", vqueries, "Query JSONL files");
  validate->add_option("--vectors", vvectors, "Vector files")->required();
  validate->add_option("--registry", vregistry, "Language registry JSON")->required();

  std::string config;
  Overrides ov;
  auto* perf = app.add_subcommand("perf", "Compute the per-language performance table");
  add_overrides(perf, config, ov);
  auto* tune = app.add_subcommand("tune", "Grid-search factor weights on the dev split");
  add_overrides(tune, config, ov);
  auto* select = app.add_subcommand("select", "Show the selection for one query");
  add_overrides(select, config, ov);
  std::string query_id;
  select->add_option("--query", query_id, "Query id")->required();
  auto* run = app.add_subcommand("run", "Evaluate the configured strategy on the test split");
  add_overrides(run, config, ov);
  auto* abl = app.add_subcommand("ablate", "Evaluate with one factor zeroed");
  add_overrides(abl, config, ov);
  std::string drop_name;
  abl->add_option("--drop", drop_name, "Factor to drop: sem, lag or per")->required();

  std::string traces;
  std::size_t k = 8;
  std::optional<std::string> div_out;
  auto* div = app.add_subcommand("diversity", "Histogram of distinct languages per selection");
  div->add_option("--traces", traces, "traces.jsonl")->required()->check(CLI::ExistingFile);
  div->add_option("-k", k, "Examples per instance");
  div->add_option("--output", div_out, "Write the histogram here");

  std::string res_a, res_b;
  double alpha = 0.01;
  auto* cmp = app.add_subcommand("compare", "McNemar test between two results files");
  cmp->add_option("a", res_a, "results.jsonl of system A")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", res_b, "results.jsonl of system B")->required()->check(CLI::ExistingFile);
  cmp->add_option("--alpha", alpha, "Significance threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*validate) {
      vin.pool = vpool;
      vin.queries.assign(vqueries.begin(), vqueries.end());
      vin.vectors.assign(vvectors.begin(), vvectors.end());
      vin.lang_registry = vregistry;
      return cmd_validate(vin);
    }
    if (*perf) return cmd_perf(configure(config, ov));
    if (*tune) return cmd_tune(configure(config, ov));
    if (*select) return cmd_select(configure(config, ov), query_id);
    if (*run) {
      const auto cfg = configure(config, ov);
      return cmd_run(cfg, std::nullopt, cfg.output_dir);
    }
    if (*abl) {
      const auto cfg = configure(config, ov);
      const Factor drop = parse_factor(drop_name);
      return cmd_run(cfg, drop, cfg.output_dir / ("ablate-" + std::string(factor_name(drop))));
    }
    if (*div) return cmd_diversity(traces, k, div_out);
    if (*cmp) return cmd_compare(res_a, res_b, alpha);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
