// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings. Records and results cross the boundary as plain dicts
// through the same JSON schema the files use.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "polyshot/datamodel.hpp"
#include "polyshot/error.hpp"
#include "polyshot/experiments.hpp"
#include "polyshot/langfeatures.hpp"
#include "polyshot/prompting.hpp"
#include "polyshot/runner.hpp"
#include "polyshot/util.hpp"
#include "polyshot/vectorstore.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace polyshot;

namespace {

py::object to_py(const json& j) {
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

json from_py(const py::handle& o) {
  py::object dumps = py::module_::import("json").attr("dumps");
  return json::parse(dumps(o, py::arg("ensure_ascii") = false).cast<std::string>());
}

std::string jsonl(const py::list& items) {
  std::string out;
  for (const auto& it : items) out += from_py(it).dump() + "\n";
  return out;
}

py::list to_list(std::string_view text) {
  py::list out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    if (end > pos) out.append(to_py(json::parse(text.substr(pos, end - pos))));
    pos = end + 1;
  }
  return out;
}

TaskSpec task_for(const std::string& task, std::size_t k, const std::optional<std::string>& tpl) {
  const TaskId id = parse_task(task);
  return make_task(tpl ? find_template(*tpl) : default_template(id), k);
}

py::dict mcnemar_dict(const McNemarResult& m) {
  py::dict d;
  d["b01"] = m.b01;
  d["b10"] = m.b10;
  d["statistic"] = m.statistic;
  d["p"] = m.p;
  d["p_exact"] = m.p_exact;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multilingual in-context example selection engine";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  py::register_exception<ContextLengthError>(m, "ContextLengthError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());

  m.def(
      "cosine", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine(u, v); },
      py::arg("u"), py::arg("v"));

  m.def(
      "enumerate_simplex",
      [](double step) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& w : enumerate_simplex({step})) out.emplace_back(w.alpha, w.beta, w.gamma);
        return out;
      },
      py::arg("step") = 0.1);

  m.def(
      "normalize_weights",
      [](double a, double b, double g) {
        const auto w = validate_weights({a, b, g});
        return std::make_tuple(w.alpha, w.beta, w.gamma);
      },
      py::arg("alpha"), py::arg("beta"), py::arg("gamma"));

  m.def(
      "mcnemar", [](std::size_t b01, std::size_t b10) { return mcnemar_dict(mcnemar_counts(b01, b10)); },
      py::arg("b01"), py::arg("b10"));

  m.def(
      "compare_results",
      [](const fs::path& a, const fs::path& b) {
        return mcnemar_dict(
            mcnemar(eval_result_from(parse_results(read_file(a))), eval_result_from(parse_results(read_file(b)))));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "exact_match",
      [](const std::string& pred, const std::string& gold, const std::string& task,
         const std::vector<std::string>& choices) {
        std::vector<Choice> cs;
        for (std::size_t i = 0; i < choices.size(); ++i) cs.push_back({std::string(1, char('a' + i)), choices[i]});
        return exact_match(pred, gold, parse_task(task), cs);
      },
      py::arg("prediction"), py::arg("gold"), py::arg("task"), py::arg("choices") = std::vector<std::string>{});

  m.def(
      "build_prompt",
      [](const std::string& task, const py::list& examples, const py::dict& query,
         const std::optional<std::string>& tpl, const std::string& answer_format) {
        const IngestOptions ingest;
        const auto pool = parse_pool(jsonl(examples), ingest);
        py::list q;
        q.append(query);
        const auto queries = parse_queries(jsonl(q), ingest);
        PromptOptions po;
        po.answer_format = parse_answer_format(answer_format);
        return build_prompt(task_for(task, pool.size(), tpl), pool.records(), queries.at(0), po);
      },
      py::arg("task"), py::arg("examples"), py::arg("query"), py::arg("template") = std::nullopt,
      py::arg("answer_format") = "letter");

  m.def(
      "load_pool",
      [](const fs::path& path) {
        const IngestOptions ingest;
        return to_list(serialize_pool(load_pool(path, ingest)));
      },
      py::arg("path"));

  m.def(
      "load_queries",
      [](const fs::path& path) {
        const IngestOptions ingest;
        return to_list(serialize_queries(load_queries(path, ingest)));
      },
      py::arg("path"));

  m.def(
      "read_vectors",
      [](const fs::path& path) {
        const auto em = load_vectors(path);
        py::dict rows;
        for (std::size_t i = 0; i < em.rows(); ++i) {
          const auto r = em.row(i);
          rows[py::str(em.key(i))] = std::vector<double>(r.begin(), r.end());
        }
        return py::make_tuple(em.dim(), rows);
      },
      py::arg("path"));

  m.def(
      "vector_cosine",
      [](const std::vector<fs::path>& paths, const std::string& a, const std::string& b) {
        return load_vectors(std::span<const fs::path>(paths)).cosine_keys(a, b);
      },
      py::arg("paths"), py::arg("a"), py::arg("b"));

  m.def(
      "language_score",
      [](const fs::path& registry, const std::string& a, const std::string& b) {
        return LanguageRegistry::load(registry).score(a, b);
      },
      py::arg("registry"), py::arg("a"), py::arg("b"));

  m.def(
      "validate",
      [](const fs::path& pool, const std::vector<fs::path>& queries, const std::vector<fs::path>& vectors,
         const fs::path& registry) { return validate_inputs({pool, queries, vectors, registry}); },
      py::arg("pool"), py::arg("queries"), py::arg("vectors"), py::arg("registry"));

  m.def(
      "select",
      [](const fs::path& config, const std::string& query_id) {
        json t;
        {
          py::gil_scoped_release release;
          Runner r(load_run_config(config));
          t = trace_json(r.select(query_id).trace);
        }
        return to_py(t);
      },
      py::arg("config"), py::arg("query_id"));

  m.def(
      "run",
      [](const fs::path& config, const std::optional<fs::path>& output_dir, const std::optional<std::string>& drop) {
        json summary;
        {
          py::gil_scoped_release release;
          auto cfg = load_run_config(config);
          if (output_dir) cfg.output_dir = *output_dir;
          std::optional<Factor> f;
          if (drop) f = parse_factor(*drop);
          Runner r(cfg);
          summary = r.write_outputs(r.evaluate(f), cfg.output_dir, f);
        }
        return to_py(summary);
      },
      py::arg("config"), py::arg("output_dir") = std::nullopt, py::arg("drop") = std::nullopt);
}
