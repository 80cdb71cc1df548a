// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "polyshot/error.hpp"
#include "polyshot/text.hpp"
#include "polyshot/util.hpp"

namespace polyshot {

using json = nlohmann::json;

ExamplePool::ExamplePool(std::vector<ExampleRecord> records) {
  records_.reserve(records.size());
  for (auto& r : records) add(std::move(r));
}

void ExamplePool::add(ExampleRecord record) {
  if (index_.contains(record.id)) throw ValidationError("duplicate record id \"" + record.id + "\"");
  if (record.embedding_ref.empty()) record.embedding_ref = record.id;
  index_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

const ExampleRecord* ExamplePool::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::set<std::string> ExamplePool::languages() const {
  std::set<std::string> out;
  for (const auto& r : records_) out.insert(r.language);
  return out;
}

std::string_view factor_name(Factor f) noexcept {
  switch (f) {
    case Factor::semantic: return "sem";
    case Factor::linguistic: return "lag";
    case Factor::performance: return "per";
  }
  return "?";
}

Factor parse_factor(std::string_view name) {
  if (name == "sem") return Factor::semantic;
  if (name == "lag") return Factor::linguistic;
  if (name == "per") return Factor::performance;
  throw ConfigError("unknown factor \"" + std::string(name) + "\" (expected sem, lag or per)");
}

FactorWeights validate_weights(const FactorWeights& w, bool ablation) {
  for (double v : {w.alpha, w.beta, w.gamma}) {
    if (!std::isfinite(v)) throw ValidationError("weights must be finite");
    if (v < 0.0) throw ValidationError("weights must be non-negative");
  }
  if (ablation) return w;
  const double s = w.sum();
  if (s <= 0.0) throw ValidationError("weights must not all be zero");
  if (s == 1.0) return w;
  FactorWeights out{w.alpha / s, w.beta / s, w.gamma / s};
  // Close the rounding residue on gamma, the last summand: x + (1 - x) == 1
  // holds exactly whenever 1 - x is exact.
  const double rest = 1.0 - (out.alpha + out.beta);
  if (rest >= 0.0 && (out.alpha + out.beta) + rest == 1.0) {
    out.gamma = rest;
    return out;
  }
  // alpha + beta overshot 1; walk the larger of the two down instead.
  double* largest = out.alpha >= out.beta ? &out.alpha : &out.beta;
  for (int i = 0; i < 64 && out.sum() != 1.0; ++i) *largest = std::nextafter(*largest, out.sum() > 1.0 ? 0.0 : 2.0);
  return out;
}

FactorWeights ablate(const FactorWeights& w, Factor drop) noexcept {
  FactorWeights out = w;
  switch (drop) {
    case Factor::semantic: out.alpha = 0.0; break;
    case Factor::linguistic: out.beta = 0.0; break;
    case Factor::performance: out.gamma = 0.0; break;
  }
  return out;
}

FactorWeights WeightsConfig::effective() const noexcept {
  return drop ? polyshot::ablate(weights, *drop) : weights;
}

WeightsConfig parse_weights_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("weights config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("weights config must be a JSON object");
  WeightsConfig cfg;
  try {
    cfg.weights = {j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("gamma").get<double>()};
  } catch (const json::exception&) {
    throw ConfigError("weights config needs numeric alpha, beta and gamma");
  }
  if (j.contains("ablate") && !j["ablate"].is_null()) cfg.drop = parse_factor(j["ablate"].get<std::string>());
  try {
    validate_weights(cfg.weights, true);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (!cfg.drop && std::abs(cfg.weights.sum() - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "weights must sum to 1 (got " << cfg.weights.sum() << "); set \"ablate\" to suspend the constraint";
    throw ConfigError(msg.str());
  }
  return cfg;
}

std::string_view task_name(TaskId t) noexcept { return t == TaskId::mcsqa ? "mcsqa" : "tydi"; }

TaskId parse_task(std::string_view name) {
  if (name == "mcsqa") return TaskId::mcsqa;
  if (name == "tydi") return TaskId::tydi;
  throw ConfigError("unknown task \"" + std::string(name) + "\" (expected mcsqa or tydi)");
}

void validate_task(const TaskSpec& task) {
  if (task.instruction.empty()) throw ValidationError("task instruction must be non-empty");
}

void EvalResult::finalize() {
  std::sort(per_instance.begin(), per_instance.end(),
            [](const InstanceOutcome& a, const InstanceOutcome& b) { return a.query_id < b.query_id; });
  accuracy = recomputed_accuracy();
}

double EvalResult::recomputed_accuracy() const noexcept {
  if (per_instance.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& o : per_instance) hits += o.correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(per_instance.size());
}

void validate_choices(const std::vector<Choice>& choices, std::string_view owner_id) {
  static const char* kLabels[] = {"a", "b", "c", "d", "e"};
  if (choices.size() != 5) {
    throw ValidationError("\"" + std::string(owner_id) + "\": expected 5 choices labeled a-e, got " +
                          std::to_string(choices.size()));
  }
  for (std::size_t i = 0; i < 5; ++i) {
    if (choices[i].label != kLabels[i]) {
      throw ValidationError("\"" + std::string(owner_id) + "\": choice " + std::to_string(i + 1) +
                            " must be labeled \"" + kLabels[i] + "\"");
    }
  }
}

namespace {

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

std::string required_string(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) fail_line(line, std::string("missing string field \"") + key + "\"");
  auto s = text::nfc(j[key].get<std::string>());
  if (s.empty()) fail_line(line, std::string("field \"") + key + "\" must be non-empty");
  return s;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return text::nfc(j[key].get<std::string>());
}

std::vector<Choice> parse_choices(const json& j, std::size_t line) {
  std::vector<Choice> out;
  if (!j.contains("choices") || j["choices"].is_null()) return out;
  const auto& c = j["choices"];
  static const char* kLabels[] = {"a", "b", "c", "d", "e"};
  if (c.is_array()) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i].is_string()) {
        out.push_back({i < 5 ? kLabels[i] : std::to_string(i), text::nfc(c[i].get<std::string>())});
      } else if (c[i].is_object()) {
        out.push_back({c[i].value("label", ""), text::nfc(c[i].value("text", ""))});
      } else {
        fail_line(line, "choices entries must be strings or {label, text} objects");
      }
    }
  } else if (c.is_object()) {
    for (auto it = c.begin(); it != c.end(); ++it) out.push_back({it.key(), text::nfc(it.value().get<std::string>())});
  } else {
    fail_line(line, "choices must be an array or an object");
  }
  return out;
}

json choices_json(const std::vector<Choice>& choices) {
  json arr = json::array();
  for (const auto& c : choices) arr.push_back({{"label", c.label}, {"text", c.text}});
  return arr;
}

std::string resolve_language(const json& j, const std::string& text_for_detection, const IngestOptions& opts,
                             std::size_t line) {
  std::string lang;
  if (j.contains("language") && j["language"].is_string()) lang = j["language"].get<std::string>();
  std::transform(lang.begin(), lang.end(), lang.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lang.empty()) {
    if (!opts.detect) fail_line(line, "missing language label and no detector configured");
    lang = opts.detect(text_for_detection);
  }
  if (!opts.known_languages.empty() && !opts.known_languages.contains(lang)) {
    fail_line(line, "unknown language code \"" + lang + "\"");
  }
  return lang;
}

template <typename Fn>
void for_each_line(std::string_view jsonl, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) {
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail_line(line_no, "expected a JSON object");
    fn(j, line_no);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace

ExamplePool parse_pool(std::string_view jsonl, const IngestOptions& opts, Diagnostics* diag) {
  ExamplePool pool;
  for_each_line(jsonl, [&](const json& j, std::size_t line) {
    ExampleRecord r;
    r.id = required_string(j, "id", line);
    r.source = required_string(j, "source", line);
    r.reference = required_string(j, "reference", line);
    r.language = resolve_language(j, r.source, opts, line);
    r.embedding_ref = optional_string(j, "embedding_ref").value_or(r.id);
    r.choices = parse_choices(j, line);
    r.context = optional_string(j, "context");
    if (!r.choices.empty()) {
      try {
        validate_choices(r.choices, r.id);
      } catch (const ValidationError& e) {
        fail_line(line, e.what());
      }
    }
    try {
      pool.add(std::move(r));
    } catch (const ValidationError& e) {
      fail_line(line, e.what());
    }
  });
  if (pool.empty() && diag) diag->warnings.push_back("pool is empty");
  return pool;
}

ExamplePool load_pool(const std::filesystem::path& path, const IngestOptions& opts, Diagnostics* diag) {
  return parse_pool(read_file(path), opts, diag);
}

std::string serialize_pool(const ExamplePool& pool) {
  std::string out;
  for (const auto& r : pool.records()) {
    json j = {{"id", r.id}, {"source", r.source}, {"reference", r.reference}, {"language", r.language}};
    if (r.embedding_ref != r.id) j["embedding_ref"] = r.embedding_ref;
    if (!r.choices.empty()) j["choices"] = choices_json(r.choices);
    if (r.context) j["context"] = *r.context;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_pool(const ExamplePool& pool, const std::filesystem::path& path) {
  atomic_write(path, serialize_pool(pool));
}

std::vector<QueryInstance> parse_queries(std::string_view jsonl, const IngestOptions& opts, Diagnostics* diag) {
  std::vector<QueryInstance> out;
  std::set<std::string> seen;
  for_each_line(jsonl, [&](const json& j, std::size_t line) {
    QueryInstance q;
    q.id = required_string(j, "id", line);
    q.input = required_string(j, "input", line);
    q.language = resolve_language(j, q.input, opts, line);
    q.gold = optional_string(j, "gold");
    q.choices = parse_choices(j, line);
    q.context = optional_string(j, "context");
    q.embedding_ref = optional_string(j, "embedding_ref").value_or(q.id);
    if (!q.choices.empty()) {
      try {
        validate_choices(q.choices, q.id);
      } catch (const ValidationError& e) {
        fail_line(line, e.what());
      }
    }
    if (!seen.insert(q.id).second) fail_line(line, "duplicate query id \"" + q.id + "\"");
    out.push_back(std::move(q));
  });
  if (out.empty() && diag) diag->warnings.push_back("query file is empty");
  return out;
}

std::vector<QueryInstance> load_queries(const std::filesystem::path& path, const IngestOptions& opts,
                                        Diagnostics* diag) {
  return parse_queries(read_file(path), opts, diag);
}

std::string serialize_queries(const std::vector<QueryInstance>& queries) {
  std::string out;
  for (const auto& q : queries) {
    json j = {{"id", q.id}, {"input", q.input}, {"language", q.language}};
    if (q.gold) j["gold"] = *q.gold;
    if (!q.choices.empty()) j["choices"] = choices_json(q.choices);
    if (q.context) j["context"] = *q.context;
    if (q.embedding_ref != q.id) j["embedding_ref"] = q.embedding_ref;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace polyshot
