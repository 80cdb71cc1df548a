// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/llm_gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include "polyshot/error.hpp"
#include "polyshot/text.hpp"
#include "polyshot/util.hpp"

namespace polyshot {

using json = nlohmann::json;

namespace {

bool retryable(const TransportError& e) {
  const int s = e.status();
  return s == 0 || s == 408 || s == 429 || s >= 500;
}

json tokens_json(const std::vector<TokenScore>& tokens) {
  json arr = json::array();
  for (const auto& t : tokens) arr.push_back({{"token", t.token}, {"logprob", t.logprob}});
  return arr;
}

std::vector<TokenScore> tokens_from_json(const json& arr) {
  std::vector<TokenScore> out;
  for (const auto& t : arr) out.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
  return out;
}

// "name(arg)" -> arg ; "name" -> nullopt
std::optional<std::string> spec_argument(std::string_view spec, std::string_view name) {
  if (spec == name) return std::nullopt;
  if (spec.size() > name.size() + 1 && spec.substr(0, name.size()) == name && spec[name.size()] == '(' &&
      spec.back() == ')') {
    return std::string(spec.substr(name.size() + 1, spec.size() - name.size() - 2));
  }
  return std::string{};  // marker: malformed
}

double parse_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("mock " + std::string(what) + ": \"" + s + "\" is not a number");
  }
}

std::vector<std::string_view> split_blocks(std::string_view prompt) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = prompt.find("\n\n", pos);
    out.push_back(prompt.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 2;
  }
  return out;
}

std::optional<std::string> answer_line(std::string_view block) {
  std::size_t pos = 0;
  while (pos <= block.size()) {
    auto nl = block.find('\n', pos);
    auto line = block.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (line.starts_with("Answer: ")) return std::string(line.substr(8));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return std::nullopt;
}

std::size_t codepoint_length(std::string_view s) { return text::to_u32(s).size(); }

}  // namespace

// ---------------------------------------------------------------------------
// Handle

ModelHandle parse_model_handle(const json& j) {
  if (!j.is_object()) throw ConfigError("model must be a JSON object");
  ModelHandle h;
  if (!j.contains("model_id") || !j["model_id"].is_string()) throw ConfigError("model.model_id is required");
  if (!j.contains("endpoint") || !j["endpoint"].is_string()) throw ConfigError("model.endpoint is required");
  try {
    h.model_id = j["model_id"].get<std::string>();
    h.endpoint = j["endpoint"].get<std::string>();
    h.decode.greedy = j.value("greedy", true);
    h.decode.temperature = j.value("temperature", 0.0);
    h.max_tokens = j.value("max_tokens", h.max_tokens);
    h.context_limit = j.value("context_limit", h.context_limit);
    h.logprobs = j.value("logprobs", h.logprobs);
    h.requests_per_minute = j.value("requests_per_minute", h.requests_per_minute);
    h.api_key_env = j.value("api_key_env", h.api_key_env);
    h.max_attempts = j.value("max_attempts", h.max_attempts);
    h.backoff_initial_seconds = j.value("backoff_initial_seconds", h.backoff_initial_seconds);
    h.score_max_tokens = j.value("score_max_tokens", h.score_max_tokens);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (h.max_attempts < 1) throw ConfigError("model.max_attempts must be >= 1");
  if (h.requests_per_minute < 0) throw ConfigError("model.requests_per_minute must be >= 0");
  return h;
}

json model_handle_json(const ModelHandle& h) {
  return {{"model_id", h.model_id},
          {"endpoint", h.endpoint},
          {"greedy", h.decode.greedy},
          {"temperature", h.decode.temperature},
          {"max_tokens", h.max_tokens},
          {"context_limit", h.context_limit},
          {"logprobs", h.logprobs}};
}

double mean_token_logprob(std::span<const TokenScore> scores) {
  if (scores.empty()) throw ValidationError("mean_token_logprob: empty score list");
  std::vector<double> lp;
  lp.reserve(scores.size());
  for (const auto& t : scores) lp.push_back(t.logprob);
  return running_mean(lp);
}

std::vector<std::string> mock_tokens(std::string_view continuation) {
  auto toks = text::split_whitespace(continuation);
  if (toks.empty()) toks.emplace_back(continuation);
  return toks;
}

// ---------------------------------------------------------------------------
// Mocks

BackendReply ConstantMock::complete(const ModelHandle&, std::string_view) { return {"", {}, json{{"text", ""}}}; }

BackendReply ConstantMock::score(const ModelHandle&, std::string_view, std::string_view continuation) {
  BackendReply r;
  for (auto& t : mock_tokens(continuation)) r.tokens.push_back({std::move(t), logprob_});
  r.raw = {{"tokens", tokens_json(r.tokens)}};
  return r;
}

TableMock::TableMock(std::map<std::string, std::vector<double>> scores, std::optional<double> fallback,
                     std::map<std::string, std::string> completions)
    : scores_(std::move(scores)), fallback_(fallback), completions_(std::move(completions)) {}

TableMock TableMock::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("mock table " + path.string() + ": " + e.what());
  }
  std::map<std::string, std::vector<double>> scores;
  if (j.contains("scores")) {
    for (auto it = j["scores"].begin(); it != j["scores"].end(); ++it) {
      if (it.value().is_number()) {
        scores[it.key()] = {it.value().get<double>()};
      } else {
        scores[it.key()] = it.value().get<std::vector<double>>();
      }
    }
  }
  std::optional<double> fallback;
  if (j.contains("default") && j["default"].is_number()) fallback = j["default"].get<double>();
  std::map<std::string, std::string> completions;
  if (j.contains("completions")) completions = j["completions"].get<std::map<std::string, std::string>>();
  return TableMock(std::move(scores), fallback, std::move(completions));
}

BackendReply TableMock::complete(const ModelHandle&, std::string_view prompt) {
  auto it = completions_.find(std::string(prompt));
  std::string text = it == completions_.end() ? "" : it->second;
  return {text, {}, json{{"text", text}}};
}

BackendReply TableMock::score(const ModelHandle&, std::string_view, std::string_view continuation) {
  const auto toks = mock_tokens(continuation);
  std::vector<double> values;
  auto it = scores_.find(std::string(continuation));
  if (it != scores_.end()) {
    values = it->second;
  } else if (fallback_) {
    values = {*fallback_};
  } else {
    throw LookupError("mock table has no scores for continuation \"" + std::string(continuation) + "\"");
  }
  if (values.size() == 1 && toks.size() > 1) values.assign(toks.size(), values.front());
  if (values.size() != toks.size()) {
    throw ValidationError("mock table lists " + std::to_string(values.size()) + " scores for a " +
                          std::to_string(toks.size()) + "-token continuation");
  }
  BackendReply r;
  for (std::size_t i = 0; i < toks.size(); ++i) r.tokens.push_back({toks[i], values[i]});
  r.raw = {{"tokens", tokens_json(r.tokens)}};
  return r;
}

std::optional<std::string> EchoAnswerMock::find_tag(std::string_view block) {
  static const std::regex kTag("#[A-Za-z0-9_-]+");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(block.begin(), block.end(), m, kTag)) return m.str();
  return std::nullopt;
}

BackendReply EchoAnswerMock::complete(const ModelHandle&, std::string_view prompt) {
  const auto blocks = split_blocks(prompt);
  std::string answer = "unknown";
  if (const auto tag = find_tag(blocks.back())) {
    // nearest matching demonstration wins
    for (std::size_t i = blocks.size() - 1; i-- > 0;) {
      if (blocks[i].find(*tag) == std::string_view::npos) continue;
      if (auto a = answer_line(blocks[i])) {
        answer = *a;
        break;
      }
    }
  }
  return {answer, {}, json{{"text", answer}}};
}

BackendReply EchoAnswerMock::score(const ModelHandle&, std::string_view, std::string_view continuation) {
  BackendReply r;
  for (auto& t : mock_tokens(continuation)) r.tokens.push_back({std::move(t), logprob_});
  r.raw = {{"tokens", tokens_json(r.tokens)}};
  return r;
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(const ModelHandle& h) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(h.endpoint, m, kUrl)) throw ConfigError("endpoint \"" + h.endpoint + "\" is not an http(s) URL");
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/completions";
  const char* key = std::getenv(h.api_key_env.c_str());
  if (!key) key = std::getenv("OPENAI_API_KEY");
  if (key) api_key_ = key;
}

json HttpBackend::post(const json& body) {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(10, 0);
  cli.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + scheme_host_port_ + path_ + " failed: " + httplib::to_string(res.error()));
  if (res->status == 400 && (res->body.find("context_length") != std::string::npos ||
                             res->body.find("maximum context length") != std::string::npos)) {
    throw ContextLengthError("server rejected prompt: context length exceeded (" + res->body.substr(0, 200) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + scheme_host_port_ + path_ + ": " +
                             res->body.substr(0, 200),
                         res->status);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("unparseable response body: ") + e.what(), 502);
  }
}

BackendReply HttpBackend::complete(const ModelHandle& h, std::string_view prompt) {
  json body = {{"model", h.model_id},
               {"prompt", std::string(prompt)},
               {"max_tokens", h.max_tokens},
               {"temperature", h.decode.greedy ? 0.0 : h.decode.temperature}};
  json resp = post(body);
  BackendReply r;
  try {
    r.text = resp.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("completion response lacks choices[0].text", 502);
  }
  r.raw = std::move(resp);
  return r;
}

std::vector<TokenScore> HttpBackend::extract_continuation(const json& response, std::string_view context,
                                                          std::string_view continuation) {
  const json* lp = nullptr;
  try {
    lp = &response.at("choices").at(0).at("logprobs");
  } catch (const json::exception&) {
    throw CapabilityError("response carries no logprobs; the backend does not support echo scoring");
  }
  if (lp->is_null()) throw CapabilityError("response carries null logprobs; the backend does not support echo scoring");
  const auto& tokens = lp->at("tokens");
  const auto& logprobs = lp->at("token_logprobs");
  const std::size_t n = tokens.size();
  std::vector<std::size_t> offsets(n);
  if (lp->contains("text_offset") && lp->at("text_offset").size() == n) {
    for (std::size_t i = 0; i < n; ++i) offsets[i] = lp->at("text_offset")[i].get<std::size_t>();
  } else {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      offsets[i] = acc;
      acc += codepoint_length(tokens[i].get<std::string>());
    }
  }
  const std::size_t ctx_len = codepoint_length(context);
  const std::size_t total = ctx_len + codepoint_length(continuation);
  std::vector<TokenScore> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t end = i + 1 < n ? offsets[i + 1] : total;
    if (end <= ctx_len || offsets[i] >= total) continue;  // token lies in the context or past the continuation
    if (logprobs[i].is_null()) throw TransportError("continuation token without a logprob", 502);
    out.push_back({tokens[i].get<std::string>(), logprobs[i].get<double>()});
  }
  if (out.empty()) throw TransportError("echo response contains no continuation tokens", 502);
  return out;
}

BackendReply HttpBackend::score(const ModelHandle& h, std::string_view context, std::string_view continuation) {
  json body = {{"model", h.model_id},
               {"prompt", std::string(context) + std::string(continuation)},
               {"max_tokens", h.score_max_tokens},
               {"temperature", 0.0},
               {"echo", true},
               {"logprobs", 0}};
  json resp = post(body);
  BackendReply r;
  r.tokens = extract_continuation(resp, context, continuation);
  r.raw = std::move(resp);
  return r;
}

std::unique_ptr<Backend> make_backend(const ModelHandle& h) {
  const std::string& ep = h.endpoint;
  if (ep.starts_with("http://") || ep.starts_with("https://")) return std::make_unique<HttpBackend>(h);
  if (!ep.starts_with("mock:")) throw ConfigError("unknown endpoint \"" + ep + "\" (expected http(s) URL or mock:<rule>)");
  const std::string_view spec = std::string_view(ep).substr(5);
  if (spec.starts_with("constant")) {
    auto arg = spec_argument(spec, "constant");
    if (!arg || arg->empty()) throw ConfigError("mock:constant needs a logprob, e.g. mock:constant(-0.7)");
    return std::make_unique<ConstantMock>(parse_double(*arg, "constant"));
  }
  if (spec.starts_with("table")) {
    auto arg = spec_argument(spec, "table");
    if (!arg || arg->empty()) throw ConfigError("mock:table needs a file, e.g. mock:table(scores.json)");
    return std::make_unique<TableMock>(TableMock::load(*arg));
  }
  if (spec.starts_with("echo-answer")) {
    auto arg = spec_argument(spec, "echo-answer");
    if (arg && arg->empty()) throw ConfigError("malformed mock spec \"" + ep + "\"");
    return std::make_unique<EchoAnswerMock>(arg ? parse_double(*arg, "echo-answer") : -1.0);
  }
  throw ConfigError("unknown mock rule \"" + ep + "\"");
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(double requests_per_minute)
    : capacity_(std::max(1.0, requests_per_minute)),
      tokens_(capacity_),
      refill_per_second_(requests_per_minute / 60.0),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (refill_per_second_ <= 0.0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * refill_per_second_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / refill_per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

std::shared_ptr<RateLimiter> RateLimiter::for_endpoint(const std::string& endpoint, double requests_per_minute) {
  static std::mutex mu;
  static std::map<std::string, std::weak_ptr<RateLimiter>> limiters;
  std::lock_guard lock(mu);
  auto& slot = limiters[endpoint];
  if (auto existing = slot.lock()) return existing;
  auto fresh = std::make_shared<RateLimiter>(requests_per_minute);
  slot = fresh;
  return fresh;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(ModelHandle handle, std::unique_ptr<Backend> backend, GatewayOptions opts)
    : handle_(std::move(handle)), backend_(std::move(backend)), opts_(std::move(opts)) {
  if (!backend_) throw ConfigError("gateway needs a backend");
  if (!opts_.sleep) opts_.sleep = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  if (backend_->network() && handle_.requests_per_minute > 0.0) {
    limiter_ = RateLimiter::for_endpoint(handle_.endpoint, handle_.requests_per_minute);
  }
}

Gateway::Gateway(ModelHandle handle, GatewayOptions opts)
    : Gateway(handle, make_backend(handle), std::move(opts)) {}

std::string Gateway::cache_key(std::string_view kind, std::string_view prompt, std::string_view continuation) const {
  json j = {{"kind", kind},
            {"model_id", handle_.model_id},
            {"greedy", handle_.decode.greedy},
            {"temperature", handle_.decode.greedy ? 0.0 : handle_.decode.temperature},
            {"max_tokens", kind == "complete" ? handle_.max_tokens : handle_.score_max_tokens},
            {"prompt", std::string(prompt)},
            {"continuation", std::string(continuation)}};
  return sha256_hex(j.dump());
}

GatewayStats Gateway::stats() const {
  return {backend_calls_.load(), network_calls_.load(), cache_hits_.load(), retries_.load()};
}

void Gateway::check_context(std::string_view prompt) const {
  if (handle_.context_limit == 0) return;
  const std::size_t n = text::split_whitespace(prompt).size();
  if (n > handle_.context_limit) {
    throw ContextLengthError("prompt has " + std::to_string(n) + " tokens, exceeding the context limit of " +
                             std::to_string(handle_.context_limit) + " tokens for model \"" + handle_.model_id + "\"");
  }
}

BackendReply Gateway::with_retries(const std::function<BackendReply()>& call) {
  auto delay = std::chrono::duration<double>(handle_.backoff_initial_seconds);
  for (int attempt = 1;; ++attempt) {
    if (limiter_) limiter_->acquire();
    backend_calls_.fetch_add(1);
    if (backend_->network()) network_calls_.fetch_add(1);
    try {
      return call();
    } catch (const TransportError& e) {
      if (!retryable(e)) throw;
      if (attempt >= handle_.max_attempts) {
        throw TransportError(std::string(e.what()) + " (gave up after " + std::to_string(attempt) + " attempts)",
                             e.status());
      }
      retries_.fetch_add(1);
      opts_.sleep(delay);
      delay *= 2;
    }
  }
}

std::optional<BackendReply> Gateway::read_disk(const std::string& key) const {
  if (!opts_.cache_dir) return std::nullopt;
  const auto path = *opts_.cache_dir / "responses" / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    json j = json::parse(read_file(path));
    BackendReply r;
    r.text = j.value("text", "");
    r.tokens = tokens_from_json(j.value("tokens", json::array()));
    r.raw = j.value("raw", json());
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entry: recompute and overwrite
  }
}

void Gateway::write_disk(const std::string& key, std::string_view kind, const BackendReply& reply) const {
  if (!opts_.cache_dir) return;
  const auto path = *opts_.cache_dir / "responses" / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
  json j = {{"key", key},
            {"kind", kind},
            {"model_id", handle_.model_id},
            {"text", reply.text},
            {"tokens", tokens_json(reply.tokens)},
            {"raw", reply.raw}};
  atomic_write(path, j.dump());
}

BackendReply Gateway::fetch(const std::string& key, std::string_view kind, const std::function<BackendReply()>& call) {
  const bool caching = opts_.memory_cache || opts_.cache_dir.has_value();
  if (!caching) return with_retries(call);

  std::promise<BackendReply> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      cache_hits_.fetch_add(1);
      return it->second;
    }
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      auto fut = it->second;
      lock.unlock();
      cache_hits_.fetch_add(1);
      return fut.get();
    }
    inflight_.emplace(key, promise.get_future().share());
  }
  try {
    BackendReply reply;
    if (auto disk = read_disk(key)) {
      cache_hits_.fetch_add(1);
      reply = std::move(*disk);
    } else {
      reply = with_retries(call);
      write_disk(key, kind, reply);
    }
    promise.set_value(reply);
    std::lock_guard lock(mu_);
    if (opts_.memory_cache) memory_.emplace(key, reply);
    inflight_.erase(key);
    return reply;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(mu_);
    inflight_.erase(key);
    throw;
  }
}

std::string Gateway::complete(std::string_view prompt) {
  if (text::trim(prompt).empty()) throw ValidationError("prompt must be non-empty");
  check_context(prompt);
  const std::string p(prompt);
  auto reply = fetch(cache_key("complete", p, ""), "complete", [&] { return backend_->complete(handle_, p); });
  return text::trim(reply.text);
}

std::vector<TokenScore> Gateway::score_continuation(std::string_view context, std::string_view continuation) {
  if (continuation.empty()) throw ValidationError("continuation must be non-empty");
  if (!handle_.logprobs || !backend_->supports_logprobs()) {
    throw CapabilityError("model \"" + handle_.model_id + "\" does not expose token logprobs");
  }
  check_context(std::string(context) + std::string(continuation));
  const std::string c(context), k(continuation);
  auto reply = fetch(cache_key("score", c, k), "score", [&] { return backend_->score(handle_, c, k); });
  return reply.tokens;
}

}  // namespace polyshot
