// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace polyshot {

struct DecodeParams {
  bool greedy = true;
  double temperature = 0.0;  // ignored when greedy

  bool operator==(const DecodeParams&) const = default;
};

/// Names a model and how to reach it.
///
/// `endpoint` is either an http(s) URL of an OpenAI-compatible completions
/// route, or a mock spec:
///   mock:constant(<logprob>)       every token scores <logprob>; completions are empty
///   mock:table(<path.json>)        per-continuation logprob lists, see TableMock
///   mock:echo-answer[(<logprob>)]  answers from a demonstration sharing the query's #tag
struct ModelHandle {
  std::string model_id;
  std::string endpoint;
  DecodeParams decode;
  std::size_t max_tokens = 32;
  std::size_t context_limit = 0;  // whitespace tokens; 0 = unchecked
  bool logprobs = true;           // backend can score continuations
  double requests_per_minute = 0.0;  // 0 = unlimited
  std::string api_key_env = "POLYSHOT_API_KEY";
  int max_attempts = 5;
  double backoff_initial_seconds = 0.5;
  /// max_tokens sent with echo scoring requests; some servers require >= 1.
  std::size_t score_max_tokens = 0;
};

ModelHandle parse_model_handle(const nlohmann::json& j);
nlohmann::json model_handle_json(const ModelHandle& h);

struct TokenScore {
  std::string token;
  double logprob = 0.0;  // natural log, <= 0
};

/// Arithmetic mean of the token logprobs. Throws ValidationError when empty.
double mean_token_logprob(std::span<const TokenScore> scores);

struct BackendReply {
  std::string text;
  std::vector<TokenScore> tokens;
  nlohmann::json raw;
};

/// One concrete model server or mock. Implementations throw TransportError
/// (retryable when status is 0, 408, 429 or 5xx) or ContextLengthError.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual bool network() const noexcept { return false; }
  virtual bool supports_logprobs() const noexcept { return true; }
  virtual BackendReply complete(const ModelHandle& h, std::string_view prompt) = 0;
  virtual BackendReply score(const ModelHandle& h, std::string_view context, std::string_view continuation) = 0;
};

/// Builds the backend named by h.endpoint. Throws ConfigError on an unknown spec.
std::unique_ptr<Backend> make_backend(const ModelHandle& h);

/// Token bucket shared by every gateway that talks to the same endpoint.
/// acquire() blocks until a token is available.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute);
  void acquire();
  static std::shared_ptr<RateLimiter> for_endpoint(const std::string& endpoint, double requests_per_minute);

 private:
  std::mutex mu_;
  double capacity_;
  double tokens_;
  double refill_per_second_;
  std::chrono::steady_clock::time_point last_;
};

struct GatewayOptions {
  std::optional<std::filesystem::path> cache_dir;  // on-disk response cache
  bool memory_cache = true;
  std::function<void(std::chrono::duration<double>)> sleep;  // backoff hook; defaults to this_thread::sleep_for
};

struct GatewayStats {
  std::size_t backend_calls = 0;
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
};

/// Cached, de-duplicated, retrying access to one model. Thread-safe.
///
/// Cache keys are SHA-256 over (model_id, decode, max_tokens, prompt,
/// continuation). Disk layout: <cache_dir>/responses/ab/cd/<key>.json, each
/// file holding the raw backend response plus the extracted fields. Files are
/// written temp-then-rename and never evicted.
class Gateway {
 public:
  Gateway(ModelHandle handle, std::unique_ptr<Backend> backend, GatewayOptions opts = {});
  explicit Gateway(ModelHandle handle, GatewayOptions opts = {});

  const ModelHandle& handle() const noexcept { return handle_; }

  /// Whitespace-stripped continuation of the prompt.
  std::string complete(std::string_view prompt);

  /// One score per continuation token, in order. The continuation must be
  /// non-empty; backends without logprob support raise CapabilityError.
  std::vector<TokenScore> score_continuation(std::string_view context, std::string_view continuation);

  GatewayStats stats() const;
  std::string cache_key(std::string_view kind, std::string_view prompt, std::string_view continuation) const;

 private:
  BackendReply fetch(const std::string& key, std::string_view kind, const std::function<BackendReply()>& call);
  BackendReply with_retries(const std::function<BackendReply()>& call);
  std::optional<BackendReply> read_disk(const std::string& key) const;
  void write_disk(const std::string& key, std::string_view kind, const BackendReply& reply) const;
  void check_context(std::string_view prompt) const;

  ModelHandle handle_;
  std::unique_ptr<Backend> backend_;
  GatewayOptions opts_;
  std::shared_ptr<RateLimiter> limiter_;

  mutable std::mutex mu_;
  std::unordered_map<std::string, BackendReply> memory_;
  std::unordered_map<std::string, std::shared_future<BackendReply>> inflight_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
};

/// Splits a continuation into mock tokens (whitespace pieces; a blank
/// continuation is one token).
std::vector<std::string> mock_tokens(std::string_view continuation);

/// Lookup-table mock. File layout:
///   {"scores": {"<continuation>": [lp, ...] | lp}, "default": lp,
///    "completions": {"<prompt>": "<text>"}}
/// A list must match the token count; a scalar is broadcast.
class TableMock final : public Backend {
 public:
  TableMock(std::map<std::string, std::vector<double>> scores, std::optional<double> fallback = std::nullopt,
            std::map<std::string, std::string> completions = {});
  static TableMock load(const std::filesystem::path& path);

  BackendReply complete(const ModelHandle& h, std::string_view prompt) override;
  BackendReply score(const ModelHandle& h, std::string_view context, std::string_view continuation) override;

 private:
  std::map<std::string, std::vector<double>> scores_;
  std::optional<double> fallback_;
  std::map<std::string, std::string> completions_;
};

/// Answers with the answer line of the first demonstration whose block
/// carries the same "#tag" as the query block; "unknown" otherwise.
class EchoAnswerMock final : public Backend {
 public:
  explicit EchoAnswerMock(double logprob = -1.0) : logprob_(logprob) {}
  BackendReply complete(const ModelHandle& h, std::string_view prompt) override;
  BackendReply score(const ModelHandle& h, std::string_view context, std::string_view continuation) override;

  static std::optional<std::string> find_tag(std::string_view block);

 private:
  double logprob_;
};

class ConstantMock final : public Backend {
 public:
  explicit ConstantMock(double logprob) : logprob_(logprob) {}
  BackendReply complete(const ModelHandle& h, std::string_view prompt) override;
  BackendReply score(const ModelHandle& h, std::string_view context, std::string_view continuation) override;

 private:
  double logprob_;
};

/// OpenAI-compatible /completions client. Scoring sends the concatenated
/// text with echo=true, logprobs=0 and reads back the continuation's
/// token_logprobs using text_offset (code points).
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const ModelHandle& h);
  bool network() const noexcept override { return true; }
  bool supports_logprobs() const noexcept override { return true; }
  BackendReply complete(const ModelHandle& h, std::string_view prompt) override;
  BackendReply score(const ModelHandle& h, std::string_view context, std::string_view continuation) override;

  /// Pulls the continuation's scores out of an echo response.
  static std::vector<TokenScore> extract_continuation(const nlohmann::json& response, std::string_view context,
                                                      std::string_view continuation);

 private:
  nlohmann::json post(const nlohmann::json& body);

  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

}  // namespace polyshot
