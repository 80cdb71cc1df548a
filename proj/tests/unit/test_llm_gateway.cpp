// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "polyshot/error.hpp"
#include "polyshot/llm_gateway.hpp"
#include "polyshot/util.hpp"

using namespace polyshot;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

ModelHandle mock(std::string endpoint) {
  ModelHandle h;
  h.model_id = "m";
  h.endpoint = std::move(endpoint);
  return h;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("polyshot_gw_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<double> lps(const std::vector<TokenScore>& s) {
  std::vector<double> out;
  for (const auto& t : s) out.push_back(t.logprob);
  return out;
}

/// Counts calls and forwards to another backend.
class Counting final : public Backend {
 public:
  explicit Counting(std::unique_ptr<Backend> inner, bool net = false) : inner_(std::move(inner)), net_(net) {}
  bool network() const noexcept override { return net_; }
  BackendReply complete(const ModelHandle& h, std::string_view p) override {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    return inner_->complete(h, p);
  }
  BackendReply score(const ModelHandle& h, std::string_view c, std::string_view k) override {
    ++calls;
    return inner_->score(h, c, k);
  }
  std::atomic<int> calls{0};

 private:
  std::unique_ptr<Backend> inner_;
  bool net_;
};

/// Fails with the given status a fixed number of times, then succeeds.
class Flaky final : public Backend {
 public:
  Flaky(int failures, int status) : failures_(failures), status_(status) {}
  BackendReply complete(const ModelHandle&, std::string_view) override {
    ++calls;
    if (failures_-- > 0) throw TransportError("boom", status_);
    return {"ok", {}, {}};
  }
  BackendReply score(const ModelHandle& h, std::string_view, std::string_view) override { return complete(h, ""); }
  int calls = 0;

 private:
  int failures_;
  int status_;
};

}  // namespace

TEST(MeanLogprob, Examples) {
  const std::vector<TokenScore> three{{"a", -0.7}, {"b", -0.7}, {"c", -0.7}};
  EXPECT_DOUBLE_EQ(mean_token_logprob(three), -0.7);
  const std::vector<TokenScore> two{{"a", -0.1}, {"b", -0.9}};
  EXPECT_NEAR(mean_token_logprob(two), -0.5, 1e-15);
  EXPECT_THROW(mean_token_logprob({}), ValidationError);
}

TEST(Mocks, ConstantFourTokens) {
  Gateway g(mock("mock:constant(-0.7)"));
  const auto s = g.score_continuation("ctx", "one two three four");
  EXPECT_EQ(lps(s), (std::vector<double>{-0.7, -0.7, -0.7, -0.7}));
  EXPECT_THROW(g.score_continuation("ctx", ""), ValidationError);
}

TEST(Mocks, TablePassthrough) {
  const auto dir = fresh_dir("table");
  atomic_write(dir / "t.json", R"({"scores": {"red car": [-0.1, -0.9], "x": -2.0}, "completions": {"P": " hi "}})");
  Gateway g(mock("mock:table(" + (dir / "t.json").string() + ")"));
  EXPECT_EQ(lps(g.score_continuation("c", "red car")), (std::vector<double>{-0.1, -0.9}));
  EXPECT_EQ(lps(g.score_continuation("c", "x")), (std::vector<double>{-2.0}));
  EXPECT_THROW(g.score_continuation("c", "unknown"), LookupError);
  EXPECT_EQ(g.complete("P"), "hi");
}

TEST(Mocks, EchoAnswer) {
  Gateway g(mock("mock:echo-answer"));
  const std::string prompt =
      "Answer the question.\n\n"
      "Question: about #c01\na. x\nb. y\nc. z\nd. w\ne. v\nAnswer: c\n\n"
      "Question: about #c07\na. x\nb. y\nc. z\nd. w\ne. v\nAnswer: b\n\n"
      "Question: query about #c07\na. x\nb. y\nc. z\nd. w\ne. v\nAnswer: ";
  EXPECT_EQ(g.complete(prompt), "b");
  EXPECT_EQ(g.complete("Answer.\n\nQuestion: #c09\nAnswer: "), "unknown");
}

TEST(Mocks, UnknownSpec) {
  EXPECT_THROW(make_backend(mock("mock:nope")), ConfigError);
  EXPECT_THROW(make_backend(mock("ftp://x")), ConfigError);
  EXPECT_THROW(make_backend(mock("mock:constant(abc)")), ConfigError);
}

TEST(Gateway, CapabilityError) {
  auto h = mock("mock:constant(-1)");
  h.logprobs = false;
  Gateway g(h);
  EXPECT_THROW(g.score_continuation("c", "x"), CapabilityError);
}

TEST(Gateway, ContextLimitNamed) {
  auto h = mock("mock:constant(-1)");
  h.context_limit = 3;
  Gateway g(h);
  try {
    g.complete("one two three four five");
    FAIL() << "expected ContextLengthError";
  } catch (const ContextLengthError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  EXPECT_NO_THROW(g.complete("one two"));
}

TEST(Gateway, SecondCallFromMemory) {
  auto counting = std::make_unique<Counting>(make_backend(mock("mock:echo-answer")), true);
  auto* raw = counting.get();
  Gateway g(mock("mock:echo-answer"), std::move(counting));
  g.complete("P #a\n\nQ #a\nAnswer: ");
  g.complete("P #a\n\nQ #a\nAnswer: ");
  EXPECT_EQ(raw->calls.load(), 1);
  EXPECT_EQ(g.stats().network_calls, 1u);
  EXPECT_EQ(g.stats().cache_hits, 1u);
}

TEST(Gateway, DiskCacheSurvivesRestart) {
  const auto dir = fresh_dir("disk");
  GatewayOptions o;
  o.cache_dir = dir;
  {
    Gateway g(mock("mock:constant(-0.25)"), o);
    g.score_continuation("ctx", "a b");
  }
  auto counting = std::make_unique<Counting>(make_backend(mock("mock:constant(-0.25)")));
  auto* raw = counting.get();
  Gateway g2(mock("mock:constant(-0.25)"), std::move(counting), o);
  EXPECT_EQ(lps(g2.score_continuation("ctx", "a b")), (std::vector<double>{-0.25, -0.25}));
  EXPECT_EQ(raw->calls.load(), 0);
  // two-level fan-out
  const auto key = g2.cache_key("score", "ctx", "a b");
  EXPECT_TRUE(fs::exists(dir / "responses" / key.substr(0, 2) / key.substr(2, 2) / (key + ".json")));
}

TEST(Gateway, CacheKeyCoversModelAndDecode) {
  Gateway a(mock("mock:constant(-1)"));
  auto h = mock("mock:constant(-1)");
  h.model_id = "other";
  Gateway b(h);
  EXPECT_NE(a.cache_key("complete", "p", ""), b.cache_key("complete", "p", ""));
  EXPECT_NE(a.cache_key("complete", "p", ""), a.cache_key("score", "p", ""));
  EXPECT_EQ(a.cache_key("complete", "p", ""), Gateway(mock("mock:constant(-1)")).cache_key("complete", "p", ""));
}

TEST(Gateway, InflightDeduplication) {
  auto counting = std::make_unique<Counting>(make_backend(mock("mock:echo-answer")));
  auto* raw = counting.get();
  Gateway g(mock("mock:echo-answer"), std::move(counting));
  parallel_for(16, 8, [&](std::size_t) { g.complete("same prompt #x\n\nq #x\nAnswer: "); });
  EXPECT_EQ(raw->calls.load(), 1);
}

TEST(Gateway, CacheTransparency) {
  GatewayOptions off;
  off.memory_cache = false;
  Gateway cached(mock("mock:echo-answer(-0.3)"));
  Gateway uncached(mock("mock:echo-answer(-0.3)"), off);
  for (const std::string p : {"I\n\nQuestion: #t1\nAnswer: a\n\nQuestion: #t1\nAnswer: ", "I\n\nQuestion: #t2\nAnswer: "}) {
    EXPECT_EQ(cached.complete(p), uncached.complete(p));
    EXPECT_EQ(cached.complete(p), uncached.complete(p));
  }
  EXPECT_EQ(lps(cached.score_continuation("c", "a b")), lps(uncached.score_continuation("c", "a b")));
}

TEST(Gateway, RetriesWithBackoff) {
  std::vector<double> sleeps;
  GatewayOptions o;
  o.sleep = [&](std::chrono::duration<double> d) { sleeps.push_back(d.count()); };
  auto flaky = std::make_unique<Flaky>(3, 503);
  auto* raw = flaky.get();
  Gateway g(mock("mock:constant(-1)"), std::move(flaky), o);
  EXPECT_EQ(g.complete("p"), "ok");
  EXPECT_EQ(raw->calls, 4);
  EXPECT_EQ(sleeps, (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_EQ(g.stats().retries, 3u);
}

TEST(Gateway, GivesUpAfterMaxAttempts) {
  GatewayOptions o;
  o.sleep = [](std::chrono::duration<double>) {};
  auto flaky = std::make_unique<Flaky>(100, 429);
  auto* raw = flaky.get();
  Gateway g(mock("mock:constant(-1)"), std::move(flaky), o);
  EXPECT_THROW(g.complete("p"), TransportError);
  EXPECT_EQ(raw->calls, 5);
}

TEST(Gateway, NonRetryableStatus) {
  GatewayOptions o;
  o.sleep = [](std::chrono::duration<double>) {};
  auto flaky = std::make_unique<Flaky>(1, 401);
  auto* raw = flaky.get();
  Gateway g(mock("mock:constant(-1)"), std::move(flaky), o);
  EXPECT_THROW(g.complete("p"), TransportError);
  EXPECT_EQ(raw->calls, 1);
}

TEST(RateLimiter, SharedPerEndpoint) {
  auto a = RateLimiter::for_endpoint("http://x", 60);
  auto b = RateLimiter::for_endpoint("http://x", 60);
  auto c = RateLimiter::for_endpoint("http://y", 60);
  EXPECT_EQ(a.get(), b.get());
  EXPECT_NE(a.get(), c.get());
}

TEST(RateLimiter, BlocksWhenEmpty) {
  RateLimiter r(600);  // 10 per second, burst 600
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 600; ++i) r.acquire();
  r.acquire();
  const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GT(waited, 0.05);
}

TEST(Http, ExtractContinuationByOffsets) {
  const json resp = {{"choices",
                      {{{"text", "Q: hi\nA: red car"},
                        {"logprobs",
                         {{"tokens", {"Q", ":", " hi", "\n", "A", ":", " red", " car"}},
                          {"token_logprobs", {nullptr, -1, -1, -1, -1, -1, -0.1, -0.9}},
                          {"text_offset", {0, 1, 2, 5, 6, 7, 8, 12}}}}}}}};
  const auto s = HttpBackend::extract_continuation(resp, "Q: hi\nA:", " red car");
  EXPECT_EQ(lps(s), (std::vector<double>{-0.1, -0.9}));
  EXPECT_THROW(HttpBackend::extract_continuation(json{{"choices", {{{"text", "x"}}}}}, "a", "b"), CapabilityError);
}

namespace {

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};
  json last_body;
  std::mutex mu;

  LocalServer() {
    server.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      const auto body = json::parse(req.body);
      {
        std::lock_guard lock(mu);
        last_body = body;
      }
      if (fail_first.fetch_sub(1) > 0) {
        res.status = 503;
        res.set_content("busy", "text/plain");
        return;
      }
      const auto prompt = body.at("prompt").get<std::string>();
      if (prompt.find("TOO LONG") != std::string::npos) {
        res.status = 400;
        res.set_content(R"({"error":{"code":"context_length_exceeded","message":"maximum context length is 4097"}})",
                        "application/json");
        return;
      }
      json choice;
      if (body.value("echo", false)) {
        json toks = json::array(), lp = json::array(), off = json::array();
        std::size_t pos = 0;
        double v = -0.1;
        while (pos < prompt.size()) {
          auto next = prompt.find(' ', pos + 1);
          if (next == std::string::npos) next = prompt.size();
          toks.push_back(prompt.substr(pos, next - pos));
          lp.push_back(toks.size() == 1 ? json(nullptr) : json(v));
          off.push_back(pos);
          v -= 0.1;
          pos = next;
        }
        choice = {{"text", prompt}, {"logprobs", {{"tokens", toks}, {"token_logprobs", lp}, {"text_offset", off}}}};
      } else {
        choice = {{"text", "  b  "}};
      }
      res.set_content(json{{"choices", {choice}}}.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/completions"; }
};

}  // namespace

TEST(Http, CompleteAndScoreAgainstLocalServer) {
  LocalServer srv;
  ModelHandle h = mock(srv.url());
  h.max_tokens = 7;
  Gateway g(h);
  EXPECT_EQ(g.complete("Question: x\nAnswer: "), "b");
  {
    std::lock_guard lock(srv.mu);
    EXPECT_EQ(srv.last_body.at("model"), "m");
    EXPECT_EQ(srv.last_body.at("max_tokens"), 7);
    EXPECT_EQ(srv.last_body.at("temperature"), 0.0);
  }
  const auto s = g.score_continuation("aa bb", " cc dd");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_NEAR(s[0].logprob, -0.3, 1e-12);
  EXPECT_NEAR(s[1].logprob, -0.4, 1e-12);
  {
    std::lock_guard lock(srv.mu);
    EXPECT_EQ(srv.last_body.at("echo"), true);
    EXPECT_EQ(srv.last_body.at("logprobs"), 0);
  }
  const int before = srv.hits.load();
  g.complete("Question: x\nAnswer: ");
  EXPECT_EQ(srv.hits.load(), before);
  EXPECT_EQ(g.stats().network_calls, 2u);
}

TEST(Http, RetriesServerErrors) {
  LocalServer srv;
  srv.fail_first = 2;
  ModelHandle h = mock(srv.url());
  h.backoff_initial_seconds = 0.001;
  Gateway g(h);
  EXPECT_EQ(g.complete("p"), "b");
  EXPECT_EQ(srv.hits.load(), 3);
  EXPECT_EQ(g.stats().retries, 2u);
}

TEST(Http, ContextLengthNotRetried) {
  LocalServer srv;
  ModelHandle h = mock(srv.url());
  h.backoff_initial_seconds = 0.001;
  Gateway g(h);
  EXPECT_THROW(g.complete("TOO LONG prompt"), ContextLengthError);
  EXPECT_EQ(srv.hits.load(), 1);
}

TEST(Http, ConnectionRefusedIsTransportError) {
  ModelHandle h = mock("http://127.0.0.1:1/v1/completions");
  h.max_attempts = 2;
  h.backoff_initial_seconds = 0.001;
  Gateway g(h);
  EXPECT_THROW(g.complete("p"), TransportError);
}

TEST(Handle, ParseJson) {
  const auto h = parse_model_handle(json::parse(
      R"({"model_id":"gpt","endpoint":"https://api.example/v1/completions","max_tokens":16,"context_limit":4000,"requests_per_minute":30})"));
  EXPECT_EQ(h.model_id, "gpt");
  EXPECT_TRUE(h.decode.greedy);
  EXPECT_EQ(h.max_tokens, 16u);
  EXPECT_EQ(h.context_limit, 4000u);
  EXPECT_THROW(parse_model_handle(json::parse(R"j({"endpoint":"mock:constant(-1)"})j")), ConfigError);
}
