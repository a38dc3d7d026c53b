#include "doctest.h"

#include "reasonq/corpus.hpp"
#include "reasonq/provider.hpp"
#include "support/test_support.hpp"

#include <deque>
#include <mutex>

using namespace reasonq;

namespace {

/// Scripted transport: replies in order, records every call.
class ScriptedTransport final : public HttpTransport {
 public:
  explicit ScriptedTransport(std::deque<HttpResult> replies) : replies_(std::move(replies)) {}
  HttpResult post(const std::string& url, const std::map<std::string, std::string>&, const std::string& body) override {
    std::lock_guard lock(mu_);
    urls.push_back(url);
    bodies.push_back(body);
    if (replies_.empty()) throw TransportError("connection refused", 0, true);
    HttpResult r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<std::string> urls, bodies;

 private:
  std::deque<HttpResult> replies_;
  std::mutex mu_;
};

const std::string kOkBody =
    R"({"choices":[{"message":{"role":"assistant","content":"The answer is 5."}}],"usage":{"completion_tokens":6}})";

GenRequest request(std::string prompt, std::int64_t run = 0) {
  GenRequest r;
  r.model_id = "mini-strong";
  r.prompt = std::move(prompt);
  r.run_index = run;
  return r;
}

std::shared_ptr<Backend> replay() { return ReplayBackend::load(rqtest::fixture("mini/replay.jsonl")); }

std::string runset_bytes(const RunSet& s) {
  Json j = Json::array();
  for (const auto& r : s.responses) j.push_back(response_to_json(r));
  return canonical_dump(j);
}

}  // namespace

TEST_SUITE("provider") {
  TEST_CASE("replay fixture loads with its model set") {
    auto rb = ReplayBackend::load(rqtest::fixture("mini/replay.jsonl"));
    CHECK(rb->size() == 144);
    CHECK(rb->model_ids() == std::set<std::string>{"mini-strong", "mini-weak"});
  }

  TEST_CASE("replay miss") {
    auto rb = replay();
    auto req = request("a prompt nobody recorded");
    try {
      rb->generate(req, cache_key(req));
      FAIL("expected a replay miss");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ReplayMiss);
    }
  }

  TEST_CASE("second identical call is a cache hit with no upstream call") {
    rqtest::TempDir dir;
    auto counting = std::make_shared<rqtest::CountingBackend>(replay());
    Provider provider(counting, ResponseCache(dir.path()));
    auto req = request("Tom has 5 apples and buys 7 more. How many apples does he have?");
    auto first = provider.complete(req);
    CHECK(first.origin == Origin::Replay);
    auto second = provider.complete(req);
    CHECK(second.origin == Origin::Cache);
    CHECK(second.raw_text == first.raw_text);
    CHECK(counting->calls == 1);
    CHECK(provider.counters().cache_hits == 1);
    CHECK(provider.counters().upstream_calls == 1);
  }

  TEST_CASE("cache entries are write-once") {
    rqtest::TempDir dir;
    ResponseCache cache(dir.path());
    auto req = request("q");
    auto digest = cache_key(req);
    cache.put(digest, req, rqtest::response("first"));
    auto kept = cache.put(digest, req, rqtest::response("second"));
    CHECK(kept.raw_text == "first");
    CHECK(cache.get(digest)->raw_text == "first");
    CHECK(cache.stats().entries == 1);
  }

  TEST_CASE("verify detects tampering and gc removes the entry") {
    rqtest::TempDir dir;
    ResponseCache cache(dir.path());
    auto a = request("q1"), b = request("q2");
    cache.put(cache_key(a), a, rqtest::response("one"));
    cache.put(cache_key(b), b, rqtest::response("two"));
    rqtest::write_text(dir / "leftover.123.tmp", "partial");
    CHECK(cache.verify().corrupt.empty());
    CHECK(cache.verify().checked == 2);
    CHECK(cache.stats().temp_files == 1);

    auto file = dir / (cache_key(a) + ".json");
    auto text = rqtest::read_text(file);
    auto pos = text.find("one");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 3, "uno");
    rqtest::write_text(file, text);

    auto report = cache.verify();
    REQUIRE(report.corrupt.size() == 1);
    CHECK(report.corrupt[0].first == cache_key(a) + ".json");
    CHECK(cache.gc() == 2);
    CHECK(cache.stats().entries == 1);
    CHECK(cache.stats().temp_files == 0);
  }

  TEST_CASE("empty cache stats") {
    rqtest::TempDir dir;
    auto s = ResponseCache(dir.path()).stats();
    CHECK(s.entries == 0);
    CHECK(s.bytes == 0);
  }

  TEST_CASE("429 twice then 200 succeeds on the third attempt") {
    auto transport = std::make_unique<ScriptedTransport>(
        std::deque<HttpResult>{{429, "slow down"}, {429, "slow down"}, {200, kOkBody}});
    auto* t = transport.get();
    auto backend = std::make_shared<ChatCompletionBackend>(ChatBackendConfig{"http://llm.test/v1/chat/completions"},
                                                           std::move(transport));
    std::vector<std::chrono::milliseconds> sleeps;
    Provider provider(backend, std::nullopt, RetryPolicy{5, std::chrono::milliseconds(100), 0.2}, 4,
                      [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    auto req = request("2+3?");
    auto r = provider.complete(req);
    CHECK(r.raw_text == "The answer is 5.");
    CHECK(r.token_count == 6);
    CHECK_FALSE(r.token_count_estimated);
    CHECK(t->bodies.size() == 3);
    CHECK(provider.counters().retries == 2);
    CHECK(provider.counters().upstream_calls == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[0] == provider.backoff(cache_key(req), 1));
    CHECK(sleeps[1] == provider.backoff(cache_key(req), 2));
    CHECK(sleeps[0].count() >= 80);
    CHECK(sleeps[0].count() <= 120);
    CHECK(sleeps[1].count() >= 160);
    CHECK(sleeps[1].count() <= 240);
  }

  TEST_CASE("non-retryable status fails at once") {
    auto transport = std::make_unique<ScriptedTransport>(std::deque<HttpResult>{{400, "bad"}, {200, kOkBody}});
    auto backend = std::make_shared<ChatCompletionBackend>(ChatBackendConfig{"http://llm.test"}, std::move(transport));
    Provider provider(backend, std::nullopt, {}, 4, [](std::chrono::milliseconds) {});
    try {
      provider.complete(request("x"));
      FAIL("expected a transport error");
    } catch (const TransportError& e) {
      CHECK(e.status() == 400);
      CHECK_FALSE(e.retryable());
    }
    CHECK(provider.counters().upstream_calls == 1);
  }

  TEST_CASE("retries give up after max attempts") {
    auto transport = std::make_unique<ScriptedTransport>(std::deque<HttpResult>{});
    auto backend = std::make_shared<ChatCompletionBackend>(ChatBackendConfig{"http://llm.test"}, std::move(transport));
    Provider provider(backend, std::nullopt, RetryPolicy{3, std::chrono::milliseconds(1), 0.0}, 4,
                      [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(provider.complete(request("x")), TransportError);
    CHECK(provider.counters().upstream_calls == 3);
  }

  TEST_CASE("retryable statuses") {
    for (int s : {408, 429, 500, 502, 503}) CHECK(is_retryable_status(s));
    for (int s : {200, 400, 401, 404}) CHECK_FALSE(is_retryable_status(s));
  }

  TEST_CASE("chat request body and decode") {
    GenRequest req = request("hello");
    req.max_new_tokens = 64;
    req.seed_tag = 9;
    CHECK(canonical_dump(ChatCompletionBackend::request_body(req)) ==
          R"({"max_tokens":64,"messages":[{"content":"hello","role":"user"}],"model":"mini-strong","seed":9,"temperature":0.7})");
    auto r = ChatCompletionBackend::decode(R"({"choices":[{"message":{"content":"one two three"}}]})");
    CHECK(r.token_count == 3);
    CHECK(r.token_count_estimated);
    CHECK_THROWS_AS(ChatCompletionBackend::decode(R"({"choices":[]})"), Error);
    CHECK_THROWS_AS(ChatCompletionBackend::decode("not json"), Error);
  }

  TEST_CASE("response json round-trips without origin") {
    ModelResponse r = rqtest::response("text", 12);
    r.latency_ms = 3.5;
    r.origin = Origin::Cache;
    Json j = response_to_json(r);
    CHECK_FALSE(j.contains("origin"));
    auto back = response_from_json(j);
    CHECK(back.raw_text == "text");
    CHECK(back.token_count == 12);
    CHECK(back.latency_ms == 3.5);
  }

  TEST_CASE("collect_runs orders by run index") {
    auto corpus = load_corpus(rqtest::fixture("mini/mini.jsonl"));
    Provider provider(replay(), std::nullopt);
    auto set = collect_runs(corpus.instances[0], "mini-strong", 3, provider);
    REQUIRE(set.responses.size() == 3);
    auto rb = replay();
    for (std::size_t i = 0; i < 3; ++i) {
      auto req = request(corpus.instances[0].prompt, static_cast<std::int64_t>(i));
      CHECK(set.responses[i].raw_text == rb->generate(req, cache_key(req)).raw_text);
    }
  }

  TEST_CASE("collect_runs with concurrency 2 matches the sequential run") {
    auto corpus = load_corpus(rqtest::fixture("mini/mini.jsonl"));
    Provider provider(replay(), std::nullopt);
    for (const auto& inst : corpus.instances) {
      CHECK(runset_bytes(collect_runs(inst, "mini-weak", 3, provider, {}, 1)) ==
            runset_bytes(collect_runs(inst, "mini-weak", 3, provider, {}, 2)));
    }
  }

  TEST_CASE("k=1 is rejected") {
    auto corpus = load_corpus(rqtest::fixture("mini/mini.jsonl"));
    Provider provider(replay(), std::nullopt);
    try {
      collect_runs(corpus.instances[0], "mini-strong", 1, provider);
      FAIL("expected a precondition error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Precondition);
    }
  }

  TEST_CASE("whitespace token count") {
    CHECK(whitespace_token_count("") == 0);
    CHECK(whitespace_token_count("  a  b\tc\n") == 3);
  }
}
