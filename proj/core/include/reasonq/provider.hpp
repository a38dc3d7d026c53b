#pragma once

#include "reasonq/canonical_json.hpp"
#include "reasonq/corpus.hpp"
#include "reasonq/error.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <vector>

namespace reasonq {

struct GenRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.7;
  std::int64_t max_new_tokens = 256;
  std::int64_t run_index = 0;
  std::int64_t seed_tag = 42;  // forwarded to live backends, not part of the cache key
};

/// The object hashed for the cache key: {max_new_tokens, model_id, prompt,
/// run_index, temperature}.
Json canonical_request(const GenRequest& req);

/// SHA-256 (64 lowercase hex chars) of canonical_dump(canonical_request(req)).
std::string cache_key(const GenRequest& req);

enum class Origin { Live, Cache, Replay };
const char* to_string(Origin origin) noexcept;

struct ModelResponse {
  std::string raw_text;
  std::int64_t token_count = 0;
  bool token_count_estimated = false;
  double latency_ms = 0.0;
  Origin origin = Origin::Live;
};

/// {raw_text, token_count, token_count_estimated, latency_ms}; origin is a
/// property of the lookup path and is never persisted.
Json response_to_json(const ModelResponse& resp);
ModelResponse response_from_json(const Json& j);

std::int64_t whitespace_token_count(std::string_view text);

struct RunSet {
  std::string instance_id;
  std::string model_id;
  std::vector<ModelResponse> responses;  // index == run_index
};

/// Transport-level failure. `retryable` covers 408, 429, 5xx and connection
/// errors.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status, bool retryable)
      : Error(ErrorKind::Transport, message), status_(status), retryable_(retryable) {}
  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

bool is_retryable_status(int status) noexcept;

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ModelResponse generate(const GenRequest& req, const std::string& digest) = 0;
  virtual std::string describe() const = 0;
};

/// Serves recorded responses from a JSONL file of {digest, response[, request]}.
class ReplayBackend final : public Backend {
 public:
  static std::shared_ptr<ReplayBackend> load(const std::filesystem::path& path);

  ModelResponse generate(const GenRequest& req, const std::string& digest) override;
  std::string describe() const override { return "replay:" + source_; }

  std::size_t size() const { return entries_.size(); }
  /// Model ids seen in recorded requests (lines without a request contribute none).
  const std::set<std::string>& model_ids() const { return models_; }

 private:
  std::map<std::string, ModelResponse> entries_;
  std::set<std::string> models_;
  std::string source_;
};

struct HttpResult {
  int status = 0;
  std::string body;
};

/// Minimal HTTP POST seam so the chat backend can be exercised with scripted
/// fakes. Connection failures throw TransportError(retryable=true).
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& url, const std::map<std::string, std::string>& headers,
                          const std::string& body) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(std::chrono::milliseconds timeout);

struct ChatBackendConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-style chat completion: one user message holding the prompt.
class ChatCompletionBackend final : public Backend {
 public:
  ChatCompletionBackend(ChatBackendConfig config, std::unique_ptr<HttpTransport> transport);

  ModelResponse generate(const GenRequest& req, const std::string& digest) override;
  std::string describe() const override { return "live:" + config_.endpoint; }

  static Json request_body(const GenRequest& req);
  /// Decodes a completion payload; throws Error(Decode) on shape mismatch.
  static ModelResponse decode(const std::string& body);

 private:
  ChatBackendConfig config_;
  std::unique_ptr<HttpTransport> transport_;
};

struct CacheVerifyReport {
  std::size_t checked = 0;
  std::vector<std::pair<std::string, std::string>> corrupt;  // file name, reason
};

struct CacheStats {
  std::size_t entries = 0;
  std::size_t bytes = 0;
  std::size_t temp_files = 0;
};

/// Directory of `<digest>.json` files, each holding the canonical request,
/// the response and an integrity hash. Entries are write-once.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::optional<ModelResponse> get(const std::string& digest) const;
  /// Stores the entry unless one already exists; returns the stored response
  /// (the earlier one when the digest was already present).
  ModelResponse put(const std::string& digest, const GenRequest& req, const ModelResponse& resp);

  CacheStats stats() const;
  CacheVerifyReport verify() const;
  /// Removes leftover temp files and entries that fail verification.
  std::size_t gc();

 private:
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double jitter = 0.2;
};

struct ProviderCounters {
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<std::size_t> upstream_calls{0};
  std::atomic<std::size_t> retries{0};
};

class Provider {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Provider(std::shared_ptr<Backend> upstream, std::optional<ResponseCache> cache, RetryPolicy retry = {},
           std::size_t max_in_flight = 4, Sleeper sleeper = {});

  ModelResponse complete(const GenRequest& req);

  const ProviderCounters& counters() const { return counters_; }
  const Backend& upstream() const { return *upstream_; }
  /// Backoff before retry number `attempt` (1-based): base * 2^(attempt-1),
  /// scaled by a jitter factor in [1 - jitter, 1 + jitter] drawn from the digest.
  std::chrono::milliseconds backoff(const std::string& digest, int attempt) const;

 private:
  std::shared_ptr<Backend> upstream_;
  std::optional<ResponseCache> cache_;
  RetryPolicy retry_;
  std::counting_semaphore<1024> in_flight_;
  Sleeper sleeper_;
  ProviderCounters counters_;
};

struct SamplingSettings {
  double temperature = 0.7;
  std::int64_t max_new_tokens = 256;
  std::int64_t seed_tag = 42;
};

/// K responses for one instance, ordered by run_index regardless of the
/// order in which concurrent requests complete.
RunSet collect_runs(const EvalInstance& instance, const std::string& model_id, std::size_t k, Provider& provider,
                    const SamplingSettings& settings = {}, std::size_t concurrency = 1);

}  // namespace reasonq
