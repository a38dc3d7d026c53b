#include "reasonq/provider.hpp"

#include "reasonq/rng.hpp"

#include <spdlog/spdlog.h>

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace reasonq {

namespace fs = std::filesystem;

Json canonical_request(const GenRequest& req) {
  Json j = Json::object();
  j["max_new_tokens"] = req.max_new_tokens;
  j["model_id"] = req.model_id;
  j["prompt"] = req.prompt;
  j["run_index"] = req.run_index;
  j["temperature"] = req.temperature;
  return j;
}

std::string cache_key(const GenRequest& req) { return sha256_hex(canonical_dump(canonical_request(req))); }

const char* to_string(Origin origin) noexcept {
  switch (origin) {
    case Origin::Live: return "live";
    case Origin::Cache: return "cache";
    case Origin::Replay: return "replay";
  }
  return "live";
}

Json response_to_json(const ModelResponse& resp) {
  Json j = Json::object();
  j["raw_text"] = resp.raw_text;
  j["token_count"] = resp.token_count;
  j["token_count_estimated"] = resp.token_count_estimated;
  j["latency_ms"] = resp.latency_ms;
  return j;
}

ModelResponse response_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("raw_text") || !j["raw_text"].is_string()) {
    throw Error(ErrorKind::Decode, "response object lacks a string 'raw_text'");
  }
  ModelResponse r;
  r.raw_text = j["raw_text"].get<std::string>();
  if (auto it = j.find("token_count"); it != j.end() && it->is_number_integer()) {
    r.token_count = it->get<std::int64_t>();
    r.token_count_estimated = j.value("token_count_estimated", false);
  } else {
    r.token_count = whitespace_token_count(r.raw_text);
    r.token_count_estimated = true;
  }
  if (r.token_count < 0) throw Error(ErrorKind::Decode, "negative token_count");
  if (auto it = j.find("latency_ms"); it != j.end() && it->is_number()) r.latency_ms = it->get<double>();
  return r;
}

std::int64_t whitespace_token_count(std::string_view text) {
  std::int64_t n = 0;
  bool in_token = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

bool is_retryable_status(int status) noexcept { return status == 408 || status == 429 || (status >= 500 && status < 600); }

// ---------------------------------------------------------------------------

std::shared_ptr<ReplayBackend> ReplayBackend::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open replay file " + path.string());
  auto backend = std::make_shared<ReplayBackend>();
  backend->source_ = path.filename().string();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = path.filename().string() + ":" + std::to_string(line_no) + ": ";
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) throw Error(ErrorKind::Parse, where + "malformed JSON");
    if (!rec.contains("digest") || !rec["digest"].is_string()) throw Error(ErrorKind::Parse, where + "missing digest");
    std::string digest = rec["digest"].get<std::string>();
    if (!rec.contains("response")) throw Error(ErrorKind::Parse, where + "missing response");
    ModelResponse resp = response_from_json(rec["response"]);
    resp.origin = Origin::Replay;
    if (auto it = rec.find("request"); it != rec.end()) {
      if (sha256_hex(canonical_dump(*it)) != digest) {
        throw Error(ErrorKind::Parse, where + "recorded request does not hash to its digest");
      }
      if (it->contains("model_id")) backend->models_.insert((*it)["model_id"].get<std::string>());
    }
    if (!backend->entries_.emplace(digest, std::move(resp)).second) {
      throw Error(ErrorKind::Parse, where + "duplicate digest " + digest);
    }
  }
  return backend;
}

ModelResponse ReplayBackend::generate(const GenRequest&, const std::string& digest) {
  auto it = entries_.find(digest);
  if (it == entries_.end()) throw Error(ErrorKind::ReplayMiss, "replay miss: no recording for digest " + digest);
  return it->second;
}

// ---------------------------------------------------------------------------

ChatCompletionBackend::ChatCompletionBackend(ChatBackendConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (config_.endpoint.empty()) throw Error(ErrorKind::Config, "live backend requires an endpoint URL");
  if (!transport_) throw Error(ErrorKind::Config, "live backend requires a transport");
}

Json ChatCompletionBackend::request_body(const GenRequest& req) {
  Json body = Json::object();
  body["model"] = req.model_id;
  body["messages"] = Json::array({Json{{"role", "user"}, {"content", req.prompt}}});
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_new_tokens;
  body["seed"] = req.seed_tag;
  return body;
}

ModelResponse ChatCompletionBackend::decode(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::Decode, "backend payload is not a JSON object");
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorKind::Decode, "backend payload has no choices");
  }
  const Json& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
      !first["message"].contains("content") || !first["message"]["content"].is_string()) {
    throw Error(ErrorKind::Decode, "backend payload lacks choices[0].message.content");
  }
  ModelResponse r;
  r.raw_text = first["message"]["content"].get<std::string>();
  auto usage = j.find("usage");
  if (usage != j.end() && usage->is_object() && usage->contains("completion_tokens") &&
      (*usage)["completion_tokens"].is_number_integer()) {
    r.token_count = (*usage)["completion_tokens"].get<std::int64_t>();
    r.token_count_estimated = false;
  } else {
    r.token_count = whitespace_token_count(r.raw_text);
    r.token_count_estimated = true;
  }
  return r;
}

ModelResponse ChatCompletionBackend::generate(const GenRequest& req, const std::string&) {
  std::map<std::string, std::string> headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers["Authorization"] = std::string("Bearer ") + key;
    }
  }
  auto start = std::chrono::steady_clock::now();
  HttpResult res = transport_->post(config_.endpoint, headers, canonical_dump(request_body(req)));
  auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (res.status != 200) {
    throw TransportError("HTTP " + std::to_string(res.status) + " from " + config_.endpoint, res.status,
                         is_retryable_status(res.status));
  }
  ModelResponse r = decode(res.body);
  r.latency_ms = elapsed;
  r.origin = Origin::Live;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

Json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Parse, "malformed JSON in " + path.string());
  return j;
}

Json cache_payload(const Json& request, const Json& response) {
  Json body = Json::object();
  body["request"] = request;
  body["response"] = response;
  return body;
}

bool is_digest(std::string_view s) {
  if (s.size() != 64) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::optional<std::string> check_entry(const fs::path& file) {
  const std::string stem = file.stem().string();
  if (!is_digest(stem)) return "file name is not a digest";
  Json j = Json::parse([&] {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return "malformed JSON";
  if (!j.contains("request") || !j.contains("response") || !j.contains("entry_sha256") || !j.contains("digest")) {
    return "missing fields";
  }
  if (sha256_hex(canonical_dump(j["request"])) != stem || j["digest"] != stem) return "digest mismatch";
  if (j["entry_sha256"] != sha256_hex(canonical_dump(cache_payload(j["request"], j["response"])))) {
    return "entry hash mismatch";
  }
  try {
    response_from_json(j["response"]);
  } catch (const Error& e) {
    return std::string("bad response: ") + e.what();
  }
  return std::nullopt;
}

}  // namespace

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<ModelResponse> ResponseCache::get(const std::string& digest) const {
  fs::path file = dir_ / (digest + ".json");
  if (!fs::exists(file)) return std::nullopt;
  Json j = read_json_file(file);
  if (!j.contains("response")) throw Error(ErrorKind::Parse, "cache entry without response: " + file.string());
  ModelResponse r = response_from_json(j["response"]);
  r.origin = Origin::Cache;
  return r;
}

ModelResponse ResponseCache::put(const std::string& digest, const GenRequest& req, const ModelResponse& resp) {
  Json request = canonical_request(req);
  Json response = response_to_json(resp);
  Json entry = Json::object();
  entry["digest"] = digest;
  entry["request"] = request;
  entry["response"] = response;
  entry["entry_sha256"] = sha256_hex(canonical_dump(cache_payload(request, response)));

  const fs::path target = dir_ / (digest + ".json");
  const fs::path tmp = dir_ / (digest + "." + std::to_string(::getpid()) + "." +
                               std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write cache temp file " + tmp.string());
    out << canonical_dump(entry) << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "cache write failed: " + tmp.string());
  }
  // link(2) refuses to replace an existing file, which makes the publish step
  // atomic and write-once.
  if (::link(tmp.c_str(), target.c_str()) != 0) {
    int err = errno;
    fs::remove(tmp);
    if (err == EEXIST) {
      auto existing = get(digest);
      if (existing) {
        ModelResponse r = *existing;
        r.origin = resp.origin;
        return r;
      }
    }
    throw Error(ErrorKind::Io, "cannot publish cache entry " + target.string() + ": " + std::strerror(err));
  }
  fs::remove(tmp);
  return resp;
}

CacheStats ResponseCache::stats() const {
  CacheStats s;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (!e.is_regular_file()) continue;
    if (e.path().extension() == ".tmp") {
      ++s.temp_files;
    } else if (e.path().extension() == ".json") {
      ++s.entries;
      s.bytes += e.file_size();
    }
  }
  return s;
}

CacheVerifyReport ResponseCache::verify() const {
  CacheVerifyReport report;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    ++report.checked;
    if (auto problem = check_entry(f)) report.corrupt.emplace_back(f.filename().string(), *problem);
  }
  return report;
}

std::size_t ResponseCache::gc() {
  std::size_t removed = 0;
  std::vector<fs::path> doomed;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (!e.is_regular_file()) continue;
    if (e.path().extension() == ".tmp") doomed.push_back(e.path());
  }
  for (const auto& [name, _] : verify().corrupt) doomed.push_back(dir_ / name);
  for (const auto& p : doomed) {
    if (fs::remove(p)) ++removed;
  }
  return removed;
}

// ---------------------------------------------------------------------------

Provider::Provider(std::shared_ptr<Backend> upstream, std::optional<ResponseCache> cache, RetryPolicy retry,
                   std::size_t max_in_flight, Sleeper sleeper)
    : upstream_(std::move(upstream)),
      cache_(std::move(cache)),
      retry_(retry),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
  if (!upstream_) throw Error(ErrorKind::Config, "provider requires a backend");
  if (retry_.max_attempts < 1) throw Error(ErrorKind::Config, "retry max_attempts must be >= 1");
}

std::chrono::milliseconds Provider::backoff(const std::string& digest, int attempt) const {
  SplitMix64 rng(derive_seed(fnv1a(digest), static_cast<std::uint64_t>(attempt)));
  double unit = static_cast<double>(rng.next() >> 11) * 0x1.0p-53;  // [0, 1)
  double factor = 1.0 + retry_.jitter * (2.0 * unit - 1.0);
  double ms = static_cast<double>(retry_.base_delay.count()) * std::ldexp(1.0, attempt - 1) * factor;
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

ModelResponse Provider::complete(const GenRequest& req) {
  if (req.temperature < 0) throw Error(ErrorKind::Precondition, "temperature must be >= 0");
  if (req.max_new_tokens < 1) throw Error(ErrorKind::Precondition, "max_new_tokens must be >= 1");
  ++counters_.requests;
  const std::string digest = cache_key(req);
  if (cache_) {
    if (auto hit = cache_->get(digest)) {
      ++counters_.cache_hits;
      return *hit;
    }
  }

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  for (int attempt = 1;; ++attempt) {
    try {
      ++counters_.upstream_calls;
      ModelResponse resp = upstream_->generate(req, digest);
      if (attempt > 1) spdlog::info("request {} succeeded after {} attempts", digest.substr(0, 12), attempt);
      if (cache_) return cache_->put(digest, req, resp);
      return resp;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= retry_.max_attempts) {
        spdlog::error("request {} failed after {} attempt(s): {}", digest.substr(0, 12), attempt, e.what());
        throw;
      }
      auto delay = backoff(digest, attempt);
      spdlog::warn("attempt {}/{} for {} failed ({}); retrying in {} ms", attempt, retry_.max_attempts,
                   digest.substr(0, 12), e.what(), delay.count());
      ++counters_.retries;
      sleeper_(delay);
    }
  }
}

RunSet collect_runs(const EvalInstance& instance, const std::string& model_id, std::size_t k, Provider& provider,
                    const SamplingSettings& settings, std::size_t concurrency) {
  if (k < 2) throw Error(ErrorKind::Precondition, "collect_runs needs k >= 2 (pairwise metrics are undefined for k=1)");
  RunSet set;
  set.instance_id = instance.id;
  set.model_id = model_id;
  std::vector<std::optional<ModelResponse>> slots(k);
  std::vector<std::exception_ptr> errors(k);

  auto run_one = [&](std::size_t i) {
    GenRequest req;
    req.model_id = model_id;
    req.prompt = instance.prompt;
    req.temperature = settings.temperature;
    req.max_new_tokens = settings.max_new_tokens;
    req.run_index = static_cast<std::int64_t>(i);
    req.seed_tag = settings.seed_tag;
    try {
      slots[i] = provider.complete(req);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(concurrency, 1, k);
  if (workers == 1) {
    for (std::size_t i = 0; i < k; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < k; i = next++) run_one(i);
      });
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "run " + std::to_string(i) + " of '" + instance.id + "' failed: " + e.what());
    }
  }
  for (auto& s : slots) set.responses.push_back(std::move(*s));
  return set;
}

}  // namespace reasonq
