#include "reasonq/scorer.hpp"

#include "reasonq/error.hpp"
#include "reasonq/extraction.hpp"

#include <httplib.h>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <unordered_map>

namespace reasonq {

const char* to_string(EndpointMode mode) noexcept {
  switch (mode) {
    case EndpointMode::Baseline: return "baseline";
    case EndpointMode::Subprocess: return "subprocess";
    case EndpointMode::Http: return "http";
  }
  return "baseline";
}

ScorerEndpoint ScorerEndpoint::parse(std::string_view spec) {
  ScorerEndpoint ep;
  if (spec.empty() || spec == "baseline") return ep;
  if (spec.starts_with("subprocess:")) {
    ep.mode = EndpointMode::Subprocess;
    ep.address = std::string(spec.substr(11));
  } else if (spec.starts_with("http://") || spec.starts_with("https://")) {
    ep.mode = EndpointMode::Http;
    ep.address = std::string(spec);
  } else {
    throw Error(ErrorKind::Config, "unrecognized scorer endpoint '" + std::string(spec) +
                                       "' (expected baseline, subprocess:<cmd> or http(s)://...)");
  }
  if (ep.address.empty()) throw Error(ErrorKind::Config, "scorer endpoint needs an address");
  return ep;
}

bool ScorerCapabilities::supports(std::string_view op) const {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

namespace {

double clamp01(double v) {
  if (std::isnan(v)) throw Error(ErrorKind::ScorerUnavailable, "scorer returned NaN");
  return std::clamp(v, 0.0, 1.0);
}

const char* op_name(VerdictKind kind) { return kind == VerdictKind::Contradiction ? "contradiction" : "similarity"; }

void require_text(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::Precondition, "scorer inputs must be non-empty");
}

bool is_negation(std::string_view tok) { return tok == "not" || tok == "no" || tok == "never" || tok == "n't"; }

}  // namespace

std::vector<std::string> baseline_tokens(std::string_view text) {
  std::string norm = normalize(text);
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    if (cur.size() > 3 && cur.ends_with("n't")) {
      out.push_back(cur.substr(0, cur.size() - 3));
      out.emplace_back("n't");
    } else {
      out.push_back(cur);
    }
    cur.clear();
  };
  for (char c : norm) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80 || c == '\'') {
      cur.push_back(c);
    } else if (c == '.' && !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back()))) {
      cur.push_back(c);  // keep decimals whole; a trailing '.' is trimmed below
    } else {
      if (!cur.empty() && cur.back() == '.') cur.pop_back();
      flush();
    }
  }
  if (!cur.empty() && cur.back() == '.') cur.pop_back();
  flush();
  return out;
}

ScorerVerdict BaselineScorer::contradiction(std::string_view premise, std::string_view hypothesis) {
  require_text(premise, hypothesis);
  auto a = baseline_tokens(premise);
  auto b = baseline_tokens(hypothesis);
  auto differs_by_one_negation = [](const std::vector<std::string>& longer, const std::vector<std::string>& shorter) {
    if (longer.size() != shorter.size() + 1) return false;
    std::size_t i = 0;
    while (i < shorter.size() && longer[i] == shorter[i]) ++i;
    if (!is_negation(longer[i])) return false;
    return std::equal(shorter.begin() + static_cast<std::ptrdiff_t>(i), shorter.end(),
                      longer.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  };
  bool hit = differs_by_one_negation(a, b) || differs_by_one_negation(b, a);
  return {VerdictKind::Contradiction, hit ? 1.0 : 0.0, VerdictBackend::Baseline};
}

ScorerVerdict BaselineScorer::similarity(std::string_view a, std::string_view b) {
  require_text(a, b);
  auto ta = baseline_tokens(a);
  auto tb = baseline_tokens(b);
  double score = 0.0;
  if (ta.empty() && tb.empty()) {
    score = normalize(a) == normalize(b) ? 1.0 : 0.0;
  } else if (!ta.empty() && !tb.empty()) {
    std::map<std::string_view, long> counts;
    for (const auto& t : ta) ++counts[t];
    long overlap = 0;
    for (const auto& t : tb) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    // F1 of precision overlap/|b| and recall overlap/|a|.
    score = 2.0 * static_cast<double>(overlap) / static_cast<double>(ta.size() + tb.size());
  }
  return {VerdictKind::Similarity, score, VerdictBackend::Baseline};
}

ScorerCapabilities BaselineScorer::hello() {
  return {kScorerProtocolVersion, {"contradiction", "similarity"}, "baseline"};
}

// ---------------------------------------------------------------------------
// Wire protocol

Json make_score_request(VerdictKind kind, std::string_view a, std::string_view b) {
  return Json{{"v", kScorerProtocolVersion}, {"op", op_name(kind)}, {"a", a}, {"b", b}};
}

Json make_hello_request() { return Json{{"v", kScorerProtocolVersion}, {"op", "hello"}}; }

double parse_score_response(const Json& r) {
  if (!r.is_object()) throw Error(ErrorKind::ScorerUnavailable, "scorer protocol violation: response is not an object");
  if (r.contains("error")) {
    throw Error(ErrorKind::ScorerUnavailable, "scorer reported an error: " + r["error"].dump());
  }
  if (!r.contains("v") || !r["v"].is_number_integer() || r["v"].get<int>() != kScorerProtocolVersion) {
    throw Error(ErrorKind::ScorerUnavailable, "scorer protocol violation: bad or missing version");
  }
  if (!r.contains("score") || !r["score"].is_number()) {
    throw Error(ErrorKind::ScorerUnavailable, "scorer protocol violation: missing numeric score");
  }
  return clamp01(r["score"].get<double>());
}

ScorerCapabilities parse_hello_response(const Json& r) {
  if (!r.is_object() || !r.contains("v") || !r["v"].is_number_integer()) {
    throw Error(ErrorKind::ScorerUnavailable, "scorer protocol violation: hello response lacks a version");
  }
  ScorerCapabilities caps;
  caps.protocol_version = r["v"].get<int>();
  if (auto it = r.find("ops"); it != r.end() && it->is_array()) {
    for (const auto& op : *it) {
      if (op.is_string()) caps.ops.push_back(op.get<std::string>());
    }
  }
  caps.model = r.value("model", std::string{});
  return caps;
}

namespace {

/// Line-oriented JSON exchange with a child process over its stdin/stdout.
/// One request in flight at a time.
class SubprocessScorer final : public Scorer {
 public:
  SubprocessScorer(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {
    spawn();
  }

  ~SubprocessScorer() override { shutdown(); }

  ScorerVerdict contradiction(std::string_view premise, std::string_view hypothesis) override {
    require_text(premise, hypothesis);
    return {VerdictKind::Contradiction,
            parse_score_response(exchange(make_score_request(VerdictKind::Contradiction, premise, hypothesis))),
            VerdictBackend::External};
  }

  ScorerVerdict similarity(std::string_view a, std::string_view b) override {
    require_text(a, b);
    return {VerdictKind::Similarity, parse_score_response(exchange(make_score_request(VerdictKind::Similarity, a, b))),
            VerdictBackend::External};
  }

  ScorerCapabilities hello() override { return parse_hello_response(exchange(make_hello_request())); }

  EndpointMode mode() const override { return EndpointMode::Subprocess; }

 private:
  void spawn() {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw Error(ErrorKind::ScorerUnavailable, "cannot create pipes for scorer subprocess");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorKind::ScorerUnavailable, "cannot fork scorer subprocess");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
    ::signal(SIGPIPE, SIG_IGN);
  }

  void shutdown() {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    write_fd_ = read_fd_ = -1;
    if (pid_ > 0) {
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  Json exchange(const Json& request) {
    std::lock_guard lock(mutex_);
    if (write_fd_ < 0) throw Error(ErrorKind::ScorerUnavailable, "scorer subprocess is not running");
    std::string line = request.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      ssize_t n = ::write(write_fd_, line.data() + written, line.size() - written);
      if (n <= 0) throw Error(ErrorKind::ScorerUnavailable, "scorer subprocess closed its input");
      written += static_cast<std::size_t>(n);
    }
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string reply = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        Json j = Json::parse(reply, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorKind::ScorerUnavailable, "scorer protocol violation: malformed JSON line");
        return j;
      }
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) throw Error(ErrorKind::ScorerUnavailable, "scorer subprocess timed out");
      pollfd pfd{read_fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (rc == 0) throw Error(ErrorKind::ScorerUnavailable, "scorer subprocess timed out");
      if (rc < 0) throw Error(ErrorKind::ScorerUnavailable, "poll failed on scorer pipe");
      char chunk[4096];
      ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n <= 0) throw Error(ErrorKind::ScorerUnavailable, "scorer subprocess exited");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
  std::mutex mutex_;
};

/// POST <base>/score with one JSON request per call.
class HttpScorer final : public Scorer {
 public:
  HttpScorer(const std::string& base_url, std::chrono::milliseconds timeout) : client_(base_url) {
    client_.set_connection_timeout(timeout);
    client_.set_read_timeout(timeout);
    client_.set_write_timeout(timeout);
  }

  ScorerVerdict contradiction(std::string_view premise, std::string_view hypothesis) override {
    require_text(premise, hypothesis);
    return {VerdictKind::Contradiction,
            parse_score_response(exchange(make_score_request(VerdictKind::Contradiction, premise, hypothesis))),
            VerdictBackend::External};
  }

  ScorerVerdict similarity(std::string_view a, std::string_view b) override {
    require_text(a, b);
    return {VerdictKind::Similarity, parse_score_response(exchange(make_score_request(VerdictKind::Similarity, a, b))),
            VerdictBackend::External};
  }

  ScorerCapabilities hello() override { return parse_hello_response(exchange(make_hello_request())); }

  EndpointMode mode() const override { return EndpointMode::Http; }

 private:
  Json exchange(const Json& request) {
    std::lock_guard lock(mutex_);
    auto res = client_.Post("/score", request.dump(), "application/json");
    if (!res) throw Error(ErrorKind::ScorerUnavailable, "scorer HTTP transport failure: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorKind::ScorerUnavailable, "scorer HTTP status " + std::to_string(res->status));
    Json j = Json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::ScorerUnavailable, "scorer protocol violation: malformed JSON body");
    return j;
  }

  httplib::Client client_;
  std::mutex mutex_;
};

class CachingScorer final : public Scorer {
 public:
  explicit CachingScorer(std::unique_ptr<Scorer> inner) : inner_(std::move(inner)) {}

  ScorerVerdict contradiction(std::string_view premise, std::string_view hypothesis) override {
    return cached(VerdictKind::Contradiction, premise, hypothesis,
                  [&] { return inner_->contradiction(premise, hypothesis); });
  }
  ScorerVerdict similarity(std::string_view a, std::string_view b) override {
    return cached(VerdictKind::Similarity, a, b, [&] { return inner_->similarity(a, b); });
  }
  ScorerCapabilities hello() override { return inner_->hello(); }
  EndpointMode mode() const override { return inner_->mode(); }

 private:
  template <typename F>
  ScorerVerdict cached(VerdictKind kind, std::string_view a, std::string_view b, F&& compute) {
    std::string key;
    key.reserve(a.size() + b.size() + 2);
    key.push_back(kind == VerdictKind::Contradiction ? 'c' : 's');
    key.append(std::to_string(a.size())).push_back(':');
    key.append(a);
    key.append(b);
    {
      std::lock_guard lock(mutex_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    ScorerVerdict v = compute();
    std::lock_guard lock(mutex_);
    memo_.emplace(std::move(key), v);
    return v;
  }

  std::unique_ptr<Scorer> inner_;
  std::mutex mutex_;
  std::unordered_map<std::string, ScorerVerdict> memo_;
};

}  // namespace

std::unique_ptr<Scorer> with_verdict_cache(std::unique_ptr<Scorer> inner) {
  return std::make_unique<CachingScorer>(std::move(inner));
}

std::unique_ptr<Scorer> make_scorer(const ScorerEndpoint& endpoint) {
  std::unique_ptr<Scorer> scorer;
  switch (endpoint.mode) {
    case EndpointMode::Baseline: scorer = std::make_unique<BaselineScorer>(); break;
    case EndpointMode::Subprocess: scorer = std::make_unique<SubprocessScorer>(endpoint.address, endpoint.timeout); break;
    case EndpointMode::Http: scorer = std::make_unique<HttpScorer>(endpoint.address, endpoint.timeout); break;
  }
  return endpoint.cache ? with_verdict_cache(std::move(scorer)) : std::move(scorer);
}

ScorerCapabilities scorer_handshake(Scorer& scorer) {
  ScorerCapabilities caps = scorer.hello();
  if (caps.protocol_version != kScorerProtocolVersion) {
    throw Error(ErrorKind::VersionMismatch, "scorer speaks protocol v" + std::to_string(caps.protocol_version) +
                                                 ", client speaks v" + std::to_string(kScorerProtocolVersion));
  }
  // Identity probes. External models get the sidecar tolerances.
  static constexpr std::string_view kProbe = "The train leaves at noon and arrives two hours later.";
  const bool exact = scorer.mode() == EndpointMode::Baseline;
  if (caps.supports("similarity")) {
    double s = scorer.similarity(kProbe, kProbe).score;
    if (exact ? s != 1.0 : s < 0.99) {
      throw Error(ErrorKind::Capability, "scorer failed the similarity(x, x) identity probe: " + std::to_string(s));
    }
  }
  if (caps.supports("contradiction")) {
    double c = scorer.contradiction(kProbe, kProbe).score;
    if (exact ? c != 0.0 : c > 0.05) {
      throw Error(ErrorKind::Capability, "scorer failed the contradiction(x, x) identity probe: " + std::to_string(c));
    }
  }
  return caps;
}

void require_ops(const ScorerCapabilities& caps, const std::vector<std::string>& ops) {
  for (const auto& op : ops) {
    if (!caps.supports(op)) {
      throw Error(ErrorKind::Capability, "scorer '" + caps.model + "' does not offer op '" + op + "'");
    }
  }
}

}  // namespace reasonq
