#pragma once

#include "reasonq/canonical_json.hpp"

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace reasonq {

inline constexpr int kScorerProtocolVersion = 1;

enum class VerdictKind { Contradiction, Similarity };
enum class VerdictBackend { Baseline, External };

struct ScorerVerdict {
  VerdictKind kind = VerdictKind::Similarity;
  double score = 0.0;  // clamped to [0, 1]
  VerdictBackend backend = VerdictBackend::Baseline;
};

enum class EndpointMode { Baseline, Subprocess, Http };
const char* to_string(EndpointMode mode) noexcept;

struct ScorerEndpoint {
  EndpointMode mode = EndpointMode::Baseline;
  std::string address;  // shell command (subprocess) or base URL (http)
  std::chrono::milliseconds timeout{30000};
  bool cache = true;

  /// "baseline", "subprocess:<command>" or "http://host:port".
  static ScorerEndpoint parse(std::string_view spec);
};

struct ScorerCapabilities {
  int protocol_version = 0;
  std::vector<std::string> ops;
  std::string model;

  bool supports(std::string_view op) const;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  /// psi(premise, hypothesis): probability that the hypothesis contradicts the premise.
  virtual ScorerVerdict contradiction(std::string_view premise, std::string_view hypothesis) = 0;
  virtual ScorerVerdict similarity(std::string_view a, std::string_view b) = 0;
  /// Raw hello exchange, without validation.
  virtual ScorerCapabilities hello() = 0;
  virtual EndpointMode mode() const = 0;
};

/// Negation-pair contradiction and unigram-F1 similarity over normalized tokens.
class BaselineScorer final : public Scorer {
 public:
  ScorerVerdict contradiction(std::string_view premise, std::string_view hypothesis) override;
  ScorerVerdict similarity(std::string_view a, std::string_view b) override;
  ScorerCapabilities hello() override;
  EndpointMode mode() const override { return EndpointMode::Baseline; }
};

/// Tokens used by the baseline: normalize(), split on non-word characters,
/// with a trailing "n't" split off as its own token.
std::vector<std::string> baseline_tokens(std::string_view text);

/// Builds the endpoint's scorer, wrapped in an in-memory verdict cache when
/// endpoint.cache is set.
std::unique_ptr<Scorer> make_scorer(const ScorerEndpoint& endpoint);

/// Wraps any scorer with a thread-safe verdict cache keyed by input digest.
std::unique_ptr<Scorer> with_verdict_cache(std::unique_ptr<Scorer> inner);

/// hello + version check + identity probes on every advertised op.
ScorerCapabilities scorer_handshake(Scorer& scorer);

/// Throws Error(Capability) naming the first op the endpoint does not offer.
void require_ops(const ScorerCapabilities& caps, const std::vector<std::string>& ops);

/// Wire-level helpers shared by the external clients (and usable by sidecars).
Json make_score_request(VerdictKind kind, std::string_view a, std::string_view b);
Json make_hello_request();
double parse_score_response(const Json& response);
ScorerCapabilities parse_hello_response(const Json& response);

}  // namespace reasonq
