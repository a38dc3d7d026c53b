#pragma once

#include "reasonq/aggregate.hpp"
#include "reasonq/corpus.hpp"
#include "reasonq/provider.hpp"
#include "reasonq/report.hpp"
#include "reasonq/scorer.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace reasonq {

struct EvaluateConfig {
  std::vector<Corpus> corpora;
  std::vector<std::string> models;
  std::size_t k = 3;
  std::size_t p = 3;
  std::int64_t t_max = 256;
  double temperature = 0.7;
  std::uint64_t seed = 42;
  std::size_t concurrency = 4;
  std::vector<WeightVector> scenarios;  // empty: built-ins
  RsPolicy rs_policy = RsPolicy::Error;
  /// Validity over model x dataset rows; nullopt skips it.
  std::optional<ValidityConfig> validity = ValidityConfig{};
  ScorerProvenance scorer;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Collection, extraction, metrics, aggregation and statistics for every
/// (model, corpus) pair. Corpora without perturbations get the baseline
/// rules (P variants, seeded). The artifact does not depend on concurrency.
ResultsArtifact evaluate(const EvaluateConfig& cfg, Provider& provider, Scorer& scorer, const ProgressFn& progress = {});

}  // namespace reasonq
