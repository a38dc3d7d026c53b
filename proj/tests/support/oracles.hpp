#pragma once

#include "reasonq/corpus.hpp"
#include "reasonq/metrics.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rqtest {

/// Ground truth for one K=3, P=3 instance. Responses are rendered from it as
/// text and go through the real extraction path; the oracle reads it directly.
struct InstancePattern {
  std::array<int, 3> answers{0, 0, 0};  // set partition labels over runs, answers[0] == 0
  bool correct = false;                 // run 0 answers the gold
  int survived = 0;                     // perturbed variants answered correctly, 0..3
  std::array<double, 2> psi{0, 0};      // contradiction between steps 1-2 and 2-3 of run 0
  std::int64_t tokens = 0;              // run-0 token count
  std::array<int, 3> traces{0, 0, 0};   // partition labels: same label -> similarity 1
};

inline constexpr double kCrossTraceSimilarity = 0.25;
inline constexpr std::int64_t kOracleTMax = 256;

/// Every partition of three runs in canonical labelling.
const std::vector<std::array<int, 3>>& partitions3();
/// The full per-instance pattern space (7200 patterns).
std::vector<InstancePattern> all_patterns();
/// A compact alphabet that still varies every factor, for multi-instance corpora.
std::vector<InstancePattern> pattern_alphabet();

struct Rendered {
  reasonq::EvalInstance instance;
  reasonq::RunSet runs;
  std::vector<reasonq::ModelResponse> perturbed;
};
Rendered render(const InstancePattern& p, std::size_t index);

/// Scores steps from their "[psi=v]" tag and traces from their "[grp=g]" tags.
class PatternScorer;
std::unique_ptr<reasonq::Scorer> make_pattern_scorer();

/// Direct-summation oracle over the patterns.
reasonq::DimensionVector oracle_profile(const std::vector<InstancePattern>& corpus);
double oracle_instance_cs(const InstancePattern& p);

/// Runs the real pipeline stages (make_outcome + profile) on rendered patterns.
reasonq::DimensionVector system_profile(const std::vector<InstancePattern>& corpus, reasonq::Scorer& scorer);

bool same_vector(const reasonq::DimensionVector& a, const reasonq::DimensionVector& b, double tol = 1e-12);

struct OracleSweep {
  std::size_t corpora = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
};
/// All single-instance corpora over the full pattern space, then every
/// sequence of 2..max_n instances over the alphabet.
OracleSweep sweep_brute_force(std::size_t max_n = 5);

}  // namespace rqtest
