#pragma once

#include "reasonq/corpus.hpp"
#include "reasonq/extraction.hpp"
#include "reasonq/provider.hpp"
#include "reasonq/scorer.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reasonq {

enum class Dimension { CQ = 0, CS = 1, RS = 2, LS = 3, ES = 4, SS = 5 };
inline constexpr std::array<Dimension, 6> kDimensions{Dimension::CQ, Dimension::CS, Dimension::RS,
                                                      Dimension::LS, Dimension::ES, Dimension::SS};
/// "CQ", "CS", ...
const char* to_string(Dimension d) noexcept;
/// Accepts either case ("cq" or "CQ").
std::optional<Dimension> parse_dimension(std::string_view name) noexcept;

struct DimensionVector {
  double cq = 0, cs = 0;
  std::optional<double> rs;  // absent when no instance was answered correctly
  double ls = 0, es = 0, ss = 0;

  std::optional<double> get(Dimension d) const;
  bool operator==(const DimensionVector&) const = default;
};

struct StepSequence {
  std::vector<std::string> steps;
};

/// Splits on step markers ("Step k:" anywhere; "k." / "k)" / "-" / "*" at
/// line starts) when present, otherwise into sentences at . ! ? followed by
/// whitespace. Throws Error(Precondition) for whitespace-only input.
StepSequence segment_trace(std::string_view raw);

struct InstanceOutcome {
  std::string instance_id;
  bool correct = false;  // run 0
  std::vector<ExtractedAnswer> per_run_answers;
  std::vector<std::string> per_run_traces;
  std::vector<std::int64_t> per_run_tokens;
  std::optional<std::vector<bool>> perturbed_correct;
};

InstanceOutcome make_outcome(const EvalInstance& instance, const RunSet& runs,
                             std::span<const ModelResponse> perturbed = {});

// Per-instance terms. These are what the corpus-level metrics average.
double instance_consistency(const InstanceOutcome& outcome);
double instance_robustness(const InstanceOutcome& outcome);
double instance_coherence(std::string_view trace, Scorer& scorer);
double instance_efficiency(bool correct, std::int64_t tokens, std::int64_t t_max);
double instance_stability(std::span<const std::string> traces, Scorer& scorer);

double correctness(std::span<const InstanceOutcome> outcomes);
double consistency(std::span<const InstanceOutcome> outcomes);
std::optional<double> robustness(std::span<const InstanceOutcome> outcomes);
double coherence(std::span<const InstanceOutcome> outcomes, Scorer& scorer);
double efficiency(std::span<const InstanceOutcome> outcomes, std::int64_t t_max);
double stability(std::span<const InstanceOutcome> outcomes, Scorer& scorer);

DimensionVector profile(std::span<const InstanceOutcome> outcomes, Scorer& scorer, std::int64_t t_max);

}  // namespace reasonq
