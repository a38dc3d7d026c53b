#pragma once

#include "reasonq/metrics.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reasonq {

/// Weights in dimension order (cq, cs, rs, ls, es, ss).
struct WeightVector {
  std::string name;
  std::string label;  // display name, e.g. "Legal/Compliance"
  std::array<double, 6> w{};

  double operator[](Dimension d) const { return w[static_cast<std::size_t>(d)]; }
  bool operator==(const WeightVector&) const = default;
};

/// Throws Error(Validation) if any weight is negative or non-finite, or the
/// sum is not 1 within `tolerance`.
void validate(const WeightVector& w, double tolerance = 1e-9);

/// The seven built-in deployment scenarios in canonical order.
const std::vector<WeightVector>& builtin_scenarios();
std::optional<WeightVector> find_scenario(std::string_view name);
std::vector<std::string> scenario_names();

/// Custom weights from a key/value file:
///
///     name = "my_scenario"
///     cq = 0.4
///     cs = 0.2
///     ...            (all six keys required)
///
/// A sum within 1e-6 of 1 is renormalized with a logged warning; anything
/// further off is a validation error.
WeightVector load_weight_file(const std::filesystem::path& path);
WeightVector parse_weight_text(std::string_view text, std::string_view origin = "<string>");

enum class RsPolicy { Error, Renormalize };

struct CompositeScore {
  double q = 0.0;
  bool renormalized = false;  // rs was absent and its weight redistributed
};

CompositeScore composite(const DimensionVector& d, const WeightVector& w, RsPolicy policy = RsPolicy::Error);

struct RankEntry {
  std::string model_id;
  double q = 0.0;
  bool renormalized = false;
  bool tied = false;  // equal q to a neighbour; order falls back to model_id
  bool operator==(const RankEntry&) const = default;
};

struct ScenarioRanking {
  std::string scenario;
  std::vector<RankEntry> entries;  // q descending
  bool operator==(const ScenarioRanking&) const = default;
};

ScenarioRanking rank(const std::map<std::string, DimensionVector>& profiles, const WeightVector& w,
                     RsPolicy policy = RsPolicy::Error);

struct Inversion {
  std::string model_a;  // ahead of model_b in scenario_x
  std::string model_b;  // ahead of model_a in scenario_y
  std::string scenario_x;
  std::string scenario_y;
  double gap_x = 0.0;  // q_a - q_b in scenario_x (>= 0)
  double gap_y = 0.0;  // q_b - q_a in scenario_y (>= 0)
  bool operator==(const Inversion&) const = default;
};

struct InversionReport {
  std::vector<Inversion> pairs;
  bool contains(std::string_view a, std::string_view b, std::string_view x, std::string_view y) const;
  bool operator==(const InversionReport&) const = default;
};

/// Every model pair whose relative order differs between two scenarios,
/// listed once per scenario pair (scenarios taken in input order).
InversionReport inversions(const std::vector<ScenarioRanking>& rankings);

}  // namespace reasonq
