#pragma once

#include "reasonq/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace reasonq {

struct Observation {
  std::string model_id;
  std::string dataset;
  DimensionVector d;
  bool operator==(const Observation&) const = default;
};

struct ObservationMatrix {
  std::vector<Observation> rows;
  std::size_t n() const { return rows.size(); }
  /// One dimension as a column; throws Error(Precondition) if rs is absent in any row.
  std::vector<double> column(Dimension d) const;
};

/// CSV with a header naming at least model, dataset, cq, cs, rs, ls, es, ss
/// (case-insensitive, any order). Extra columns are ignored.
ObservationMatrix parse_observations_csv(std::string_view text, std::string_view origin = "<string>");
ObservationMatrix load_observations_csv(const std::filesystem::path& path);

double pearson(std::span<const double> x, std::span<const double> y);

struct PValue {
  double p = 1.0;
  bool exact_fit = false;  // |r| == 1: p reported as 0
};

/// Two-sided p-value of r under Student's t with n - 2 degrees of freedom.
PValue p_value(double r, std::size_t n);

/// Quantile of the standard normal distribution.
double normal_quantile(double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Fisher-z interval: tanh(atanh(r) +- z / sqrt(n - 3)).
Interval fisher_ci(double r, std::size_t n, double level = 0.95);

struct BootstrapConfig {
  std::size_t b = 10000;
  std::uint64_t seed = 42;
  double level = 0.95;
  unsigned threads = 1;  // results do not depend on this
};

struct BootstrapResult {
  Interval ci;
  std::size_t redraws = 0;  // zero-variance resamples that were redrawn
  bool degenerate = false;  // the interval collapsed to a point
};

/// Percentile interval of Pearson r over B row resamples. Resample i draws
/// from its own counter-based stream, so the output is fixed for a seed.
BootstrapResult bootstrap_ci(std::span<const std::pair<double, double>> pairs, const BootstrapConfig& cfg);

/// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

double partial_correlation(double r_xy, double r_xz, double r_yz);

enum class Category { Independent, Weak, Moderate, Structural };
const char* to_string(Category c) noexcept;

using DimPair = std::pair<Dimension, Dimension>;
/// Normalized so that first < second in dimension order.
DimPair make_pair(Dimension a, Dimension b);
std::string pair_label(const DimPair& p);  // "CQ-RS"

struct StructuralSet {
  std::set<DimPair> pairs;
  static StructuralSet defaults();  // CQ-RS, CQ-ES
  bool contains(Dimension a, Dimension b) const { return pairs.contains(make_pair(a, b)); }
};

Category classify(const DimPair& pair, double r, const StructuralSet& structural = StructuralSet::defaults());

struct CorrelationRecord {
  DimPair pair;
  double r = 0.0;
  double p = 1.0;
  bool exact_fit = false;
  Interval ci;  // Fisher-z
  std::optional<BootstrapResult> bootstrap;
  std::size_t n = 0;
  Category category = Category::Independent;
};

struct PartialRecord {
  DimPair pair;
  Dimension control;
  double r = 0.0;
};

struct ValiditySummary {
  std::size_t independent = 0, weak = 0, moderate = 0, structural = 0;
  std::size_t below_050 = 0;  // |r| < 0.50 regardless of category
};

struct ValidityConfig {
  double level = 0.95;
  std::optional<BootstrapConfig> bootstrap;
  StructuralSet structural = StructuralSet::defaults();
};

struct ValidityReport {
  std::vector<CorrelationRecord> records;  // 15, in dimension-pair order
  std::vector<PartialRecord> partials;
  ValiditySummary summary;
  std::size_t n = 0;
};

/// All 15 pairwise records plus partial correlations for pairs that both
/// connect structurally to the same control dimension (RS-ES | CQ by default).
ValidityReport validity_matrix(const ObservationMatrix& obs, const ValidityConfig& cfg = {});

}  // namespace reasonq
