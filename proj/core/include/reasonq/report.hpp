#pragma once

#include "reasonq/aggregate.hpp"
#include "reasonq/canonical_json.hpp"
#include "reasonq/stats.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reasonq {

inline constexpr int kArtifactSchemaVersion = 1;

struct ScorerProvenance {
  std::string mode = "baseline";  // baseline | subprocess | http
  std::string address;
  std::string model;  // reported by the scorer's hello
  int protocol_version = 1;
  bool operator==(const ScorerProvenance&) const = default;
};

struct RunConfig {
  std::size_t k = 3;
  std::size_t p = 3;
  std::int64_t t_max = 256;
  double temperature = 0.7;
  std::uint64_t seed = 42;
  std::string rs_policy = "error";
  ScorerProvenance scorer;
  std::vector<std::string> corpora;
  bool operator==(const RunConfig&) const = default;
};

struct ValiditySection {
  ValidityReport report;
  double level = 0.95;
  std::optional<BootstrapConfig> bootstrap;
};

struct ResultsArtifact {
  int schema_version = kArtifactSchemaVersion;
  RunConfig config;
  std::vector<std::string> models;    // display order
  std::vector<std::string> datasets;  // display order
  std::map<std::string, DimensionVector> pooled;
  std::map<std::string, std::map<std::string, DimensionVector>> per_dataset;
  std::vector<WeightVector> scenarios;
  std::vector<ScenarioRanking> rankings;
  InversionReport inversions;
  std::optional<ValiditySection> validity;
  std::vector<std::string> notes;
};

/// Fixed note attached to every validity section.
extern const char* const kObservationCaveat;

Json to_json(const ResultsArtifact& a);
/// Throws Error(Parse) on malformed structure, then validate().
ResultsArtifact artifact_from_json(const Json& j);

/// Throws Error(Validation) unless: supported schema_version, every number
/// finite, every ranking scenario and model resolves.
void validate(const ResultsArtifact& a);

/// Canonical JSON bytes of the artifact (validated first).
std::string emit_results(const ResultsArtifact& a);
void write_results(const ResultsArtifact& a, const std::filesystem::path& path);
ResultsArtifact read_results(const std::filesystem::path& path);

enum class TableKind { Overall, PerDataset, Rankings, Validity };
enum class TableFormat { Markdown, Csv };
TableKind parse_table_kind(std::string_view name);
TableFormat parse_table_format(std::string_view name);

/// Tables with 3-decimal numbers. Overall: model, six dimensions, Q_bal,
/// Q_saf, Q_acc, Q_eff. PerDataset: model, dataset, six dimensions, Q_bal.
/// Rankings: scenario then one column per rank. Validity: one row per pair,
/// followed by a summary.
std::string emit_table(const ResultsArtifact& a, TableKind which, TableFormat format);

enum class PlotKind { Radar, Bars, Heatmap };
PlotKind parse_plot_kind(std::string_view name);

/// Radar: per-model six-axis series. Bars: one group per dimension with a
/// value per model. Heatmap: symmetric 6x6 r matrix with unit diagonal.
Json emit_plotdata(const ResultsArtifact& a, PlotKind kind);

struct ArtifactInputs {
  RunConfig config;
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::map<std::string, DimensionVector> pooled;
  std::map<std::string, std::map<std::string, DimensionVector>> per_dataset;
  std::vector<WeightVector> scenarios;  // empty: the seven built-ins
  RsPolicy rs_policy = RsPolicy::Error;
  /// Validity over model x dataset rows when set. Skipped with a note if the
  /// rows are too few or a dimension is constant.
  std::optional<ValidityConfig> validity;
};

/// Scores, ranks and (optionally) runs the validity analysis, then packages
/// everything as an artifact.
ResultsArtifact assemble_artifact(const ArtifactInputs& in);

/// Builds the inputs from an observation matrix: rows become per-dataset
/// vectors; pooled vectors are the unweighted mean over each model's rows
/// unless `pooled` rows are supplied.
ArtifactInputs inputs_from_observations(const ObservationMatrix& per_dataset,
                                        const std::optional<ObservationMatrix>& pooled = std::nullopt);

}  // namespace reasonq
