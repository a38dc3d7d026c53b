#pragma once

#include "reasonq/metrics.hpp"
#include "reasonq/pipeline.hpp"
#include "reasonq/provider.hpp"
#include "reasonq/scorer.hpp"
#include "reasonq/stats.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rqtest {

std::filesystem::path fixture(const std::string& relative);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rq");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A published table as rows of named cells. Numeric columns are parsed on
/// demand.
struct TableRow {
  std::map<std::string, std::string> cells;
  const std::string& text(const std::string& column) const;
  double num(const std::string& column) const;
};
std::vector<TableRow> read_table(const std::filesystem::path& csv);

/// Wraps a backend and counts the calls that reach it.
class CountingBackend final : public reasonq::Backend {
 public:
  explicit CountingBackend(std::shared_ptr<reasonq::Backend> inner) : inner_(std::move(inner)) {}
  reasonq::ModelResponse generate(const reasonq::GenRequest& req, const std::string& digest) override {
    ++calls;
    return inner_->generate(req, digest);
  }
  std::string describe() const override { return "counting:" + inner_->describe(); }
  std::atomic<std::size_t> calls{0};

 private:
  std::shared_ptr<reasonq::Backend> inner_;
};

/// Scorer whose verdicts come from caller-supplied functions; useful for
/// enumerating psi patterns.
class ScriptedScorer final : public reasonq::Scorer {
 public:
  using Fn = std::function<double(std::string_view, std::string_view)>;
  ScriptedScorer(Fn contradiction, Fn similarity) : contra_(std::move(contradiction)), sim_(std::move(similarity)) {}

  reasonq::ScorerVerdict contradiction(std::string_view a, std::string_view b) override {
    return {reasonq::VerdictKind::Contradiction, contra_(a, b), reasonq::VerdictBackend::External};
  }
  reasonq::ScorerVerdict similarity(std::string_view a, std::string_view b) override {
    return {reasonq::VerdictKind::Similarity, sim_(a, b), reasonq::VerdictBackend::External};
  }
  reasonq::ScorerCapabilities hello() override { return {1, {"contradiction", "similarity"}, "scripted"}; }
  reasonq::EndpointMode mode() const override { return reasonq::EndpointMode::Subprocess; }

 private:
  Fn contra_;
  Fn sim_;
};

reasonq::ModelResponse response(std::string text, std::int64_t tokens = 10);

/// Published correlations: r, p and the 95% interval per pair.
struct PublishedCorrelation {
  reasonq::Dimension a, b;
  double r, p, lo, hi;
};
const std::vector<PublishedCorrelation>& published_correlations();

/// Short display names used in the published ranking table.
std::string short_name(const std::string& model_id);

/// The bundled replay fixture: 12 items, two recorded models, K=3, P=3.
reasonq::EvaluateConfig mini_config(std::size_t concurrency = 1);
std::shared_ptr<reasonq::ReplayBackend> mini_replay();
/// Full evaluate() over the fixture with the baseline scorer.
std::string evaluate_mini_bytes(std::size_t concurrency, reasonq::Provider& provider);
std::string evaluate_mini_bytes(std::size_t concurrency);

}  // namespace rqtest
