#pragma once

#include "reasonq/extraction.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace reasonq {

struct EvalInstance {
  std::string id;
  std::string prompt;
  std::string gold;  // stored in canonical_gold() form
  TaskKind task_kind = TaskKind::Freeform;
  std::string dataset;
  std::optional<std::string> subject;
  /// Exactly 0 or the corpus' p_count perturbed prompts.
  std::vector<std::string> perturbations;
  /// Indices into perturbations that equal the prompt (baseline found no site).
  std::vector<std::size_t> degenerate_variants;
  /// Surface paraphrases shipped with the item (synthetic robustness probes).
  std::vector<std::string> paraphrases;
  /// Free-form annotations, e.g. "expr" for templated arithmetic items.
  std::map<std::string, std::string> meta;

  bool operator==(const EvalInstance&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<EvalInstance> instances;
  std::size_t p_count = 0;
  /// "none", "file:<name>", "inline" or "baseline:seed=<n>".
  std::string perturbation_source = "none";

  bool operator==(const Corpus&) const = default;
};

/// Throws Error(Validation) if the corpus invariants do not hold: non-empty,
/// unique ids, non-empty golds, one shared p_count.
void validate(const Corpus& corpus);

/// Default task kind for a known benchmark label (gsm8k, mmlu, strategyqa).
std::optional<TaskKind> dataset_task_kind(std::string_view dataset);

Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl, std::string name);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SyntheticSpec {
  std::uint64_t seed = 42;
  std::size_t n_arithmetic = 100;
  std::size_t n_adversarial = 75;
  std::size_t n_robustness = 75;
};

/// Gold of adversarial synthetic items.
inline constexpr std::string_view kContradictionGold = "contradiction";

Corpus generate_synthetic(const SyntheticSpec& spec);

struct PerturbedText {
  std::string text;
  bool degenerate = false;

  bool operator==(const PerturbedText&) const = default;
};

/// Deterministic rule-based surface variants. Variant j applies rule j % 3:
/// synonym swap, clause transposition, punctuation/whitespace re-layout.
/// Digits and single-letter option tokens are never altered.
std::vector<PerturbedText> perturb_baseline(std::string_view prompt, std::size_t p, std::uint64_t seed);

struct VariantFileSource {
  std::filesystem::path path;
};
struct BaselineSource {
  std::size_t p = 3;
  std::uint64_t seed = 42;
};
using PerturbationSource = std::variant<VariantFileSource, BaselineSource>;

/// Fills every instance with P perturbations. With the baseline source, an
/// item's own paraphrases are used first and the baseline supplies the rest.
Corpus attach_perturbations(Corpus corpus, const PerturbationSource& source);

}  // namespace reasonq
