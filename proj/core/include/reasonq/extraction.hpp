#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace reasonq {

enum class TaskKind { Numeric, MultipleChoice, Boolean, Freeform };

const char* to_string(TaskKind kind) noexcept;
std::optional<TaskKind> parse_task_kind(std::string_view name) noexcept;

enum class Strategy { Exact, Substring, Numeric, Boolean, Choice, None };

const char* to_string(Strategy strategy) noexcept;

struct ExtractedAnswer {
  std::string value;  // canonical form; empty when strategy == None
  Strategy strategy = Strategy::None;
  bool confident = false;

  bool operator==(const ExtractedAnswer&) const = default;
};

/// Lowercase, NFKC, collapse whitespace, drop thousands separators inside
/// digit groups, and trim surrounding whitespace and terminal punctuation
/// (.,!?;:). Idempotent.
std::string normalize(std::string_view text);

/// Canonical decimal spelling of a numeric literal: no sign for zero or
/// positives, no leading zeros, no trailing fractional zeros, no separators.
/// Returns nullopt when the input is not a plain decimal literal.
std::optional<std::string> canonical_decimal(std::string_view literal);

ExtractedAnswer extract_answer(std::string_view raw, TaskKind kind);

/// The form a gold answer takes in a loaded corpus: the extracted value for
/// numeric/choice/boolean golds when one is found, otherwise normalize(gold).
std::string canonical_gold(std::string_view gold, TaskKind kind);

/// I(y_hat == y). Strategies in order: exact normalized equality, task-kind
/// extraction equality, then normalized-gold substring on token boundaries
/// (numeric and freeform only).
bool match(std::string_view response_raw, std::string_view gold, TaskKind kind);

/// Agreement of two runs' answers for consistency: extracted values compare
/// directly; two unextractable answers agree iff their normalized raw texts do.
bool answers_agree(const ExtractedAnswer& a, std::string_view raw_a, const ExtractedAnswer& b,
                   std::string_view raw_b);

}  // namespace reasonq
