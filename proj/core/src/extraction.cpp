#include "reasonq/extraction.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <stdexcept>
#include <vector>

namespace reasonq {

const char* to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::Numeric: return "numeric";
    case TaskKind::MultipleChoice: return "multiple_choice";
    case TaskKind::Boolean: return "boolean";
    case TaskKind::Freeform: return "freeform";
  }
  return "freeform";
}

std::optional<TaskKind> parse_task_kind(std::string_view name) noexcept {
  if (name == "numeric") return TaskKind::Numeric;
  if (name == "multiple_choice") return TaskKind::MultipleChoice;
  if (name == "boolean") return TaskKind::Boolean;
  if (name == "freeform") return TaskKind::Freeform;
  return std::nullopt;
}

const char* to_string(Strategy strategy) noexcept {
  switch (strategy) {
    case Strategy::Exact: return "exact";
    case Strategy::Substring: return "substring";
    case Strategy::Numeric: return "numeric";
    case Strategy::Boolean: return "boolean";
    case Strategy::Choice: return "choice";
    case Strategy::None: return "none";
  }
  return "none";
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_terminal_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}
bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || (static_cast<unsigned char>(c) >= 0x80);
}

std::string unicode_fold(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC normalizer unavailable");
  icu::UnicodeString us = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  us = nfkc->normalize(us, status);
  us.toLower(icu::Locale::getRoot());
  us = nfkc->normalize(us, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  std::string out;
  us.toUTF8String(out);
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// A comma is a thousands separator when it has a digit on its left and
// exactly three digits (then a non-digit or the end) on its right.
std::string drop_thousands_separators(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && is_digit(s[i - 1]) && i + 3 < s.size() && is_digit(s[i + 1]) &&
        is_digit(s[i + 2]) && is_digit(s[i + 3]) &&
        (i + 4 >= s.size() || !is_digit(s[i + 4]))) {
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string strip_ends(std::string s) {
  size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  size_t e = s.size();
  while (e > b && (is_space(s[e - 1]) || is_terminal_punct(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct NumberSpan {
  size_t begin;
  size_t end;
};

// Plain decimal literals: optional '-', digits, optional '.digits'. A '-' only
// counts as a sign when not glued to a preceding word character.
std::vector<NumberSpan> find_numbers(std::string_view s) {
  std::vector<NumberSpan> spans;
  size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i]) || (i > 0 && (is_digit(s[i - 1])))) {
      ++i;
      continue;
    }
    if (i > 0 && std::isalpha(static_cast<unsigned char>(s[i - 1]))) {
      // digits glued to letters ("x2", "gpt4") are identifiers, not answers
      while (i < s.size() && is_digit(s[i])) ++i;
      continue;
    }
    size_t begin = i;
    if (i > 0 && s[i - 1] == '-' && (i < 2 || !is_word_char(s[i - 2]))) begin = i - 1;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
      ++i;
      while (i < s.size() && is_digit(s[i])) ++i;
    }
    spans.push_back({begin, i});
  }
  return spans;
}

std::optional<ExtractedAnswer> extract_numeric(const std::string& text) {
  auto spans = find_numbers(text);
  if (spans.empty()) return std::nullopt;

  static constexpr std::array<std::string_view, 3> kMarkers{"answer is", "####", "= "};
  size_t marker_end = std::string::npos;
  size_t marker_pos = 0;
  bool have_marker = false;
  for (auto marker : kMarkers) {
    size_t pos = text.rfind(marker);
    if (pos != std::string::npos && (!have_marker || pos > marker_pos)) {
      have_marker = true;
      marker_pos = pos;
      marker_end = pos + marker.size();
    }
  }
  const NumberSpan* chosen = &spans.back();
  if (have_marker) {
    for (const auto& span : spans) {
      if (span.begin >= marker_end || (text[span.begin] == '-' && span.begin + 1 >= marker_end)) {
        chosen = &span;
        break;
      }
    }
  }
  auto canon = canonical_decimal(std::string_view(text).substr(chosen->begin, chosen->end - chosen->begin));
  if (!canon) return std::nullopt;
  return ExtractedAnswer{*canon, Strategy::Numeric, true};
}

std::vector<std::string_view> word_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_word_char(s[i])) ++i;
    size_t b = i;
    while (i < s.size() && is_word_char(s[i])) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::optional<ExtractedAnswer> extract_boolean(const std::string& text) {
  for (auto tok : word_tokens(text)) {
    if (tok == "yes" || tok == "true") return ExtractedAnswer{"yes", Strategy::Boolean, true};
    if (tok == "no" || tok == "false") return ExtractedAnswer{"no", Strategy::Boolean, true};
  }
  return std::nullopt;
}

std::optional<ExtractedAnswer> extract_choice(const std::string& text) {
  auto letter = [](const std::smatch& m) {
    std::string g = m[1].matched ? m.str(1) : m.str(2);
    return ExtractedAnswer{std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(g[0])))),
                           Strategy::Choice, true};
  };
  // Precedence: explicit marker (last one wins), then "(x)", then "x)", then
  // a bare letter ending the text. A bare letter after the marker must be
  // followed by punctuation or the end, so "answer is a trick" is not "A".
  static const std::regex kMarker(R"(answer is:? ?(?:\(([a-d])\)|([a-d])(?=$|[.,;:!?)])))");
  static const std::regex kParen(R"(\(([a-d])\))");
  static const std::regex kHalfParen(R"((?:^|[^a-z0-9(])([a-d])\))");
  static const std::regex kFinal(R"((?:^|[^a-z0-9])([a-d])$)");

  std::optional<ExtractedAnswer> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kMarker); it != std::sregex_iterator(); ++it) {
    found = letter(*it);
  }
  if (found) return found;
  std::smatch m;
  if (std::regex_search(text, m, kParen)) return letter(m);
  if (std::regex_search(text, m, kHalfParen)) return letter(m);
  if (std::regex_search(text, m, kFinal)) return letter(m);
  return std::nullopt;
}

bool contains_on_boundary(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  size_t pos = haystack.find(needle);
  while (pos != std::string_view::npos) {
    bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]) || !is_word_char(needle.front());
    size_t after = pos + needle.size();
    bool right_ok = after >= haystack.size() || !is_word_char(haystack[after]) || !is_word_char(needle.back());
    // a numeric gold must not be glued to a longer decimal ("72" inside "72.5")
    if (right_ok && is_digit(needle.back()) && after + 1 < haystack.size() && haystack[after] == '.' &&
        is_digit(haystack[after + 1])) {
      right_ok = false;
    }
    if (left_ok && right_ok) return true;
    pos = haystack.find(needle, pos + 1);
  }
  return false;
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string s = unicode_fold(text);
  s = collapse_whitespace(s);
  s = drop_thousands_separators(s);
  return strip_ends(std::move(s));
}

std::optional<std::string> canonical_decimal(std::string_view literal) {
  std::string digits;
  for (char c : literal) {
    if (c != ',') digits.push_back(c);
  }
  std::string_view s = digits;
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  auto dot = s.find('.');
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if (dot != std::string_view::npos && frac_part.empty()) return std::nullopt;
  for (char c : int_part) {
    if (!is_digit(c)) return std::nullopt;
  }
  for (char c : frac_part) {
    if (!is_digit(c)) return std::nullopt;
  }
  while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
  std::string out = int_part.empty() ? "0" : std::string(int_part);
  if (!frac_part.empty()) out += "." + std::string(frac_part);
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

ExtractedAnswer extract_answer(std::string_view raw, TaskKind kind) {
  std::string text = normalize(raw);
  std::optional<ExtractedAnswer> found;
  switch (kind) {
    case TaskKind::Numeric: found = extract_numeric(text); break;
    case TaskKind::Boolean: found = extract_boolean(text); break;
    case TaskKind::MultipleChoice: found = extract_choice(text); break;
    case TaskKind::Freeform:
      if (!text.empty()) found = ExtractedAnswer{text, Strategy::Exact, true};
      break;
  }
  return found.value_or(ExtractedAnswer{});
}

std::string canonical_gold(std::string_view gold, TaskKind kind) {
  if (kind != TaskKind::Freeform) {
    auto e = extract_answer(gold, kind);
    if (e.confident) return e.value;
  }
  return normalize(gold);
}

bool match(std::string_view response_raw, std::string_view gold, TaskKind kind) {
  const std::string norm_response = normalize(response_raw);
  const std::string norm_gold = normalize(gold);
  if (norm_gold.empty()) return false;
  if (norm_response == norm_gold) return true;

  if (kind != TaskKind::Freeform) {
    auto e = extract_answer(response_raw, kind);
    if (e.confident && e.value == canonical_gold(gold, kind)) return true;
  }
  if (kind == TaskKind::Numeric || kind == TaskKind::Freeform) {
    return contains_on_boundary(norm_response, norm_gold);
  }
  return false;
}

bool answers_agree(const ExtractedAnswer& a, std::string_view raw_a, const ExtractedAnswer& b,
                   std::string_view raw_b) {
  const bool a_none = a.strategy == Strategy::None;
  const bool b_none = b.strategy == Strategy::None;
  if (a_none && b_none) return normalize(raw_a) == normalize(raw_b);
  if (a_none != b_none) return false;
  return a.value == b.value;
}

}  // namespace reasonq
