#include "reasonq/corpus.hpp"
#include "reasonq/error.hpp"
#include "reasonq/rng.hpp"

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <set>

namespace reasonq {
namespace {

// Content-word synonym table. Keys and values are lowercase; values never
// contain digits and keys are never single letters.
const std::map<std::string, std::vector<std::string>, std::less<>>& synonym_table() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> table{
      {"amount", {"quantity"}},
      {"bag", {"sack"}},
      {"begins", {"starts"}},
      {"big", {"large"}},
      {"book", {"volume"}},
      {"books", {"volumes"}},
      {"bought", {"purchased"}},
      {"buy", {"purchase"}},
      {"buys", {"purchases", "acquires"}},
      {"calculate", {"compute", "work out"}},
      {"car", {"automobile"}},
      {"children", {"kids"}},
      {"chooses", {"selects"}},
      {"compute", {"calculate"}},
      {"correct", {"right"}},
      {"difficult", {"hard"}},
      {"each", {"every"}},
      {"easy", {"simple"}},
      {"exactly", {"precisely"}},
      {"fast", {"quick"}},
      {"fills", {"packs"}},
      {"find", {"determine", "work out"}},
      {"friend", {"companion", "pal"}},
      {"friends", {"companions", "pals"}},
      {"gave", {"handed"}},
      {"gets", {"receives", "obtains"}},
      {"gives", {"hands"}},
      {"got", {"received"}},
      {"happy", {"glad"}},
      {"house", {"home"}},
      {"large", {"big"}},
      {"left", {"remaining"}},
      {"makes", {"produces"}},
      {"money", {"cash"}},
      {"more", {"additional", "extra"}},
      {"needs", {"requires"}},
      {"now", {"at this point", "currently"}},
      {"people", {"persons"}},
      {"picks", {"selects"}},
      {"quick", {"fast"}},
      {"quickly", {"rapidly"}},
      {"receives", {"gets"}},
      {"road", {"street"}},
      {"shop", {"store"}},
      {"small", {"little"}},
      {"starts", {"begins"}},
      {"store", {"shop"}},
      {"total", {"sum", "overall amount"}},
      {"travelled", {"journeyed"}},
      {"traveled", {"journeyed"}},
      {"uses", {"utilizes"}},
      {"wants", {"wishes"}},
  };
  return table;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::optional<std::string> synonym_swap(std::string_view prompt, SplitMix64& rng, std::size_t round) {
  const auto& table = synonym_table();
  std::string out;
  bool changed = false;
  std::size_t i = 0;
  while (i < prompt.size()) {
    if (!is_alpha(prompt[i])) {
      out.push_back(prompt[i++]);
      continue;
    }
    std::size_t b = i;
    while (i < prompt.size() && (is_alpha(prompt[i]) || prompt[i] == '\'')) ++i;
    std::string_view word = prompt.substr(b, i - b);
    // Words glued to digits ("10-dollar", "x2") are left alone.
    bool glued = (b > 0 && std::isdigit(static_cast<unsigned char>(prompt[b - 1]))) ||
                 (i < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[i])));
    std::string lower(word);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto it = table.find(lower);
    if (word.size() < 2 || glued || it == table.end()) {
      out.append(word);
      continue;
    }
    const auto& choices = it->second;
    std::string pick = choices[(rng.below(choices.size()) + round) % choices.size()];
    if (std::isupper(static_cast<unsigned char>(word.front()))) {
      pick.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(pick.front())));
    }
    out += pick;
    changed = true;
  }
  if (!changed) return std::nullopt;
  return out;
}

// Splits on . ! ? followed by whitespace; never inside digit.digit.
std::vector<std::string_view> split_sentences(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < s.size() && !is_space(s[i + 1])) continue;
    std::size_t end = i + 1;
    auto piece = s.substr(start, end - start);
    std::size_t lead = piece.find_first_not_of(" \t\r\n");
    if (lead != std::string_view::npos) out.push_back(piece.substr(lead));
    start = end;
  }
  auto tail = s.substr(start);
  std::size_t lead = tail.find_first_not_of(" \t\r\n");
  if (lead != std::string_view::npos) {
    tail = tail.substr(lead);
    while (!tail.empty() && is_space(tail.back())) tail.remove_suffix(1);
    out.push_back(tail);
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(s.front())));
  return s;
}

// Lowercases a leading function word so it reads naturally mid-sentence;
// proper nouns and everything else keep their case.
std::string decapitalize(std::string s) {
  static const std::set<std::string, std::less<>> kFunctionWords{
      "The", "A", "An", "It", "He", "She", "They", "There", "This", "That", "We", "You",
      "His", "Her", "Their", "Its", "Each", "Every", "All", "Some", "If", "When"};
  auto sp = s.find(' ');
  std::string first = s.substr(0, sp);
  if (kFunctionWords.contains(first)) s.front() = static_cast<char>(std::tolower(static_cast<unsigned char>(s.front())));
  return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::optional<std::string> transpose_clause(std::string_view prompt) {
  auto sentences = split_sentences(prompt);
  if (sentences.empty()) return std::nullopt;
  std::vector<std::string> parts(sentences.begin(), sentences.end());
  const std::size_t candidates = parts.size() >= 2 ? parts.size() - 1 : 1;

  // Pass 1: "Lead, trail." -> "Trail, lead."
  for (std::size_t k = 0; k < candidates; ++k) {
    const std::string& s = parts[k];
    auto comma = s.find(", ");
    if (comma == std::string::npos || comma == 0) continue;
    char terminal = (s.back() == '.' || s.back() == '!' || s.back() == '?') ? s.back() : '\0';
    std::string body = terminal ? s.substr(0, s.size() - 1) : s;
    std::string lead = body.substr(0, comma);
    std::string trail = body.substr(comma + 2);
    if (trail.empty()) continue;
    parts[k] = capitalize(trail) + ", " + decapitalize(lead) + (terminal ? std::string(1, terminal) : "");
    return join(parts, " ");
  }
  // Pass 2: "X because Y." -> "Because Y, x."
  static constexpr std::array<std::string_view, 5> kSubordinators{" because ", " since ", " while ", " when ",
                                                                  " if "};
  for (std::size_t k = 0; k < candidates; ++k) {
    const std::string& s = parts[k];
    for (auto sub : kSubordinators) {
      auto pos = s.find(sub);
      if (pos == std::string::npos || pos == 0) continue;
      char terminal = (s.back() == '.' || s.back() == '!' || s.back() == '?') ? s.back() : '\0';
      std::string body = terminal ? s.substr(0, s.size() - 1) : s;
      std::string lead = body.substr(0, pos);
      std::string clause = body.substr(pos + sub.size());
      if (clause.empty()) continue;
      std::string word(sub.substr(1, sub.size() - 2));
      parts[k] = capitalize(word) + " " + clause + ", " + decapitalize(lead) +
                 (terminal ? std::string(1, terminal) : "");
      return join(parts, " ");
    }
  }
  // Pass 3: move the final sentence (usually the question) to the front.
  if (parts.size() >= 2) {
    std::vector<std::string> moved;
    moved.push_back(parts.back());
    moved.insert(moved.end(), parts.begin(), parts.end() - 1);
    return join(moved, " ");
  }
  return std::nullopt;
}

std::optional<std::string> relayout(std::string_view prompt) {
  auto sentences = split_sentences(prompt);
  if (sentences.size() >= 2) {
    std::vector<std::string> parts(sentences.begin(), sentences.end());
    return join(parts, "\n");
  }
  // Single sentence: break the line after each comma.
  std::string out;
  bool changed = false;
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    if (prompt[i] == ',' && i + 1 < prompt.size() && prompt[i + 1] == ' ') {
      out += ",\n";
      ++i;
      changed = true;
    } else {
      out.push_back(prompt[i]);
    }
  }
  if (!changed) return std::nullopt;
  return out;
}

}  // namespace

std::vector<PerturbedText> perturb_baseline(std::string_view prompt, std::size_t p, std::uint64_t seed) {
  if (prompt.empty()) throw Error(ErrorKind::Precondition, "cannot perturb an empty prompt");
  if (p == 0) throw Error(ErrorKind::Precondition, "perturbation count must be >= 1");
  SplitMix64 rng(derive_seed(seed, fnv1a(prompt)));
  std::vector<PerturbedText> out;
  out.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    std::optional<std::string> variant;
    switch (j % 3) {
      case 0: variant = synonym_swap(prompt, rng, j / 3); break;
      case 1: variant = transpose_clause(prompt); break;
      default: variant = relayout(prompt); break;
    }
    if (variant && *variant != prompt) {
      out.push_back({std::move(*variant), false});
    } else {
      out.push_back({std::string(prompt), true});
    }
  }
  return out;
}

}  // namespace reasonq
