#include "reasonq/metrics.hpp"

#include "reasonq/error.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace reasonq {

const char* to_string(Dimension d) noexcept {
  switch (d) {
    case Dimension::CQ: return "CQ";
    case Dimension::CS: return "CS";
    case Dimension::RS: return "RS";
    case Dimension::LS: return "LS";
    case Dimension::ES: return "ES";
    case Dimension::SS: return "SS";
  }
  return "?";
}

std::optional<Dimension> parse_dimension(std::string_view name) noexcept {
  std::string up(name);
  for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto d : kDimensions) {
    if (up == to_string(d)) return d;
  }
  return std::nullopt;
}

std::optional<double> DimensionVector::get(Dimension d) const {
  switch (d) {
    case Dimension::CQ: return cq;
    case Dimension::CS: return cs;
    case Dimension::RS: return rs;
    case Dimension::LS: return ls;
    case Dimension::ES: return es;
    case Dimension::SS: return ss;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

void require_nonempty(std::span<const InstanceOutcome> outcomes) {
  if (outcomes.empty()) throw Error(ErrorKind::Precondition, "metrics need at least one instance outcome");
}

}  // namespace

StepSequence segment_trace(std::string_view raw) {
  const std::string text(raw);
  if (trim(text).empty()) throw Error(ErrorKind::Precondition, "empty trace: nothing to segment");

  static const std::regex kInlineStep(R"(\bstep\s+\d+\s*[:.)])", std::regex::icase);
  static const std::regex kLineMarker(R"((^|\n)[ \t]*(\d+[.)]|[-*])[ \t]+)");

  std::vector<std::pair<std::size_t, std::size_t>> markers;  // [begin, end) of marker text
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kInlineStep); it != std::sregex_iterator(); ++it) {
    markers.emplace_back(static_cast<std::size_t>(it->position()), static_cast<std::size_t>(it->position() + it->length()));
  }
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kLineMarker); it != std::sregex_iterator(); ++it) {
    std::size_t b = static_cast<std::size_t>(it->position(2));
    markers.emplace_back(b, static_cast<std::size_t>(it->position() + it->length()));
  }

  StepSequence seq;
  if (!markers.empty()) {
    std::sort(markers.begin(), markers.end());
    // drop markers nested inside an earlier one ("Step 1:" at a line start also matching "1.")
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (const auto& m : markers) {
      if (!kept.empty() && m.first < kept.back().second) continue;
      kept.push_back(m);
    }
    if (auto pre = trim(std::string_view(text).substr(0, kept.front().first)); !pre.empty()) seq.steps.push_back(pre);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      std::size_t end = i + 1 < kept.size() ? kept[i + 1].first : text.size();
      if (auto step = trim(std::string_view(text).substr(kept[i].second, end - kept[i].second)); !step.empty()) {
        seq.steps.push_back(std::move(step));
      }
    }
  } else {
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      char c = text[i];
      if (c != '.' && c != '!' && c != '?') continue;
      if (i + 1 >= text.size() || !std::isspace(static_cast<unsigned char>(text[i + 1]))) continue;
      if (auto s = trim(std::string_view(text).substr(start, i + 1 - start)); !s.empty()) seq.steps.push_back(std::move(s));
      start = i + 1;
    }
    if (auto s = trim(std::string_view(text).substr(start)); !s.empty()) seq.steps.push_back(std::move(s));
  }
  if (seq.steps.empty()) seq.steps.push_back(trim(text));
  return seq;
}

InstanceOutcome make_outcome(const EvalInstance& instance, const RunSet& runs, std::span<const ModelResponse> perturbed) {
  if (runs.responses.empty()) throw Error(ErrorKind::Precondition, "run set for '" + instance.id + "' is empty");
  InstanceOutcome out;
  out.instance_id = instance.id;
  for (const auto& r : runs.responses) {
    out.per_run_answers.push_back(extract_answer(r.raw_text, instance.task_kind));
    out.per_run_traces.push_back(r.raw_text);
    out.per_run_tokens.push_back(r.token_count);
  }
  out.correct = match(runs.responses.front().raw_text, instance.gold, instance.task_kind);
  if (!perturbed.empty()) {
    std::vector<bool> flags;
    for (const auto& r : perturbed) flags.push_back(match(r.raw_text, instance.gold, instance.task_kind));
    out.perturbed_correct = std::move(flags);
  }
  return out;
}

double instance_consistency(const InstanceOutcome& o) {
  const std::size_t k = o.per_run_answers.size();
  if (k < 2) throw Error(ErrorKind::Precondition, "consistency needs K >= 2 runs for '" + o.instance_id + "'");
  if (o.per_run_traces.size() != k) throw Error(ErrorKind::Precondition, "run answer/trace counts differ");
  std::size_t agree = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      if (answers_agree(o.per_run_answers[a], o.per_run_traces[a], o.per_run_answers[b], o.per_run_traces[b])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(k * (k - 1) / 2);
}

double instance_robustness(const InstanceOutcome& o) {
  if (!o.perturbed_correct || o.perturbed_correct->empty()) {
    throw Error(ErrorKind::Precondition, "missing perturbation results for correct instance '" + o.instance_id + "'");
  }
  const auto& flags = *o.perturbed_correct;
  std::size_t survived = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  return static_cast<double>(survived) / static_cast<double>(flags.size());
}

double instance_coherence(std::string_view trace, Scorer& scorer) {
  // An empty response has no steps and hence nothing to contradict.
  if (trim(trace).empty()) return 1.0;
  auto seq = segment_trace(trace);
  const std::size_t n = seq.steps.size();
  if (n == 1) return 1.0;
  double psi_sum = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) psi_sum += scorer.contradiction(seq.steps[j], seq.steps[j + 1]).score;
  return 1.0 - psi_sum / static_cast<double>(n - 1);
}

double instance_efficiency(bool correct, std::int64_t tokens, std::int64_t t_max) {
  if (t_max < 1) throw Error(ErrorKind::Precondition, "t_max must be >= 1");
  if (tokens < 0) throw Error(ErrorKind::Precondition, "token count must be >= 0");
  const double cq = correct ? 1.0 : 0.0;
  const double t = std::min(static_cast<double>(tokens) / static_cast<double>(t_max), 1.0);
  const double saving = 1.0 - t;
  const double denom = cq + saving;
  if (denom == 0.0) return 0.0;
  return 2.0 * cq * saving / denom;
}

double instance_stability(std::span<const std::string> traces, Scorer& scorer) {
  const std::size_t k = traces.size();
  if (k < 2) throw Error(ErrorKind::Precondition, "stability needs K >= 2 traces");
  double sum = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const bool ea = trim(traces[a]).empty();
      const bool eb = trim(traces[b]).empty();
      if (ea || eb) {
        sum += (ea && eb) ? 1.0 : 0.0;
      } else {
        sum += scorer.similarity(traces[a], traces[b]).score;
      }
    }
  }
  return sum / static_cast<double>(k * (k - 1) / 2);
}

// Corpus-level metrics sum in instance order so results never depend on how
// the outcomes were produced.

double correctness(std::span<const InstanceOutcome> outcomes) {
  require_nonempty(outcomes);
  std::size_t hits = 0;
  for (const auto& o : outcomes) hits += o.correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

double consistency(std::span<const InstanceOutcome> outcomes) {
  require_nonempty(outcomes);
  double sum = 0.0;
  for (const auto& o : outcomes) sum += instance_consistency(o);
  return sum / static_cast<double>(outcomes.size());
}

std::optional<double> robustness(std::span<const InstanceOutcome> outcomes) {
  require_nonempty(outcomes);
  double sum = 0.0;
  std::size_t members = 0;
  for (const auto& o : outcomes) {
    if (!o.correct) continue;
    sum += instance_robustness(o);
    ++members;
  }
  if (members == 0) return std::nullopt;
  return sum / static_cast<double>(members);
}

double coherence(std::span<const InstanceOutcome> outcomes, Scorer& scorer) {
  require_nonempty(outcomes);
  double sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.per_run_traces.empty()) throw Error(ErrorKind::Precondition, "no trace for '" + o.instance_id + "'");
    sum += instance_coherence(o.per_run_traces.front(), scorer);
  }
  return sum / static_cast<double>(outcomes.size());
}

double efficiency(std::span<const InstanceOutcome> outcomes, std::int64_t t_max) {
  require_nonempty(outcomes);
  double sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.per_run_tokens.empty()) throw Error(ErrorKind::Precondition, "no token count for '" + o.instance_id + "'");
    sum += instance_efficiency(o.correct, o.per_run_tokens.front(), t_max);
  }
  return sum / static_cast<double>(outcomes.size());
}

double stability(std::span<const InstanceOutcome> outcomes, Scorer& scorer) {
  require_nonempty(outcomes);
  double sum = 0.0;
  for (const auto& o : outcomes) sum += instance_stability(o.per_run_traces, scorer);
  return sum / static_cast<double>(outcomes.size());
}

DimensionVector profile(std::span<const InstanceOutcome> outcomes, Scorer& scorer, std::int64_t t_max) {
  DimensionVector d;
  d.cq = correctness(outcomes);
  d.cs = consistency(outcomes);
  d.rs = robustness(outcomes);
  d.ls = coherence(outcomes, scorer);
  d.es = efficiency(outcomes, t_max);
  d.ss = stability(outcomes, scorer);
  return d;
}

}  // namespace reasonq
