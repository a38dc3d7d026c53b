#include "support/oracles.hpp"

#include "reasonq/scorer.hpp"

#include <cmath>
#include <sstream>

using namespace reasonq;

namespace rqtest {

const std::vector<std::array<int, 3>>& partitions3() {
  static const std::vector<std::array<int, 3>> parts{{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}, {0, 1, 2}};
  return parts;
}

std::vector<InstancePattern> all_patterns() {
  static const double psis[] = {0.0, 0.5, 1.0};
  static const std::int64_t tokens[] = {0, 64, 256, 300};
  std::vector<InstancePattern> out;
  for (const auto& ans : partitions3())
    for (bool correct : {false, true})
      for (int s = 0; s <= 3; ++s)
        for (double p1 : psis)
          for (double p2 : psis)
            for (auto t : tokens)
              for (const auto& tr : partitions3()) out.push_back({ans, correct, s, {p1, p2}, t, tr});
  return out;
}

std::vector<InstancePattern> pattern_alphabet() {
  return {
      {{0, 0, 0}, true, 3, {0.0, 0.0}, 64, {0, 0, 0}},   {{0, 0, 1}, true, 2, {1.0, 0.0}, 256, {0, 0, 1}},
      {{0, 1, 0}, false, 1, {0.5, 0.5}, 0, {0, 1, 2}},   {{0, 1, 1}, true, 0, {0.0, 1.0}, 300, {0, 1, 1}},
      {{0, 1, 2}, false, 3, {1.0, 1.0}, 128, {0, 1, 0}}, {{0, 0, 0}, false, 0, {0.5, 0.0}, 32, {0, 0, 0}},
      {{0, 1, 2}, true, 1, {0.0, 0.5}, 1, {0, 1, 2}},
  };
}

namespace {

const char* kGold = "10";

std::string answer_value(const InstancePattern& p, int label) {
  if (label == 0) return p.correct ? "10" : "11";
  return label == 1 ? "20" : "30";
}

std::string trace_text(const InstancePattern& p, std::size_t index, int run, const std::string& answer) {
  std::ostringstream s;
  s << "Step 1: item" << index << " run" << run << " grp" << p.traces[run] << " begins [grp=" << p.traces[run]
    << "]\n";
  s << "Step 2: carry on [psi=" << (run == 0 ? p.psi[0] : 0.0) << "]\n";
  s << "Step 3: the answer is " << answer << " [psi=" << (run == 0 ? p.psi[1] : 0.0) << "]";
  return s.str();
}

double tag_value(std::string_view text, std::string_view tag) {
  auto pos = text.rfind(tag);
  if (pos == std::string_view::npos) return 0.0;
  return std::stod(std::string(text.substr(pos + tag.size())));
}

}  // namespace

class PatternScorer final : public Scorer {
 public:
  ScorerVerdict contradiction(std::string_view, std::string_view hypothesis) override {
    return {VerdictKind::Contradiction, tag_value(hypothesis, "[psi="), VerdictBackend::External};
  }
  ScorerVerdict similarity(std::string_view a, std::string_view b) override {
    const bool same = tag_value(a, "[grp=") == tag_value(b, "[grp=");
    return {VerdictKind::Similarity, same ? 1.0 : kCrossTraceSimilarity, VerdictBackend::External};
  }
  ScorerCapabilities hello() override { return {1, {"contradiction", "similarity"}, "pattern"}; }
  EndpointMode mode() const override { return EndpointMode::Subprocess; }
};

std::unique_ptr<Scorer> make_pattern_scorer() { return std::make_unique<PatternScorer>(); }

Rendered render(const InstancePattern& p, std::size_t index) {
  Rendered r;
  r.instance.id = "i" + std::to_string(index);
  r.instance.prompt = "What is item " + std::to_string(index) + "?";
  r.instance.gold = kGold;
  r.instance.task_kind = TaskKind::Numeric;
  r.instance.dataset = "oracle";
  r.runs.instance_id = r.instance.id;
  r.runs.model_id = "m";
  for (int run = 0; run < 3; ++run) {
    ModelResponse resp;
    resp.raw_text = trace_text(p, index, run, answer_value(p, p.answers[run]));
    resp.token_count = run == 0 ? p.tokens : 100;
    r.runs.responses.push_back(resp);
  }
  for (int j = 0; j < 3; ++j) {
    ModelResponse resp;
    resp.raw_text = j < p.survived ? "The answer is 10" : "The answer is 99";
    r.perturbed.push_back(resp);
  }
  return r;
}

double oracle_instance_cs(const InstancePattern& p) {
  int agree = (p.answers[0] == p.answers[1]) + (p.answers[0] == p.answers[2]) + (p.answers[1] == p.answers[2]);
  return agree / 3.0;
}

DimensionVector oracle_profile(const std::vector<InstancePattern>& corpus) {
  const double n = static_cast<double>(corpus.size());
  double cq = 0, cs = 0, rs = 0, ls = 0, es = 0, ss = 0;
  int members = 0;
  for (const auto& p : corpus) {
    cq += p.correct ? 1 : 0;
    cs += oracle_instance_cs(p);
    if (p.correct) {
      rs += p.survived / 3.0;
      ++members;
    }
    ls += 1.0 - (p.psi[0] + p.psi[1]) / 2.0;
    if (p.correct) {
      double t = std::min(static_cast<double>(p.tokens) / kOracleTMax, 1.0);
      es += 2.0 * (1.0 - t) / (2.0 - t);
    }
    double sim = 0;
    for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
      sim += p.traces[a] == p.traces[b] ? 1.0 : kCrossTraceSimilarity;
    }
    ss += sim / 3.0;
  }
  DimensionVector d;
  d.cq = cq / n;
  d.cs = cs / n;
  if (members > 0) d.rs = rs / members;
  d.ls = ls / n;
  d.es = es / n;
  d.ss = ss / n;
  return d;
}

DimensionVector system_profile(const std::vector<InstancePattern>& corpus, Scorer& scorer) {
  std::vector<InstanceOutcome> outcomes;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto r = render(corpus[i], i);
    outcomes.push_back(make_outcome(r.instance, r.runs, r.perturbed));
  }
  return profile(outcomes, scorer, kOracleTMax);
}

bool same_vector(const DimensionVector& a, const DimensionVector& b, double tol) {
  for (auto d : kDimensions) {
    auto x = a.get(d), y = b.get(d);
    if (x.has_value() != y.has_value()) return false;
    if (x && std::abs(*x - *y) > tol) return false;
  }
  return true;
}

OracleSweep sweep_brute_force(std::size_t max_n) {
  OracleSweep sweep;
  auto scorer = make_pattern_scorer();
  auto check = [&](const std::vector<InstancePattern>& corpus) {
    ++sweep.corpora;
    auto got = system_profile(corpus, *scorer);
    auto want = oracle_profile(corpus);
    if (!same_vector(got, want)) {
      if (sweep.mismatches++ == 0) {
        std::ostringstream s;
        s << "corpus of " << corpus.size() << " (first answers " << corpus[0].answers[0] << corpus[0].answers[1]
          << corpus[0].answers[2] << ", correct " << corpus[0].correct << ")";
        sweep.first_mismatch = s.str();
      }
    }
  };
  for (const auto& p : all_patterns()) check({p});
  const auto alphabet = pattern_alphabet();
  for (std::size_t n = 2; n <= max_n; ++n) {
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      std::vector<InstancePattern> corpus;
      for (auto i : idx) corpus.push_back(alphabet[i]);
      check(corpus);
      std::size_t pos = 0;
      while (pos < n && ++idx[pos] == alphabet.size()) idx[pos++] = 0;
      if (pos == n) break;
    }
  }
  return sweep;
}

}  // namespace rqtest
