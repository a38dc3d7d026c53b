// One PASS/FAIL line per acceptance criterion, followed by indented detail
// lines. Tolerances are fixed here and must not be loosened to turn a line
// green; a red line is a finding.
#include "reasonq/aggregate.hpp"
#include "reasonq/cli.hpp"
#include "reasonq/metrics.hpp"
#include "reasonq/pipeline.hpp"
#include "reasonq/report.hpp"
#include "reasonq/stats.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace reasonq;
namespace fs = std::filesystem;

namespace {

constexpr double kCompositeTol = 0.0015;
constexpr double kAnchorTol = 0.001;
constexpr double kRankGapExemption = 0.002;
constexpr double kPearsonTol = 0.03;
constexpr double kPValueTol = 0.002;
constexpr double kFisherTol = 0.002;
constexpr double kPartialTol = 0.001;
constexpr double kBootstrapDeviationTol = 0.03;
constexpr double kStatsSeconds = 1.0;
constexpr double kBootstrapSeconds = 30.0;
constexpr double kCompositeSeconds = 1.0;
constexpr double kEndToEndSeconds = 10.0;

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}

  void check(bool ok, const std::string& what) {
    detail_.push_back(std::string(ok ? "    ok   " : "    FAIL ") + what);
    ok_ = ok_ && ok;
  }
  void info(const std::string& what) { detail_.push_back("    info " + what); }
  bool ok() const { return ok_; }

  void print() const {
    std::cout << (ok_ ? "PASS" : "FAIL") << "  " << name_ << "\n";
    for (const auto& d : detail_) std::cout << d << "\n";
  }

 private:
  std::string name_;
  std::vector<std::string> detail_;
  bool ok_ = true;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DimensionVector vector_of(const rqtest::TableRow& row) {
  return {row.num("cq"), row.num("cs"), row.num("rs"), row.num("ls"), row.num("es"), row.num("ss")};
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "reasonq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  return code;
}

// ---------------------------------------------------------------------------

Criterion composite_reproduction() {
  Criterion c("composite reproduction: pooled-table Q_bal/Q_saf/Q_acc/Q_eff within 0.0015");
  auto t0 = std::chrono::steady_clock::now();
  const std::pair<const char*, const char*> columns[] = {
      {"balanced", "q_bal"}, {"safety_priority", "q_saf"}, {"accuracy_priority", "q_acc"}, {"efficiency_priority", "q_eff"}};
  std::size_t passed = 0, total = 0;
  double worst = 0;
  for (const auto& row : rqtest::read_table(rqtest::fixture("table3.csv"))) {
    for (const auto& [scenario, column] : columns) {
      double q = composite(vector_of(row), *find_scenario(scenario)).q;
      double diff = std::abs(q - row.num(column));
      worst = std::max(worst, diff);
      ++total;
      if (diff <= kCompositeTol) {
        ++passed;
      } else {
        c.check(false, row.text("model") + " " + scenario + fmt(": %.4f vs %.3f", q, row.num(column)));
      }
    }
  }
  c.check(total == 28 && passed == total, std::to_string(passed) + "/" + std::to_string(total) +
                                              fmt(" composites within tolerance (worst %.5f)", worst));

  DimensionVector claude{0.872, 0.417, 0.963, 0.850, 0.643, 0.926};
  DimensionVector gpt;
  for (const auto& row : rqtest::read_table(rqtest::fixture("table3.csv"))) {
    if (row.text("model") == "GPT-4o-mini") gpt = vector_of(row);
  }
  struct Anchor {
    const char* what;
    DimensionVector d;
    const char* scenario;
    double want;
  } anchors[] = {{"Claude Balanced", claude, "balanced", 0.778},
                 {"Claude Safety", claude, "safety_priority", 0.797},
                 {"GPT-4o-mini Balanced", gpt, "balanced", 0.733}};
  for (const auto& a : anchors) {
    double q = composite(a.d, *find_scenario(a.scenario)).q;
    c.check(std::abs(q - a.want) <= kAnchorTol, std::string(a.what) + fmt(" %.4f (published %.3f)", q, a.want));
  }
  double elapsed = seconds_since(t0);
  c.check(elapsed < kCompositeSeconds, fmt("runtime %.3f s", elapsed));
  return c;
}

Criterion per_dataset_composite() {
  Criterion c("per-dataset composite: per-dataset-table Q_bal within 0.0015");
  std::size_t passed = 0, total = 0;
  double worst = 0;
  const auto& bal = *find_scenario("balanced");
  for (const auto& row : rqtest::read_table(rqtest::fixture("table4.csv"))) {
    double q = composite(vector_of(row), bal).q;
    double diff = std::abs(q - row.num("q_bal"));
    worst = std::max(worst, diff);
    ++total;
    if (diff <= kCompositeTol) {
      ++passed;
    } else {
      c.check(false, row.text("model") + " " + row.text("dataset") + fmt(": %.4f vs %.3f", q, row.num("q_bal")));
    }
  }
  c.check(total == 28 && passed == total,
          std::to_string(passed) + "/" + std::to_string(total) + fmt(" within tolerance (worst %.5f)", worst));
  return c;
}

Criterion ranking_reproduction() {
  Criterion c("ranking reproduction: published orders for seven scenarios plus the Accuracy/Legal inversion");
  std::map<std::string, DimensionVector> profiles;
  for (const auto& row : rqtest::read_table(rqtest::fixture("table3.csv"))) profiles[row.text("model")] = vector_of(row);

  // Published order, best first, in short names.
  const std::vector<std::pair<const char*, std::vector<std::string>>> published{
      {"balanced", {"Claude", "GPT", "Gemini", "DeepSeek", "LLaMA", "Phi-2", "Qwen"}},
      {"safety_priority", {"Claude", "DeepSeek", "Gemini", "GPT", "LLaMA", "Qwen", "Phi-2"}},
      {"accuracy_priority", {"Claude", "DeepSeek", "Gemini", "GPT", "LLaMA", "Phi-2", "Qwen"}},
      {"efficiency_priority", {"Claude", "GPT", "Gemini", "DeepSeek", "LLaMA", "Phi-2", "Qwen"}},
      {"medical_triage", {"Claude", "Gemini", "DeepSeek", "LLaMA", "GPT", "Qwen", "Phi-2"}},
      {"legal_compliance", {"Claude", "GPT", "Gemini", "LLaMA", "DeepSeek", "Qwen", "Phi-2"}},
      {"edge_device", {"Claude", "GPT", "Gemini", "DeepSeek", "LLaMA", "Phi-2", "Qwen"}},
  };
  std::vector<ScenarioRanking> rankings;
  for (const auto& [scenario, order] : published) {
    auto r = rank(profiles, *find_scenario(scenario));
    rankings.push_back(r);
    std::map<std::string, double> q;
    std::string ours;
    for (const auto& e : r.entries) {
      q[rqtest::short_name(e.model_id)] = e.q;
      ours += (ours.empty() ? "" : " > ") + rqtest::short_name(e.model_id);
    }
    std::size_t exempt = 0;
    bool ok = true;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        double gap = q.at(order[i]) - q.at(order[j]);
        if (gap > 0) continue;
        if (std::abs(gap) < kRankGapExemption) {
          ++exempt;
          c.info(std::string(scenario) + ": " + order[i] + "/" + order[j] + fmt(" gap %.4f exempted", gap));
        } else {
          ok = false;
        }
      }
    }
    c.check(ok, std::string(scenario) + ": " + ours + (exempt ? " (" + std::to_string(exempt) + " exempted)" : ""));
  }
  auto report = inversions(rankings);
  bool found = report.contains("DeepSeek-V3", "GPT-4o-mini", "accuracy_priority", "legal_compliance");
  c.check(found, "inversion DeepSeek-V3/GPT-4o-mini between accuracy_priority and legal_compliance");
  c.info(std::to_string(report.pairs.size()) + " inversions in total");
  return c;
}

Criterion statistics_reproduction() {
  Criterion c("statistics reproduction: published r, p, Fisher CIs, partial r, seeded bootstrap");
  auto obs = load_observations_csv(rqtest::fixture("table4.csv"));

  auto t0 = std::chrono::steady_clock::now();
  ValidityConfig cfg;  // Fisher only
  auto report = validity_matrix(obs, cfg);
  const auto& published = rqtest::published_correlations();
  std::size_t ok_r = 0;
  double worst = 0;
  for (std::size_t i = 0; i < published.size(); ++i) {
    const auto& rec = report.records[i];
    double diff = std::abs(rec.r - published[i].r);
    worst = std::max(worst, diff);
    bool same_pair = rec.pair == make_pair(published[i].a, published[i].b);
    if (same_pair && diff <= kPearsonTol) {
      ++ok_r;
    } else {
      c.check(false, pair_label(rec.pair) + fmt(" r %.4f vs %.3f", rec.r, published[i].r));
    }
  }
  c.check(ok_r == 15, std::to_string(ok_r) + "/15 Pearson r within 0.03" + fmt(" (worst %.4f)", worst));
  c.info(std::to_string(report.summary.below_050) + " of 15 pairs with |r| < 0.50");

  const double rs[] = {0.427, 0.160, 0.494}, ps[] = {0.024, 0.416, 0.008};
  for (int i = 0; i < 3; ++i) {
    double p = p_value(rs[i], 28).p;
    c.check(std::abs(p - ps[i]) <= kPValueTol, fmt("p(r=%.3f, n=28) = %.4f (published %.3f)", rs[i], p, ps[i]));
  }
  struct Ci {
    double r, lo, hi;
  } cis[] = {{0.783, 0.579, 0.895}, {0.427, 0.064, 0.690}};
  for (const auto& ci : cis) {
    auto got = fisher_ci(ci.r, 28);
    bool ok = std::abs(got.lo - ci.lo) <= kFisherTol && std::abs(got.hi - ci.hi) <= kFisherTol;
    c.check(ok, fmt("Fisher CI r=%.3f: [%.4f, ", ci.r, got.lo) + fmt("%.4f] (published [%.3f, %.3f])", got.hi, ci.lo, ci.hi));
  }
  double partial = partial_correlation(0.521, 0.783, 0.787);
  c.check(std::abs(partial - (-0.247)) <= kPartialTol,
          fmt("partial r(RS-ES | CQ) from (0.521, 0.783, 0.787) = %.5f (published -0.247, off by %.5f)", partial,
              std::abs(partial + 0.247)));
  if (!report.partials.empty()) c.info(fmt("partial r(RS-ES | CQ) from unrounded per-dataset columns = %.5f", report.partials[0].r));
  double stats_elapsed = seconds_since(t0);
  c.check(stats_elapsed < kStatsSeconds, fmt("runtime excluding bootstrap %.3f s", stats_elapsed));

  auto t1 = std::chrono::steady_clock::now();
  ValidityConfig boot;
  boot.bootstrap = BootstrapConfig{10000, 42, 0.95, 1};
  auto first = validity_matrix(obs, boot);
  double boot_elapsed = seconds_since(t1);
  auto second = validity_matrix(obs, boot);
  bool identical = true;
  double max_dev = 0;
  std::string max_pair;
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    const auto& a = *first.records[i].bootstrap;
    const auto& b = *second.records[i].bootstrap;
    identical = identical && format_double(a.ci.lo) == format_double(b.ci.lo) &&
                format_double(a.ci.hi) == format_double(b.ci.hi) && a.redraws == b.redraws;
    const auto& f = first.records[i].ci;
    double dev = std::max(std::abs(a.ci.lo - f.lo), std::abs(a.ci.hi - f.hi));
    if (dev > max_dev) {
      max_dev = dev;
      max_pair = pair_label(first.records[i].pair) + fmt(" bootstrap [%.3f, %.3f]", a.ci.lo, a.ci.hi) +
                 fmt(" vs Fisher [%.3f, %.3f]", f.lo, f.hi);
    }
  }
  c.check(max_dev <= kBootstrapDeviationTol,
          fmt("bootstrap B=10000 seed 42: max deviation from Fisher bounds %.4f over 15 pairs", max_dev) + " (" +
              max_pair + ")");
  c.check(identical, "bootstrap intervals byte-identical across two runs");
  c.check(boot_elapsed < kBootstrapSeconds, fmt("bootstrap runtime %.2f s", boot_elapsed));
  return c;
}

Criterion metric_oracles() {
  Criterion c("metric unit oracles: CS values, ES <= CQ, single-step LS, RS absence, brute-force agreement");
  std::mt19937_64 rng(20240917);
  auto space = rqtest::all_patterns();
  auto scorer = rqtest::make_pattern_scorer();
  bool cs_ok = true, es_ok = true, rs_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<rqtest::InstancePattern> corpus;
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) corpus.push_back(space[rng() % space.size()]);
    std::vector<InstanceOutcome> outcomes;
    for (std::size_t i = 0; i < n; ++i) {
      auto r = rqtest::render(corpus[i], i);
      outcomes.push_back(make_outcome(r.instance, r.runs, r.perturbed));
      double cs = instance_consistency(outcomes.back());
      cs_ok = cs_ok && (cs == 0.0 || cs == 1.0 || std::abs(cs - 1.0 / 3.0) < 1e-15);
    }
    auto d = profile(outcomes, *scorer, rqtest::kOracleTMax);
    es_ok = es_ok && d.es <= d.cq;
    bool any_correct = false;
    for (const auto& o : outcomes) any_correct |= o.correct;
    rs_ok = rs_ok && (d.rs.has_value() == any_correct);
  }
  c.check(cs_ok, "per-instance CS in {0, 1/3, 1} over 1000 randomized K=3 fixtures");
  c.check(es_ok, "ES <= CQ over 1000 randomized fixtures");
  bool table_ok = true;
  for (const auto& row : rqtest::read_table(rqtest::fixture("table4.csv"))) table_ok &= row.num("es") <= row.num("cq");
  c.check(table_ok, "ES <= CQ on all 28 per-dataset rows");

  BaselineScorer baseline;
  bool single = instance_coherence("The answer is 4.", baseline) == 1.0 &&
                instance_coherence("Step 1: the answer is 4", baseline) == 1.0 &&
                instance_coherence("We know the total is not 12", *scorer) == 1.0;
  c.check(single, "LS = 1 for single-step traces");

  std::vector<rqtest::InstancePattern> none_correct{{{0, 0, 0}, false, 3, {0, 0}, 10, {0, 0, 0}},
                                                    {{0, 1, 2}, false, 2, {1, 1}, 10, {0, 1, 2}}};
  std::vector<rqtest::InstancePattern> one_correct = none_correct;
  one_correct[1].correct = true;
  c.check(rs_ok && !rqtest::system_profile(none_correct, *scorer).rs.has_value() &&
              rqtest::system_profile(one_correct, *scorer).rs.has_value(),
          "RS absent iff zero correct instances");

  auto t0 = std::chrono::steady_clock::now();
  auto sweep = rqtest::sweep_brute_force(5);
  c.check(sweep.mismatches == 0, std::to_string(sweep.corpora) + " corpora of 1..5 instances match the brute-force oracle" +
                                     (sweep.mismatches ? " (first mismatch: " + sweep.first_mismatch + ")" : ""));
  c.info(fmt("brute-force sweep %.2f s", seconds_since(t0)));
  return c;
}

Criterion end_to_end_determinism() {
  Criterion c("end-to-end determinism: replay fixture artifact byte-identical across runs and concurrency 1/2/8");
  auto t0 = std::chrono::steady_clock::now();
  auto base = rqtest::evaluate_mini_bytes(1);
  c.check(rqtest::evaluate_mini_bytes(1) == base, "repeat run at concurrency 1");
  c.check(rqtest::evaluate_mini_bytes(2) == base, "concurrency 2");
  c.check(rqtest::evaluate_mini_bytes(8) == base, "concurrency 8");
  auto a = artifact_from_json(Json::parse(base));
  c.check(a.models.size() == 2 && a.config.k == 3 && a.config.p == 3 && a.config.scorer.mode == "baseline",
          "fixture shape: 2 models, K=3, P=3, baseline scorer");
  std::string cli_out;
  int code = run_cli({"-q", "evaluate", "--corpus", rqtest::fixture("mini/mini.jsonl").string(), "--models",
                      "mini-strong,mini-weak", "--replay", rqtest::fixture("mini/replay.jsonl").string()},
                     &cli_out);
  c.check(code == 0 && cli_out == rqtest::read_text(rqtest::fixture("mini/golden_artifact.json")),
          "command-line artifact equals the committed golden");
  double elapsed = seconds_since(t0);
  c.check(elapsed < kEndToEndSeconds, fmt("runtime %.2f s", elapsed));
  return c;
}

Criterion cache_contract() {
  Criterion c("cache contract: second evaluate makes zero upstream calls; tampering is caught by cache verify");
  rqtest::TempDir dir;
  const fs::path cache_dir = dir / "cache";

  std::size_t first_calls = 0, second_calls = 0;
  std::string first_bytes, second_bytes;
  {
    auto counting = std::make_shared<rqtest::CountingBackend>(rqtest::mini_replay());
    Provider provider(counting, ResponseCache(cache_dir), {}, 4);
    first_bytes = rqtest::evaluate_mini_bytes(4, provider);
    first_calls = counting->calls;
  }
  {
    auto counting = std::make_shared<rqtest::CountingBackend>(rqtest::mini_replay());
    Provider provider(counting, ResponseCache(cache_dir), {}, 4);
    second_bytes = rqtest::evaluate_mini_bytes(4, provider);
    second_calls = counting->calls;
  }
  c.check(first_calls > 0, "first run reached the backend " + std::to_string(first_calls) + " times");
  c.check(second_calls == 0, "second run reached the backend " + std::to_string(second_calls) + " times");
  c.check(first_bytes == second_bytes, "both runs produce the same artifact");

  // Same contract through the command line: without --replay the tool can only
  // succeed if every response comes from the cache.
  const std::string corpus = rqtest::fixture("mini/mini.jsonl").string();
  const fs::path cli_cache = dir / "cli-cache";
  std::string out1, out2;
  int code1 = run_cli({"-q", "evaluate", "--corpus", corpus, "--models", "mini-strong,mini-weak", "--replay",
                       rqtest::fixture("mini/replay.jsonl").string(), "--cache-dir", cli_cache.string()},
                      &out1);
  int code2 = run_cli({"-q", "evaluate", "--corpus", corpus, "--models", "mini-strong,mini-weak", "--cache-dir",
                       cli_cache.string()},
                      &out2);
  c.check(code1 == 0 && code2 == 0 && out1 == out2, "command-line rerun served entirely from the cache");

  std::string verify_out;
  c.check(run_cli({"cache", "verify", "--dir", cli_cache.string()}, &verify_out) == 0, "intact cache verifies clean");
  fs::path victim;
  for (const auto& e : fs::directory_iterator(cli_cache)) {
    if (e.path().extension() == ".json") {
      victim = e.path();
      break;
    }
  }
  std::string text = rqtest::read_text(victim);
  auto pos = text.find("\"raw_text\":\"");
  text.insert(pos + 12, "tampered ");
  rqtest::write_text(victim, text);
  int code = run_cli({"cache", "verify", "--dir", cli_cache.string()}, &verify_out);
  c.check(code == 1 && verify_out.find(victim.filename().string()) != std::string::npos,
          "tampered entry " + victim.filename().string().substr(0, 12) + "... reported by cache verify");
  return c;
}

}  // namespace

int main() {
  std::vector<std::function<Criterion()>> criteria{composite_reproduction, per_dataset_composite, ranking_reproduction,
                                                   statistics_reproduction, metric_oracles,       end_to_end_determinism,
                                                   cache_contract};
  std::size_t passed = 0;
  for (const auto& run : criteria) {
    Criterion c("");
    try {
      c = run();
    } catch (const std::exception& e) {
      c.check(false, std::string("exception: ") + e.what());
    }
    c.print();
    passed += c.ok();
  }
  std::cout << passed << "/" << criteria.size() << " criteria pass\n";
  return passed == criteria.size() ? 0 : 1;
}
