#include "reasonq/cli.hpp"

#include "reasonq/aggregate.hpp"
#include "reasonq/corpus.hpp"
#include "reasonq/error.hpp"
#include "reasonq/kvconfig.hpp"
#include "reasonq/pipeline.hpp"
#include "reasonq/provider.hpp"
#include "reasonq/report.hpp"
#include "reasonq/scorer.hpp"
#include "reasonq/stats.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <ostream>

namespace reasonq::cli {

namespace {

namespace fs = std::filesystem;

struct EvaluateOpts {
  std::string config;
  std::vector<std::string> corpora;
  bool synthetic = false;
  std::vector<std::string> models;
  std::string replay;
  std::string endpoint;
  std::string cache_dir;
  std::string scorer = "baseline";
  std::vector<std::string> scenarios;
  std::string weights;
  std::string perturbations;
  std::uint64_t seed = 42;
  std::size_t k = 3;
  std::size_t p = 3;
  std::int64_t t_max = 256;
  double temperature = 0.7;
  std::size_t concurrency = 4;
  std::size_t bootstrap = 0;
  std::string rs_policy = "error";
  std::string out;
};

struct RankOpts {
  std::string artifact;
  std::string scenario;
  std::string weights;
  std::string format = "markdown";
};

struct ValidityOpts {
  std::string observations;
  std::size_t b = 10000;
  std::uint64_t seed = 42;
  double level = 0.95;
  bool no_bootstrap = false;
  unsigned threads = 1;
  std::string format = "markdown";
};

struct SynthOpts {
  std::uint64_t seed = 42;
  std::size_t arithmetic = 100;
  std::size_t adversarial = 75;
  std::size_t robustness = 75;
  std::string out;
};

struct CacheOpts {
  std::string dir;
};

struct AssembleOpts {
  std::string observations;
  std::string pooled;
  std::size_t bootstrap = 0;
  std::uint64_t seed = 42;
  std::string out;
};

struct ReportOpts {
  std::string artifact;
  std::string table;
  std::string plot;
  std::string format = "markdown";
};

/// Upstream used when neither a replay file nor an endpoint is given: every
/// request must already be in the cache.
class CacheOnlyBackend final : public Backend {
 public:
  ModelResponse generate(const GenRequest& req, const std::string& digest) override {
    throw Error(ErrorKind::ReplayMiss, "no cached response for " + req.model_id + " run " +
                                           std::to_string(req.run_index) + " (digest " + digest +
                                           "); pass --replay or --endpoint");
  }
  std::string describe() const override { return "cache-only"; }
};

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  f << text;
  if (!f.flush()) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(ErrorKind::Config, std::string(what) + " not found: '" + path + "'");
}

RsPolicy parse_rs_policy(const std::string& s) {
  if (s == "error") return RsPolicy::Error;
  if (s == "renormalize") return RsPolicy::Renormalize;
  throw Error(ErrorKind::Config, "rs_policy must be 'error' or 'renormalize', got '" + s + "'");
}

WeightVector resolve_scenario(const std::string& name) {
  if (auto w = find_scenario(name)) return *w;
  std::string names;
  for (const auto& n : scenario_names()) names += (names.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::Config, "unknown scenario '" + name + "' (valid: " + names + ")");
}

// Values from the config file fill every option the command line left unset.
void apply_config(CLI::App& cmd, EvaluateOpts& o) {
  if (o.config.empty()) return;
  require_file(o.config, "config file");
  auto cfg = KvConfig::load(o.config);
  auto unset = [&](const char* flag) { return cmd.get_option(flag)->count() == 0; };
  auto str = [&](const char* key, const char* flag, std::string& dst) {
    if (auto v = cfg.get_string(key); v && unset(flag)) dst = *v;
  };
  auto list = [&](const char* key, const char* flag, std::vector<std::string>& dst) {
    if (auto v = cfg.get_list(key); v && unset(flag)) dst = *v;
  };
  auto integer = [&](const char* key, const char* flag, auto& dst) {
    if (auto v = cfg.get_int(key); v && unset(flag)) {
      if (*v < 0) throw Error(ErrorKind::Config, std::string(key) + " must be >= 0");
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(*v);
    }
  };
  static const std::set<std::string> kKnown = {"corpus",       "synthetic", "models",   "replay",      "endpoint",
                                               "cache_dir",    "scorer",    "scenarios", "weights",    "perturbations",
                                               "seed",         "k",         "p",        "t_max",       "temperature",
                                               "concurrency",  "bootstrap", "rs_policy", "out"};
  for (const auto& key : cfg.keys()) {
    if (!kKnown.contains(key)) throw Error(ErrorKind::Config, o.config + ": unknown key '" + key + "'");
  }
  list("corpus", "--corpus", o.corpora);
  list("models", "--models", o.models);
  list("scenarios", "--scenario", o.scenarios);
  str("replay", "--replay", o.replay);
  str("endpoint", "--endpoint", o.endpoint);
  str("cache_dir", "--cache-dir", o.cache_dir);
  str("scorer", "--scorer", o.scorer);
  str("weights", "--weights", o.weights);
  str("perturbations", "--perturbations", o.perturbations);
  str("rs_policy", "--rs-policy", o.rs_policy);
  str("out", "--out", o.out);
  integer("seed", "--seed", o.seed);
  integer("k", "--k", o.k);
  integer("p", "--p", o.p);
  integer("t_max", "--t-max", o.t_max);
  integer("concurrency", "--concurrency", o.concurrency);
  integer("bootstrap", "--bootstrap", o.bootstrap);
  if (auto v = cfg.get_double("temperature"); v && unset("--temperature")) o.temperature = *v;
  if (auto v = cfg.get_string("synthetic"); v && unset("--synthetic")) {
    if (*v != "true" && *v != "false") throw Error(ErrorKind::Config, "synthetic must be true or false");
    o.synthetic = *v == "true";
  }
}

int cmd_evaluate(CLI::App& cmd, EvaluateOpts& o, std::ostream& out) {
  apply_config(cmd, o);
  if (o.corpora.empty() && !o.synthetic) throw Error(ErrorKind::Config, "no corpus given (--corpus or --synthetic)");
  if (o.models.empty()) throw Error(ErrorKind::Config, "no models given (--models)");
  if (!o.replay.empty() && !o.endpoint.empty()) throw Error(ErrorKind::Config, "--replay and --endpoint are exclusive");

  EvaluateConfig cfg;
  for (const auto& path : o.corpora) {
    require_file(path, "corpus");
    cfg.corpora.push_back(load_corpus(path));
  }
  if (o.synthetic) {
    SyntheticSpec spec;
    spec.seed = o.seed;
    cfg.corpora.push_back(generate_synthetic(spec));
  }
  if (!o.perturbations.empty()) {
    require_file(o.perturbations, "perturbation file");
    for (auto& c : cfg.corpora) c = attach_perturbations(std::move(c), VariantFileSource{o.perturbations});
  }

  std::shared_ptr<Backend> upstream;
  if (!o.replay.empty()) {
    require_file(o.replay, "replay file");
    auto replay = ReplayBackend::load(o.replay);
    if (!replay->model_ids().empty()) {
      for (const auto& m : o.models) {
        if (!replay->model_ids().contains(m)) {
          std::string known;
          for (const auto& id : replay->model_ids()) known += (known.empty() ? "" : ", ") + id;
          throw Error(ErrorKind::Config, "unknown model '" + m + "' (replay file has: " + known + ")");
        }
      }
    }
    upstream = replay;
  } else if (!o.endpoint.empty()) {
    ChatBackendConfig bc;
    bc.endpoint = o.endpoint;
    upstream = std::make_shared<ChatCompletionBackend>(bc, make_httplib_transport(bc.timeout));
  } else {
    upstream = std::make_shared<CacheOnlyBackend>();
  }
  std::optional<ResponseCache> cache;
  if (!o.cache_dir.empty()) cache.emplace(o.cache_dir);
  Provider provider(upstream, std::move(cache), {}, std::max<std::size_t>(o.concurrency, 1));

  auto endpoint = ScorerEndpoint::parse(o.scorer);
  auto scorer = make_scorer(endpoint);
  auto caps = scorer_handshake(*scorer);
  require_ops(caps, {"contradiction", "similarity"});
  if (endpoint.cache) scorer = with_verdict_cache(std::move(scorer));

  cfg.models = o.models;
  cfg.k = o.k;
  cfg.p = o.p;
  cfg.t_max = o.t_max;
  cfg.temperature = o.temperature;
  cfg.seed = o.seed;
  cfg.concurrency = o.concurrency;
  cfg.rs_policy = parse_rs_policy(o.rs_policy);
  for (const auto& s : o.scenarios) cfg.scenarios.push_back(resolve_scenario(s));
  if (!o.weights.empty()) {
    require_file(o.weights, "weight file");
    if (cfg.scenarios.empty()) cfg.scenarios = builtin_scenarios();
    cfg.scenarios.push_back(load_weight_file(o.weights));
  }
  ValidityConfig vc;
  if (o.bootstrap > 0) vc.bootstrap = BootstrapConfig{o.bootstrap, o.seed, 0.95, 1};
  cfg.validity = vc;
  cfg.scorer.mode = to_string(endpoint.mode);
  cfg.scorer.address = endpoint.address;
  cfg.scorer.model = caps.model;
  cfg.scorer.protocol_version = caps.protocol_version;

  auto artifact = evaluate(cfg, provider, *scorer, [](std::size_t done, std::size_t total) {
    if (done == total || done % 100 == 0) spdlog::info("collected {}/{} items", done, total);
  });
  const auto& c = provider.counters();
  spdlog::info("requests {} (cache hits {}, upstream {}, retries {})", c.requests.load(), c.cache_hits.load(),
               c.upstream_calls.load(), c.retries.load());
  write_text(o.out, emit_results(artifact), out);
  return 0;
}

int cmd_rank(const RankOpts& o, std::ostream& out) {
  require_file(o.artifact, "artifact");
  if (o.scenario.empty() == o.weights.empty()) throw Error(ErrorKind::Config, "give exactly one of --scenario or --weights");
  auto artifact = read_results(o.artifact);
  WeightVector w;
  if (!o.weights.empty()) {
    require_file(o.weights, "weight file");
    w = load_weight_file(o.weights);
  } else {
    w = resolve_scenario(o.scenario);
  }
  auto r = rank(artifact.pooled, w, parse_rs_policy(artifact.config.rs_policy));
  // Reuse the rankings table renderer on a one-scenario artifact.
  ResultsArtifact view = artifact;
  view.scenarios = {w};
  view.rankings = {r};
  view.inversions = {};
  out << emit_table(view, TableKind::Rankings, parse_table_format(o.format));
  if (parse_table_format(o.format) == TableFormat::Markdown) {
    out << "\n";
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", r.entries[i].q);
      out << (i + 1) << ". " << r.entries[i].model_id << "  " << buf << (r.entries[i].tied ? "  (tie)" : "") << "\n";
    }
  }
  return 0;
}

int cmd_validity(const ValidityOpts& o, std::ostream& out) {
  require_file(o.observations, "observation file");
  auto obs = load_observations_csv(o.observations);
  if (obs.n() < 3) throw Error(ErrorKind::Precondition, "validity needs at least 3 observations, got " + std::to_string(obs.n()));
  ValidityConfig vc;
  vc.level = o.level;
  if (!o.no_bootstrap) vc.bootstrap = BootstrapConfig{o.b, o.seed, o.level, std::max(1u, o.threads)};
  ResultsArtifact a;
  auto in = inputs_from_observations(obs);
  a.models = in.models;
  a.datasets = in.datasets;
  a.pooled = in.pooled;
  ValiditySection sec;
  sec.report = validity_matrix(obs, vc);
  sec.level = vc.level;
  sec.bootstrap = vc.bootstrap;
  a.validity = std::move(sec);
  out << emit_table(a, TableKind::Validity, parse_table_format(o.format));
  return 0;
}

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  if (o.arithmetic + o.adversarial + o.robustness == 0) throw Error(ErrorKind::Usage, "all item counts are zero");
  SyntheticSpec spec{o.seed, o.arithmetic, o.adversarial, o.robustness};
  write_text(o.out, serialize_corpus(generate_synthetic(spec)), out);
  return 0;
}

int cmd_cache(const std::string& sub, const CacheOpts& o, std::ostream& out) {
  if (!fs::is_directory(o.dir)) throw Error(ErrorKind::Config, "cache directory not found: '" + o.dir + "'");
  ResponseCache cache(o.dir);
  if (sub == "stats") {
    auto s = cache.stats();
    out << "entries " << s.entries << "\nbytes " << s.bytes << "\ntemp_files " << s.temp_files << "\n";
    return 0;
  }
  if (sub == "verify") {
    auto r = cache.verify();
    out << "checked " << r.checked << "\ncorrupt " << r.corrupt.size() << "\n";
    for (const auto& [file, reason] : r.corrupt) out << "  " << file << ": " << reason << "\n";
    return r.corrupt.empty() ? 0 : 1;
  }
  out << "removed " << cache.gc() << "\n";
  return 0;
}

int cmd_assemble(const AssembleOpts& o, std::ostream& out) {
  require_file(o.observations, "observation file");
  auto obs = load_observations_csv(o.observations);
  std::optional<ObservationMatrix> pooled;
  if (!o.pooled.empty()) {
    require_file(o.pooled, "pooled observation file");
    pooled = load_observations_csv(o.pooled);
  }
  auto in = inputs_from_observations(obs, pooled);
  ValidityConfig vc;
  if (o.bootstrap > 0) vc.bootstrap = BootstrapConfig{o.bootstrap, o.seed, 0.95, 1};
  in.validity = vc;
  in.config.seed = o.seed;
  in.config.corpora = in.datasets;
  in.config.scorer.mode = "none";
  in.config.scorer.protocol_version = kScorerProtocolVersion;
  write_text(o.out, emit_results(assemble_artifact(in)), out);
  return 0;
}

int cmd_report(const ReportOpts& o, std::ostream& out) {
  require_file(o.artifact, "artifact");
  if (o.table.empty() == o.plot.empty()) throw Error(ErrorKind::Config, "give exactly one of --table or --plot");
  auto a = read_results(o.artifact);
  if (!o.table.empty()) {
    out << emit_table(a, parse_table_kind(o.table), parse_table_format(o.format));
  } else {
    out << canonical_dump(emit_plotdata(a, parse_plot_kind(o.plot))) << "\n";
  }
  return 0;
}

void setup_logging(bool verbose, bool quiet) {
  static auto logger = [] {
    auto l = spdlog::stderr_color_mt("reasonq");
    l->set_pattern("%^%l%$: %v");
    return l;
  }();
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-dimensional reasoning-quality evaluation"};
  app.name("reasonq");
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  EvaluateOpts eo;
  auto* ev = app.add_subcommand("evaluate", "Collect responses, score all six dimensions, write a results artifact");
  ev->add_option("--config", eo.config, "Key/value config file; command-line flags take precedence");
  ev->add_option("--corpus", eo.corpora, "Corpus JSONL file (repeatable)");
  ev->add_flag("--synthetic", eo.synthetic, "Also evaluate the generated synthetic corpus");
  ev->add_option("--models", eo.models, "Model ids")->delimiter(',');
  ev->add_option("--replay", eo.replay, "Recorded responses (JSONL)");
  ev->add_option("--endpoint", eo.endpoint, "Chat-completions URL for live collection");
  ev->add_option("--cache-dir", eo.cache_dir, "Response cache directory");
  ev->add_option("--scorer", eo.scorer, "baseline | subprocess:<command> | http://host:port");
  ev->add_option("--scenario", eo.scenarios, "Built-in scenario names (default: all seven)")->delimiter(',');
  ev->add_option("--weights", eo.weights, "Custom weight file, ranked alongside the scenarios");
  ev->add_option("--perturbations", eo.perturbations, "Variant file (JSONL {id, variants})");
  ev->add_option("--seed", eo.seed, "Seed for perturbations, synthesis and bootstrap");
  ev->add_option("--k", eo.k, "Runs per item")->check(CLI::Range(2, 64));
  ev->add_option("--p", eo.p, "Perturbations per item")->check(CLI::Range(1, 64));
  ev->add_option("--t-max", eo.t_max, "Token budget")->check(CLI::PositiveNumber);
  ev->add_option("--temperature", eo.temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
  ev->add_option("--concurrency", eo.concurrency, "Parallel requests")->check(CLI::Range(1, 256));
  ev->add_option("--bootstrap", eo.bootstrap, "Bootstrap resamples for the validity section (0: off)");
  ev->add_option("--rs-policy", eo.rs_policy, "error | renormalize, for models with undefined RS");
  ev->add_option("--out", eo.out, "Artifact path (default: stdout)");

  RankOpts ro;
  auto* rk = app.add_subcommand("rank", "Rank the models of an artifact under one scenario");
  rk->add_option("--artifact", ro.artifact, "Results artifact")->required();
  rk->add_option("--scenario", ro.scenario, "Built-in scenario name");
  rk->add_option("--weights", ro.weights, "Custom weight file");
  rk->add_option("--format", ro.format, "markdown | csv");

  ValidityOpts vo;
  auto* va = app.add_subcommand("validity", "Pairwise dimension correlations from an observation CSV");
  va->add_option("--observations", vo.observations, "CSV with model, dataset, cq..ss columns")->required();
  va->add_option("--b", vo.b, "Bootstrap resamples")->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));
  va->add_option("--seed", vo.seed, "Bootstrap seed");
  va->add_option("--level", vo.level, "Confidence level")->check(CLI::Range(0.5, 0.999));
  va->add_flag("--no-bootstrap", vo.no_bootstrap, "Fisher-z intervals only");
  va->add_option("--threads", vo.threads, "Bootstrap worker threads (output does not depend on it)");
  va->add_option("--format", vo.format, "markdown | csv");

  SynthOpts so;
  auto* sy = app.add_subcommand("synth", "Generate the synthetic stress corpus");
  sy->add_option("--seed", so.seed, "Generator seed");
  sy->add_option("--arithmetic", so.arithmetic, "Templated arithmetic items");
  sy->add_option("--adversarial", so.adversarial, "Contradictory-premise items");
  sy->add_option("--robustness", so.robustness, "Paraphrase-probe items");
  sy->add_option("--out", so.out, "Output JSONL (default: stdout)");

  CacheOpts co;
  auto* ca = app.add_subcommand("cache", "Inspect or repair a response cache");
  ca->require_subcommand(1);
  std::string cache_sub;
  for (const char* name : {"stats", "verify", "gc"}) {
    auto* s = ca->add_subcommand(name, std::string(name) == "stats"    ? "Entry count and size"
                                       : std::string(name) == "verify" ? "Check every entry's digest and hash"
                                                                       : "Remove temp files and corrupt entries");
    s->add_option("--dir", co.dir, "Cache directory")->required();
    s->callback([&cache_sub, name] { cache_sub = name; });
  }

  AssembleOpts ao;
  auto* as = app.add_subcommand("assemble", "Build an artifact from per-dataset dimension scores (CSV)");
  as->add_option("--observations", ao.observations, "Per-dataset CSV (model, dataset, cq..ss)")->required();
  as->add_option("--pooled", ao.pooled, "Pooled CSV (one row per model); default: mean of the dataset rows");
  as->add_option("--bootstrap", ao.bootstrap, "Bootstrap resamples for the validity section (0: off)");
  as->add_option("--seed", ao.seed, "Bootstrap seed");
  as->add_option("--out", ao.out, "Artifact path (default: stdout)");

  ReportOpts po;
  auto* rp = app.add_subcommand("report", "Render tables or plot data from an artifact");
  rp->add_option("--artifact", po.artifact, "Results artifact")->required();
  rp->add_option("--table", po.table, "overall | per_dataset | rankings | validity");
  rp->add_option("--plot", po.plot, "radar | bars | heatmap");
  rp->add_option("--format", po.format, "markdown | csv (tables)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  setup_logging(verbose, quiet);

  try {
    if (ev->parsed()) return cmd_evaluate(*ev, eo, out);
    if (rk->parsed()) return cmd_rank(ro, out);
    if (va->parsed()) return cmd_validity(vo, out);
    if (sy->parsed()) return cmd_synth(so, out);
    if (ca->parsed()) return cmd_cache(cache_sub, co, out);
    if (as->parsed()) return cmd_assemble(ao, out);
    if (rp->parsed()) return cmd_report(po, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return (e.kind() == ErrorKind::Usage || e.kind() == ErrorKind::Config) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace reasonq::cli
