#include "reasonq/pipeline.hpp"

#include "reasonq/error.hpp"
#include "reasonq/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace reasonq {

namespace {

struct Task {
  const EvalInstance* instance;
  std::size_t model;
};

struct Collected {
  RunSet runs;
  std::vector<ModelResponse> perturbed;
};

}  // namespace

ResultsArtifact evaluate(const EvaluateConfig& cfg, Provider& provider, Scorer& scorer, const ProgressFn& progress) {
  if (cfg.corpora.empty()) throw Error(ErrorKind::Config, "no corpora given");
  if (cfg.models.empty()) throw Error(ErrorKind::Config, "no models given");
  if (cfg.k < 2) throw Error(ErrorKind::Config, "K must be >= 2 (pairwise metrics are undefined for K=1)");
  if (cfg.p < 1) throw Error(ErrorKind::Config, "P must be >= 1");
  if (cfg.t_max < 1) throw Error(ErrorKind::Config, "t_max must be >= 1");
  if (std::set<std::string>(cfg.models.begin(), cfg.models.end()).size() != cfg.models.size()) {
    throw Error(ErrorKind::Config, "duplicate model id");
  }

  std::vector<Corpus> corpora;
  std::set<std::string> ids;
  for (const auto& c : cfg.corpora) {
    validate(c);
    Corpus prepared = c;
    if (prepared.p_count == 0) {
      prepared = attach_perturbations(std::move(prepared), BaselineSource{cfg.p, cfg.seed});
    } else if (prepared.p_count != cfg.p) {
      throw Error(ErrorKind::Config, "corpus '" + c.name + "' carries " + std::to_string(c.p_count) +
                                         " perturbations per item but P = " + std::to_string(cfg.p));
    }
    for (const auto& inst : prepared.instances) {
      if (!ids.insert(inst.id).second) {
        throw Error(ErrorKind::Validation, "instance id '" + inst.id + "' appears in more than one corpus");
      }
    }
    corpora.push_back(std::move(prepared));
  }

  std::vector<Task> tasks;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    for (const auto& c : corpora) {
      for (const auto& inst : c.instances) tasks.push_back({&inst, m});
    }
  }

  SamplingSettings sampling;
  sampling.temperature = cfg.temperature;
  sampling.max_new_tokens = cfg.t_max;
  sampling.seed_tag = static_cast<std::int64_t>(cfg.seed);

  std::vector<std::optional<Collected>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::mutex progress_mu;

  auto run_task = [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& model = cfg.models[task.model];
    try {
      Collected c;
      c.runs = collect_runs(*task.instance, model, cfg.k, provider, sampling, 1);
      for (const auto& variant : task.instance->perturbations) {
        GenRequest req;
        req.model_id = model;
        req.prompt = variant;
        req.temperature = cfg.temperature;
        req.max_new_tokens = cfg.t_max;
        req.run_index = 0;
        req.seed_tag = sampling.seed_tag;
        c.perturbed.push_back(provider.complete(req));
      }
      results[t] = std::move(c);
    } catch (...) {
      errors[t] = std::current_exception();
      failed = true;
    }
    const std::size_t n = ++done;
    if (progress) {
      std::lock_guard lock(progress_mu);
      progress(n, tasks.size());
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.concurrency, 1, std::max<std::size_t>(tasks.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks.size() && !failed; t = next++) run_task(t);
      });
    }
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (errors[t]) std::rethrow_exception(errors[t]);
  }
  if (failed) throw Error(ErrorKind::Transport, "collection aborted");

  // Metrics run single-threaded in task order so scorer calls and float
  // summation are identical for every concurrency level.
  ArtifactInputs in;
  in.models = cfg.models;
  in.scenarios = cfg.scenarios;
  in.rs_policy = cfg.rs_policy;
  in.validity = cfg.validity;
  in.config.k = cfg.k;
  in.config.p = cfg.p;
  in.config.t_max = cfg.t_max;
  in.config.temperature = cfg.temperature;
  in.config.seed = cfg.seed;
  in.config.scorer = cfg.scorer;
  for (const auto& c : corpora) in.config.corpora.push_back(c.name);

  std::vector<std::vector<InstanceOutcome>> pooled(cfg.models.size());
  std::vector<std::map<std::string, std::vector<InstanceOutcome>>> by_dataset(cfg.models.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const auto& col = *results[t];
    auto outcome = make_outcome(*task.instance, col.runs, col.perturbed);
    const std::string& ds = task.instance->dataset;
    if (std::find(in.datasets.begin(), in.datasets.end(), ds) == in.datasets.end()) in.datasets.push_back(ds);
    by_dataset[task.model][ds].push_back(outcome);
    pooled[task.model].push_back(std::move(outcome));
  }
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    const auto& model = cfg.models[m];
    in.pooled[model] = profile(pooled[m], scorer, cfg.t_max);
    for (const auto& [ds, outcomes] : by_dataset[m]) in.per_dataset[model][ds] = profile(outcomes, scorer, cfg.t_max);
  }

  auto artifact = assemble_artifact(in);
  std::size_t degenerate = 0;
  for (const auto& c : corpora) {
    for (const auto& inst : c.instances) degenerate += inst.degenerate_variants.size();
  }
  if (degenerate > 0) {
    artifact.notes.push_back(std::to_string(degenerate) +
                             " perturbation variants are identical to their prompt (no rewrite site)");
  }
  for (const auto& c : corpora) {
    artifact.notes.push_back("corpus " + c.name + ": " + std::to_string(c.instances.size()) +
                             " items, perturbations " + c.perturbation_source);
  }
  return artifact;
}

}  // namespace reasonq
