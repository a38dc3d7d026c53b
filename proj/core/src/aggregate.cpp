#include "reasonq/aggregate.hpp"

#include "reasonq/error.hpp"
#include "reasonq/kvconfig.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace reasonq {

void validate(const WeightVector& w, double tolerance) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.w.size(); ++i) {
    if (!std::isfinite(w.w[i]) || w.w[i] < 0.0) {
      throw Error(ErrorKind::Validation, "weight vector '" + w.name + "': " +
                                             to_string(kDimensions[i]) + " weight must be finite and >= 0");
    }
    sum += w.w[i];
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw Error(ErrorKind::Validation, "weight vector '" + w.name + "' sums to " + std::to_string(sum) + ", not 1");
  }
}

const std::vector<WeightVector>& builtin_scenarios() {
  static const std::vector<WeightVector> kScenarios = [] {
    const double sixth = 1.0 / 6.0;
    return std::vector<WeightVector>{
        {"balanced", "Balanced", {sixth, sixth, sixth, sixth, sixth, sixth}},
        {"safety_priority", "Safety Priority", {0.30, 0.20, 0.30, 0.10, 0.05, 0.05}},
        {"accuracy_priority", "Accuracy Priority", {0.40, 0.25, 0.15, 0.10, 0.05, 0.05}},
        {"efficiency_priority", "Efficiency Priority", {0.20, 0.15, 0.15, 0.10, 0.30, 0.10}},
        {"medical_triage", "Medical Triage", {0.40, 0.05, 0.30, 0.20, 0.03, 0.02}},
        {"legal_compliance", "Legal/Compliance", {0.15, 0.25, 0.20, 0.35, 0.03, 0.02}},
        {"edge_device", "Edge Device", {0.30, 0.03, 0.10, 0.05, 0.50, 0.02}},
    };
  }();
  return kScenarios;
}

std::optional<WeightVector> find_scenario(std::string_view name) {
  for (const auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& s : builtin_scenarios()) out.push_back(s.name);
  return out;
}

WeightVector parse_weight_text(std::string_view text, std::string_view origin) {
  auto cfg = KvConfig::parse(text, origin);
  WeightVector w;
  w.name = cfg.get_string("name").value_or("custom");
  w.label = cfg.get_string("label").value_or(w.name);
  for (auto d : kDimensions) {
    std::string key = to_string(d);
    for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto v = cfg.get_double(key);
    if (!v) throw Error(ErrorKind::Validation, std::string(origin) + ": missing weight '" + key + "'");
    w.w[static_cast<std::size_t>(d)] = *v;
  }
  for (const auto& key : cfg.keys()) {
    if (key == "name" || key == "label" || parse_dimension(key)) continue;
    throw Error(ErrorKind::Validation, std::string(origin) + ": unknown key '" + key + "'");
  }

  double sum = 0.0;
  for (double x : w.w) sum += x;
  validate(w, 1e-6);
  if (sum != 1.0) {
    if (std::abs(sum - 1.0) > 1e-9) {
      spdlog::warn("weight vector '{}' sums to {:.9f}; renormalizing", w.name, sum);
    }
    for (double& x : w.w) x /= sum;
  }
  return w;
}

WeightVector load_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open weight file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_weight_text(ss.str(), path.string());
}

CompositeScore composite(const DimensionVector& d, const WeightVector& w, RsPolicy policy) {
  validate(w, 1e-6);
  CompositeScore out;
  if (d.rs) {
    // Fixed summation order over dimensions.
    for (auto dim : kDimensions) out.q += w[dim] * *d.get(dim);
    return out;
  }
  if (policy == RsPolicy::Error) {
    throw Error(ErrorKind::Precondition,
                "RS is undefined (no correct instances); composite under '" + w.name + "' needs the renormalize policy");
  }
  const double remaining = 1.0 - w[Dimension::RS];
  if (remaining <= 0.0) {
    throw Error(ErrorKind::Precondition, "scenario '" + w.name + "' weights only RS, which is undefined");
  }
  for (auto dim : kDimensions) {
    if (dim == Dimension::RS) continue;
    out.q += (w[dim] / remaining) * *d.get(dim);
  }
  out.renormalized = true;
  return out;
}

ScenarioRanking rank(const std::map<std::string, DimensionVector>& profiles, const WeightVector& w, RsPolicy policy) {
  if (profiles.size() < 2) throw Error(ErrorKind::Precondition, "ranking needs at least 2 models");
  ScenarioRanking r;
  r.scenario = w.name;
  for (const auto& [id, vec] : profiles) {
    auto c = composite(vec, w, policy);
    r.entries.push_back({id, c.q, c.renormalized, false});
  }
  std::sort(r.entries.begin(), r.entries.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.q != b.q) return a.q > b.q;
    return a.model_id < b.model_id;
  });
  for (std::size_t i = 0; i + 1 < r.entries.size(); ++i) {
    if (r.entries[i].q == r.entries[i + 1].q) r.entries[i].tied = r.entries[i + 1].tied = true;
  }
  return r;
}

bool InversionReport::contains(std::string_view a, std::string_view b, std::string_view x, std::string_view y) const {
  for (const auto& p : pairs) {
    const bool same_scen = p.scenario_x == x && p.scenario_y == y;
    const bool swapped_scen = p.scenario_x == y && p.scenario_y == x;
    if (same_scen && p.model_a == a && p.model_b == b) return true;
    if (swapped_scen && p.model_a == b && p.model_b == a) return true;
  }
  return false;
}

InversionReport inversions(const std::vector<ScenarioRanking>& rankings) {
  if (rankings.size() < 2) throw Error(ErrorKind::Precondition, "inversion analysis needs at least 2 rankings");

  auto model_set = [](const ScenarioRanking& r) {
    std::set<std::string> s;
    for (const auto& e : r.entries) s.insert(e.model_id);
    return s;
  };
  const auto models = model_set(rankings.front());
  for (const auto& r : rankings) {
    if (model_set(r) != models || r.entries.size() != models.size()) {
      throw Error(ErrorKind::Validation, "ranking '" + r.scenario + "' covers a different model set");
    }
  }

  auto positions = [](const ScenarioRanking& r) {
    std::map<std::string, std::pair<std::size_t, double>> pos;
    for (std::size_t i = 0; i < r.entries.size(); ++i) pos[r.entries[i].model_id] = {i, r.entries[i].q};
    return pos;
  };

  InversionReport report;
  for (std::size_t x = 0; x < rankings.size(); ++x) {
    const auto px = positions(rankings[x]);
    for (std::size_t y = x + 1; y < rankings.size(); ++y) {
      const auto py = positions(rankings[y]);
      const auto& entries = rankings[x].entries;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
          const auto& a = entries[i].model_id;  // a ahead of b in x
          const auto& b = entries[j].model_id;
          if (py.at(b).first < py.at(a).first) {
            report.pairs.push_back({a, b, rankings[x].scenario, rankings[y].scenario, px.at(a).second - px.at(b).second,
                                    py.at(b).second - py.at(a).second});
          }
        }
      }
    }
  }
  return report;
}

}  // namespace reasonq
