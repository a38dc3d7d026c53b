#include "reasonq/report.hpp"

#include "reasonq/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace reasonq {

const char* const kObservationCaveat =
    "Rows are model x dataset cells; cells of one model share that model and are not independent "
    "observations, so p-values and intervals are optimistic.";

namespace {

const char* dim_key(Dimension d) {
  switch (d) {
    case Dimension::CQ: return "cq";
    case Dimension::CS: return "cs";
    case Dimension::RS: return "rs";
    case Dimension::LS: return "ls";
    case Dimension::ES: return "es";
    case Dimension::SS: return "ss";
  }
  return "?";
}

Json vector_json(const DimensionVector& d) {
  Json j = Json::object();
  for (auto dim : kDimensions) {
    auto v = d.get(dim);
    j[dim_key(dim)] = v ? Json(*v) : Json(nullptr);
  }
  return j;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::Parse, "artifact: " + what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad(std::string("missing field '") + key + "'");
  return j.at(key);
}

double num(const Json& j, const char* what) {
  if (!j.is_number()) bad(std::string("'") + what + "' must be a number");
  return j.get<double>();
}

std::string str(const Json& j, const char* what) {
  if (!j.is_string()) bad(std::string("'") + what + "' must be a string");
  return j.get<std::string>();
}

std::vector<std::string> str_list(const Json& j, const char* what) {
  if (!j.is_array()) bad(std::string("'") + what + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(str(e, what));
  return out;
}

DimensionVector vector_from(const Json& j) {
  DimensionVector d;
  d.cq = num(field(j, "cq"), "cq");
  d.cs = num(field(j, "cs"), "cs");
  const Json& rs = field(j, "rs");
  if (!rs.is_null()) d.rs = num(rs, "rs");
  d.ls = num(field(j, "ls"), "ls");
  d.es = num(field(j, "es"), "es");
  d.ss = num(field(j, "ss"), "ss");
  return d;
}

Dimension dim_from(const Json& j) {
  auto d = parse_dimension(str(j, "dimension"));
  if (!d) bad("unknown dimension '" + j.get<std::string>() + "'");
  return *d;
}

Json interval_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

Interval interval_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) bad("interval must be a 2-element array");
  return {num(j[0], "interval"), num(j[1], "interval")};
}

Category category_from(const std::string& s) {
  for (auto c : {Category::Independent, Category::Weak, Category::Moderate, Category::Structural}) {
    if (s == to_string(c)) return c;
  }
  bad("unknown category '" + s + "'");
}

bool all_finite(const Json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& e : j) {
      if (!all_finite(e)) return false;
    }
  }
  return true;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt3(*v) : "n/a"; }

std::string fmt_p(double p) {
  if (p < 0.001) return "<0.001";
  return fmt3(p);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                   TableFormat format, const std::vector<std::string>& footer = {}) {
  std::ostringstream out;
  if (format == TableFormat::Csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i]);
      out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    for (const auto& f : footer) out << "# " << f << "\n";
    return out.str();
  }
  auto line = [&](const std::vector<std::string>& cells) {
    out << "|";
    for (const auto& c : cells) out << " " << c << " |";
    out << "\n";
  };
  line(header);
  out << "|";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? " --- |" : " ---: |");
  out << "\n";
  for (const auto& r : rows) line(r);
  if (!footer.empty()) {
    out << "\n";
    for (const auto& f : footer) out << f << "\n";
  }
  return out.str();
}

const ScenarioRanking* find_ranking(const ResultsArtifact& a, std::string_view name) {
  for (const auto& r : a.rankings) {
    if (r.scenario == name) return &r;
  }
  return nullptr;
}

std::optional<double> score_of(const ResultsArtifact& a, std::string_view scenario, std::string_view model) {
  const auto* r = find_ranking(a, scenario);
  if (!r) return std::nullopt;
  for (const auto& e : r->entries) {
    if (e.model_id == model) return e.q;
  }
  return std::nullopt;
}

void require_content(const ResultsArtifact& a) {
  if (a.models.empty() || a.pooled.empty()) throw Error(ErrorKind::Validation, "artifact has no model results");
}

}  // namespace

Json to_json(const ResultsArtifact& a) {
  Json j = Json::object();
  j["schema_version"] = a.schema_version;

  Json cfg = Json::object();
  cfg["k"] = a.config.k;
  cfg["p"] = a.config.p;
  cfg["t_max"] = a.config.t_max;
  cfg["temperature"] = a.config.temperature;
  cfg["seed"] = a.config.seed;
  cfg["rs_policy"] = a.config.rs_policy;
  cfg["corpora"] = a.config.corpora;
  cfg["scorer"] = {{"mode", a.config.scorer.mode},
                   {"address", a.config.scorer.address},
                   {"model", a.config.scorer.model},
                   {"protocol_version", a.config.scorer.protocol_version}};
  j["config"] = cfg;

  j["models"] = a.models;
  j["datasets"] = a.datasets;

  Json pooled = Json::object();
  for (const auto& [m, d] : a.pooled) pooled[m] = vector_json(d);
  j["pooled"] = pooled;

  Json per = Json::object();
  for (const auto& [m, by_ds] : a.per_dataset) {
    Json inner = Json::object();
    for (const auto& [ds, d] : by_ds) inner[ds] = vector_json(d);
    per[m] = inner;
  }
  j["per_dataset"] = per;

  Json scen = Json::array();
  for (const auto& w : a.scenarios) {
    Json weights = Json::object();
    for (auto d : kDimensions) weights[dim_key(d)] = w[d];
    scen.push_back({{"name", w.name}, {"label", w.label}, {"weights", weights}});
  }
  j["scenarios"] = scen;

  Json ranks = Json::array();
  for (const auto& r : a.rankings) {
    Json entries = Json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"model", e.model_id}, {"q", e.q}, {"renormalized", e.renormalized}, {"tied", e.tied}});
    }
    ranks.push_back({{"scenario", r.scenario}, {"entries", entries}});
  }
  j["rankings"] = ranks;

  Json inv = Json::array();
  for (const auto& p : a.inversions.pairs) {
    inv.push_back({{"model_a", p.model_a},
                   {"model_b", p.model_b},
                   {"scenario_x", p.scenario_x},
                   {"scenario_y", p.scenario_y},
                   {"gap_x", p.gap_x},
                   {"gap_y", p.gap_y}});
  }
  j["inversions"] = inv;

  if (a.validity) {
    const auto& v = *a.validity;
    Json recs = Json::array();
    for (const auto& r : v.report.records) {
      Json rec = {{"pair", {to_string(r.pair.first), to_string(r.pair.second)}},
                  {"r", r.r},
                  {"p", r.p},
                  {"exact_fit", r.exact_fit},
                  {"ci", interval_json(r.ci)},
                  {"n", r.n},
                  {"category", to_string(r.category)}};
      if (r.bootstrap) {
        rec["bootstrap"] = {{"ci", interval_json(r.bootstrap->ci)},
                            {"redraws", r.bootstrap->redraws},
                            {"degenerate", r.bootstrap->degenerate}};
      } else {
        rec["bootstrap"] = nullptr;
      }
      recs.push_back(rec);
    }
    Json partials = Json::array();
    for (const auto& p : v.report.partials) {
      partials.push_back({{"pair", {to_string(p.pair.first), to_string(p.pair.second)}},
                          {"control", to_string(p.control)},
                          {"r", p.r}});
    }
    const auto& s = v.report.summary;
    Json boot = nullptr;
    if (v.bootstrap) boot = {{"b", v.bootstrap->b}, {"seed", v.bootstrap->seed}};
    j["validity"] = {{"n", v.report.n},
                     {"level", v.level},
                     {"bootstrap", boot},
                     {"records", recs},
                     {"partials", partials},
                     {"summary",
                      {{"independent", s.independent},
                       {"weak", s.weak},
                       {"moderate", s.moderate},
                       {"structural", s.structural},
                       {"below_050", s.below_050}}},
                     {"caveat", kObservationCaveat}};
  } else {
    j["validity"] = nullptr;
  }
  j["notes"] = a.notes;
  return j;
}

ResultsArtifact artifact_from_json(const Json& j) {
  if (!j.is_object()) bad("top level must be an object");
  ResultsArtifact a;
  const Json& ver = field(j, "schema_version");
  if (!ver.is_number_integer()) bad("'schema_version' must be an integer");
  a.schema_version = ver.get<int>();
  if (a.schema_version != kArtifactSchemaVersion) {
    throw Error(ErrorKind::VersionMismatch, "artifact schema_version " + std::to_string(a.schema_version) +
                                                " is not supported (expected " +
                                                std::to_string(kArtifactSchemaVersion) + ")");
  }

  const Json& cfg = field(j, "config");
  a.config.k = field(cfg, "k").get<std::size_t>();
  a.config.p = field(cfg, "p").get<std::size_t>();
  a.config.t_max = field(cfg, "t_max").get<std::int64_t>();
  a.config.temperature = num(field(cfg, "temperature"), "temperature");
  a.config.seed = field(cfg, "seed").get<std::uint64_t>();
  a.config.rs_policy = str(field(cfg, "rs_policy"), "rs_policy");
  a.config.corpora = str_list(field(cfg, "corpora"), "corpora");
  const Json& sc = field(cfg, "scorer");
  a.config.scorer.mode = str(field(sc, "mode"), "scorer.mode");
  a.config.scorer.address = str(field(sc, "address"), "scorer.address");
  a.config.scorer.model = str(field(sc, "model"), "scorer.model");
  a.config.scorer.protocol_version = field(sc, "protocol_version").get<int>();

  a.models = str_list(field(j, "models"), "models");
  a.datasets = str_list(field(j, "datasets"), "datasets");
  for (const auto& [m, d] : field(j, "pooled").items()) a.pooled[m] = vector_from(d);
  for (const auto& [m, by_ds] : field(j, "per_dataset").items()) {
    auto& inner = a.per_dataset[m];
    for (const auto& [ds, d] : by_ds.items()) inner[ds] = vector_from(d);
  }

  for (const auto& s : field(j, "scenarios")) {
    WeightVector w;
    w.name = str(field(s, "name"), "scenario.name");
    w.label = str(field(s, "label"), "scenario.label");
    const Json& weights = field(s, "weights");
    for (auto d : kDimensions) w.w[static_cast<std::size_t>(d)] = num(field(weights, dim_key(d)), dim_key(d));
    a.scenarios.push_back(std::move(w));
  }
  for (const auto& r : field(j, "rankings")) {
    ScenarioRanking sr;
    sr.scenario = str(field(r, "scenario"), "ranking.scenario");
    for (const auto& e : field(r, "entries")) {
      sr.entries.push_back({str(field(e, "model"), "entry.model"), num(field(e, "q"), "entry.q"),
                            field(e, "renormalized").get<bool>(), field(e, "tied").get<bool>()});
    }
    a.rankings.push_back(std::move(sr));
  }
  for (const auto& p : field(j, "inversions")) {
    a.inversions.pairs.push_back({str(field(p, "model_a"), "model_a"), str(field(p, "model_b"), "model_b"),
                                  str(field(p, "scenario_x"), "scenario_x"), str(field(p, "scenario_y"), "scenario_y"),
                                  num(field(p, "gap_x"), "gap_x"), num(field(p, "gap_y"), "gap_y")});
  }

  const Json& v = field(j, "validity");
  if (!v.is_null()) {
    ValiditySection sec;
    sec.report.n = field(v, "n").get<std::size_t>();
    sec.level = num(field(v, "level"), "level");
    const Json& boot = field(v, "bootstrap");
    if (!boot.is_null()) {
      BootstrapConfig bc;
      bc.b = field(boot, "b").get<std::size_t>();
      bc.seed = field(boot, "seed").get<std::uint64_t>();
      bc.level = sec.level;
      sec.bootstrap = bc;
    }
    for (const auto& r : field(v, "records")) {
      CorrelationRecord rec;
      const Json& pair = field(r, "pair");
      if (!pair.is_array() || pair.size() != 2) bad("record pair must have 2 dimensions");
      rec.pair = make_pair(dim_from(pair[0]), dim_from(pair[1]));
      rec.r = num(field(r, "r"), "r");
      rec.p = num(field(r, "p"), "p");
      rec.exact_fit = field(r, "exact_fit").get<bool>();
      rec.ci = interval_from(field(r, "ci"));
      rec.n = field(r, "n").get<std::size_t>();
      rec.category = category_from(str(field(r, "category"), "category"));
      const Json& b = field(r, "bootstrap");
      if (!b.is_null()) {
        rec.bootstrap = BootstrapResult{interval_from(field(b, "ci")), field(b, "redraws").get<std::size_t>(),
                                        field(b, "degenerate").get<bool>()};
      }
      sec.report.records.push_back(std::move(rec));
    }
    for (const auto& p : field(v, "partials")) {
      const Json& pair = field(p, "pair");
      if (!pair.is_array() || pair.size() != 2) bad("partial pair must have 2 dimensions");
      sec.report.partials.push_back(
          {make_pair(dim_from(pair[0]), dim_from(pair[1])), dim_from(field(p, "control")), num(field(p, "r"), "r")});
    }
    const Json& s = field(v, "summary");
    sec.report.summary = {field(s, "independent").get<std::size_t>(), field(s, "weak").get<std::size_t>(),
                          field(s, "moderate").get<std::size_t>(), field(s, "structural").get<std::size_t>(),
                          field(s, "below_050").get<std::size_t>()};
    a.validity = std::move(sec);
  }
  a.notes = str_list(field(j, "notes"), "notes");
  validate(a);
  return a;
}

void validate(const ResultsArtifact& a) {
  if (a.schema_version != kArtifactSchemaVersion) {
    throw Error(ErrorKind::Validation, "unsupported schema_version " + std::to_string(a.schema_version));
  }
  if (!all_finite(to_json(a))) throw Error(ErrorKind::Validation, "artifact contains a non-finite number");

  const std::set<std::string> models(a.models.begin(), a.models.end());
  if (models.size() != a.models.size()) throw Error(ErrorKind::Validation, "duplicate model in artifact");
  for (const auto& [m, _] : a.pooled) {
    if (!models.contains(m)) throw Error(ErrorKind::Validation, "pooled vector for unlisted model '" + m + "'");
  }
  for (const auto& m : a.models) {
    if (!a.pooled.contains(m)) throw Error(ErrorKind::Validation, "model '" + m + "' has no pooled vector");
  }
  const std::set<std::string> datasets(a.datasets.begin(), a.datasets.end());
  for (const auto& [m, by_ds] : a.per_dataset) {
    if (!models.contains(m)) throw Error(ErrorKind::Validation, "per-dataset vectors for unlisted model '" + m + "'");
    for (const auto& [ds, _] : by_ds) {
      if (!datasets.contains(ds)) throw Error(ErrorKind::Validation, "unlisted dataset '" + ds + "'");
    }
  }

  std::set<std::string> scenarios;
  for (const auto& w : a.scenarios) {
    if (!scenarios.insert(w.name).second) throw Error(ErrorKind::Validation, "duplicate scenario '" + w.name + "'");
    validate(w, 1e-6);
  }
  for (const auto& r : a.rankings) {
    if (!scenarios.contains(r.scenario)) {
      throw Error(ErrorKind::Validation, "ranking references unknown scenario '" + r.scenario + "'");
    }
    for (const auto& e : r.entries) {
      if (!models.contains(e.model_id)) {
        throw Error(ErrorKind::Validation, "ranking '" + r.scenario + "' references unknown model '" + e.model_id + "'");
      }
    }
  }
  for (const auto& p : a.inversions.pairs) {
    if (!scenarios.contains(p.scenario_x) || !scenarios.contains(p.scenario_y)) {
      throw Error(ErrorKind::Validation, "inversion references an unknown scenario");
    }
    if (!models.contains(p.model_a) || !models.contains(p.model_b)) {
      throw Error(ErrorKind::Validation, "inversion references an unknown model");
    }
  }
}

std::string emit_results(const ResultsArtifact& a) {
  validate(a);
  return canonical_dump(to_json(a)) + "\n";
}

void write_results(const ResultsArtifact& a, const std::filesystem::path& path) {
  const std::string bytes = emit_results(a);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << bytes;
  if (!out.flush()) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

ResultsArtifact read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open artifact '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  try {
    return artifact_from_json(j);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

TableKind parse_table_kind(std::string_view name) {
  if (name == "overall") return TableKind::Overall;
  if (name == "per_dataset") return TableKind::PerDataset;
  if (name == "rankings") return TableKind::Rankings;
  if (name == "validity") return TableKind::Validity;
  throw Error(ErrorKind::Usage,
              "unknown table '" + std::string(name) + "' (expected overall, per_dataset, rankings or validity)");
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "markdown" || name == "md") return TableFormat::Markdown;
  if (name == "csv") return TableFormat::Csv;
  throw Error(ErrorKind::Usage, "unknown table format '" + std::string(name) + "' (expected markdown or csv)");
}

PlotKind parse_plot_kind(std::string_view name) {
  if (name == "radar") return PlotKind::Radar;
  if (name == "bars") return PlotKind::Bars;
  if (name == "heatmap") return PlotKind::Heatmap;
  throw Error(ErrorKind::Usage, "unknown plot kind '" + std::string(name) + "' (expected radar, bars or heatmap)");
}

std::string emit_table(const ResultsArtifact& a, TableKind which, TableFormat format) {
  require_content(a);
  const std::vector<std::string> dims = {"CQ", "CS", "RS", "LS", "ES", "SS"};
  auto dim_cells = [](const DimensionVector& d) {
    return std::vector<std::string>{fmt3(d.cq), fmt3(d.cs), fmt_opt(d.rs), fmt3(d.ls), fmt3(d.es), fmt3(d.ss)};
  };

  switch (which) {
    case TableKind::Overall: {
      static const std::vector<std::pair<const char*, const char*>> kCols = {{"balanced", "Q_bal"},
                                                                             {"safety_priority", "Q_saf"},
                                                                             {"accuracy_priority", "Q_acc"},
                                                                             {"efficiency_priority", "Q_eff"}};
      std::vector<std::string> header = {"Model"};
      header.insert(header.end(), dims.begin(), dims.end());
      for (const auto& [_, label] : kCols) header.push_back(label);
      std::vector<std::vector<std::string>> rows;
      for (const auto& m : a.models) {
        std::vector<std::string> row = {m};
        auto cells = dim_cells(a.pooled.at(m));
        row.insert(row.end(), cells.begin(), cells.end());
        for (const auto& [scen, _] : kCols) row.push_back(fmt_opt(score_of(a, scen, m)));
        rows.push_back(std::move(row));
      }
      return render(header, rows, format);
    }
    case TableKind::PerDataset: {
      if (a.per_dataset.empty()) throw Error(ErrorKind::Validation, "artifact has no per-dataset vectors");
      std::vector<std::string> header = {"Model", "Dataset"};
      header.insert(header.end(), dims.begin(), dims.end());
      header.push_back("Q_bal");
      const auto bal = *find_scenario("balanced");
      std::vector<std::vector<std::string>> rows;
      for (const auto& m : a.models) {
        auto it = a.per_dataset.find(m);
        if (it == a.per_dataset.end()) continue;
        for (const auto& ds : a.datasets) {
          auto jt = it->second.find(ds);
          if (jt == it->second.end()) continue;
          std::vector<std::string> row = {m, ds};
          auto cells = dim_cells(jt->second);
          row.insert(row.end(), cells.begin(), cells.end());
          std::optional<double> q;
          if (jt->second.rs) q = composite(jt->second, bal).q;
          row.push_back(fmt_opt(q));
          rows.push_back(std::move(row));
        }
      }
      return render(header, rows, format);
    }
    case TableKind::Rankings: {
      if (a.rankings.empty()) throw Error(ErrorKind::Validation, "artifact has no rankings");
      std::vector<std::string> header = {"Scenario"};
      for (std::size_t i = 1; i <= a.models.size(); ++i) header.push_back("#" + std::to_string(i));
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : a.rankings) {
        std::string label = r.scenario;
        for (const auto& w : a.scenarios) {
          if (w.name == r.scenario) label = w.label;
        }
        std::vector<std::string> row = {label};
        for (const auto& e : r.entries) row.push_back(e.model_id + (e.tied ? " (tie)" : ""));
        rows.push_back(std::move(row));
      }
      return render(header, rows, format);
    }
    case TableKind::Validity: {
      if (!a.validity) throw Error(ErrorKind::Validation, "artifact has no validity section");
      const auto& v = *a.validity;
      const bool boot = v.bootstrap.has_value();
      std::vector<std::string> header = {"Pair", "r", "p", "CI low", "CI high"};
      if (boot) {
        header.push_back("Boot low");
        header.push_back("Boot high");
      }
      header.push_back("Category");
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : v.report.records) {
        std::vector<std::string> row = {pair_label(r.pair), fmt3(r.r), fmt_p(r.p), fmt3(r.ci.lo), fmt3(r.ci.hi)};
        if (boot) {
          row.push_back(r.bootstrap ? fmt3(r.bootstrap->ci.lo) : "n/a");
          row.push_back(r.bootstrap ? fmt3(r.bootstrap->ci.hi) : "n/a");
        }
        row.push_back(to_string(r.category));
        rows.push_back(std::move(row));
      }
      const auto& s = v.report.summary;
      std::vector<std::string> footer = {
          "n = " + std::to_string(v.report.n) + "; independent " + std::to_string(s.independent) + ", weak " +
          std::to_string(s.weak) + ", moderate " + std::to_string(s.moderate) + ", structural " +
          std::to_string(s.structural) + "; |r| < 0.50: " + std::to_string(s.below_050) + " of " +
          std::to_string(v.report.records.size())};
      for (const auto& p : v.report.partials) {
        footer.push_back("partial r(" + pair_label(p.pair) + " | " + to_string(p.control) + ") = " + fmt3(p.r));
      }
      footer.push_back(kObservationCaveat);
      return render(header, rows, format, footer);
    }
  }
  throw Error(ErrorKind::Usage, "unknown table kind");
}

Json emit_plotdata(const ResultsArtifact& a, PlotKind kind) {
  require_content(a);
  Json axes = Json::array();
  for (auto d : kDimensions) axes.push_back(to_string(d));

  switch (kind) {
    case PlotKind::Radar: {
      Json series = Json::array();
      for (const auto& m : a.models) {
        Json values = Json::array();
        for (auto d : kDimensions) {
          auto v = a.pooled.at(m).get(d);
          values.push_back(v ? Json(*v) : Json(nullptr));
        }
        series.push_back({{"model", m}, {"values", values}});
      }
      return {{"kind", "radar"}, {"axes", axes}, {"series", series}};
    }
    case PlotKind::Bars: {
      Json groups = Json::array();
      for (auto d : kDimensions) {
        Json bars = Json::array();
        for (const auto& m : a.models) {
          auto v = a.pooled.at(m).get(d);
          bars.push_back({{"model", m}, {"value", v ? Json(*v) : Json(nullptr)}});
        }
        groups.push_back({{"metric", to_string(d)}, {"bars", bars}});
      }
      return {{"kind", "bars"}, {"models", a.models}, {"groups", groups}};
    }
    case PlotKind::Heatmap: {
      if (!a.validity) throw Error(ErrorKind::Validation, "heatmap needs a validity section");
      std::array<std::array<double, 6>, 6> m{};
      for (std::size_t i = 0; i < 6; ++i) m[i][i] = 1.0;
      for (const auto& r : a.validity->report.records) {
        const auto i = static_cast<std::size_t>(r.pair.first);
        const auto k = static_cast<std::size_t>(r.pair.second);
        m[i][k] = m[k][i] = r.r;
      }
      Json matrix = Json::array();
      for (const auto& row : m) matrix.push_back(Json(std::vector<double>(row.begin(), row.end())));
      return {{"kind", "heatmap"}, {"axes", axes}, {"matrix", matrix}, {"n", a.validity->report.n}};
    }
  }
  throw Error(ErrorKind::Usage, "unknown plot kind");
}

ResultsArtifact assemble_artifact(const ArtifactInputs& in) {
  ResultsArtifact a;
  a.config = in.config;
  a.config.rs_policy = in.rs_policy == RsPolicy::Error ? "error" : "renormalize";
  a.models = in.models;
  a.datasets = in.datasets;
  a.pooled = in.pooled;
  a.per_dataset = in.per_dataset;
  a.scenarios = in.scenarios.empty() ? builtin_scenarios() : in.scenarios;

  if (a.models.size() >= 2) {
    for (const auto& w : a.scenarios) a.rankings.push_back(rank(a.pooled, w, in.rs_policy));
    if (a.rankings.size() >= 2) a.inversions = inversions(a.rankings);
  } else {
    a.notes.push_back("rankings skipped: fewer than 2 models");
  }
  for (const auto& [m, d] : a.pooled) {
    if (!d.rs) a.notes.push_back("RS undefined for " + m + " (no correct instances)");
  }

  if (in.validity) {
    ObservationMatrix obs;
    for (const auto& m : a.models) {
      auto it = a.per_dataset.find(m);
      if (it == a.per_dataset.end()) continue;
      for (const auto& ds : a.datasets) {
        auto jt = it->second.find(ds);
        if (jt != it->second.end()) obs.rows.push_back({m, ds, jt->second});
      }
    }
    const bool rs_complete =
        std::all_of(obs.rows.begin(), obs.rows.end(), [](const Observation& o) { return o.d.rs.has_value(); });
    if (obs.n() < 3) {
      a.notes.push_back("validity skipped: " + std::to_string(obs.n()) + " model x dataset rows (need at least 3)");
    } else if (!rs_complete) {
      a.notes.push_back("validity skipped: RS undefined in some model x dataset rows");
    } else {
      try {
        ValiditySection sec;
        sec.report = validity_matrix(obs, *in.validity);
        sec.level = in.validity->level;
        sec.bootstrap = in.validity->bootstrap;
        a.validity = std::move(sec);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate) throw;
        a.notes.push_back(std::string("validity skipped: ") + e.what());
      }
    }
  }
  validate(a);
  return a;
}

ArtifactInputs inputs_from_observations(const ObservationMatrix& per_dataset,
                                        const std::optional<ObservationMatrix>& pooled) {
  ArtifactInputs in;
  auto note_order = [](std::vector<std::string>& order, const std::string& v) {
    if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
  };
  for (const auto& o : per_dataset.rows) {
    note_order(in.models, o.model_id);
    note_order(in.datasets, o.dataset);
    auto [_, fresh] = in.per_dataset[o.model_id].emplace(o.dataset, o.d);
    if (!fresh) throw Error(ErrorKind::Validation, "duplicate row " + o.model_id + "/" + o.dataset);
  }
  if (pooled) {
    for (const auto& o : pooled->rows) {
      if (!in.per_dataset.empty() && !in.per_dataset.contains(o.model_id)) {
        throw Error(ErrorKind::Validation, "pooled row for model '" + o.model_id + "' has no per-dataset rows");
      }
      note_order(in.models, o.model_id);
      in.pooled[o.model_id] = o.d;
    }
    for (const auto& m : in.models) {
      if (!in.pooled.contains(m)) throw Error(ErrorKind::Validation, "model '" + m + "' has no pooled row");
    }
  } else {
    for (const auto& m : in.models) {
      const auto& rows = in.per_dataset.at(m);
      DimensionVector mean;
      double rs_sum = 0.0;
      std::size_t rs_n = 0;
      for (const auto& [ds, d] : rows) {
        mean.cq += d.cq;
        mean.cs += d.cs;
        mean.ls += d.ls;
        mean.es += d.es;
        mean.ss += d.ss;
        if (d.rs) {
          rs_sum += *d.rs;
          ++rs_n;
        }
      }
      const double n = static_cast<double>(rows.size());
      mean.cq /= n;
      mean.cs /= n;
      mean.ls /= n;
      mean.es /= n;
      mean.ss /= n;
      if (rs_n > 0) mean.rs = rs_sum / static_cast<double>(rs_n);
      in.pooled[m] = mean;
    }
  }
  return in;
}

}  // namespace reasonq
