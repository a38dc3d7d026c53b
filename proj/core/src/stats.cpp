#include "reasonq/stats.hpp"

#include "reasonq/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "reasonq/rng.hpp"

namespace reasonq {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// RFC 4180 style fields: quotes around a field allow commas, "" is a quote.
std::vector<std::string> split_csv_line(std::string_view line, std::string_view origin, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw Error(ErrorKind::Parse, std::string(origin) + ":" + std::to_string(lineno) + ": unterminated quote");
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& s, std::string_view origin, std::size_t lineno, std::string_view col) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::Parse, std::string(origin) + ":" + std::to_string(lineno) + ": column '" +
                                      std::string(col) + "' is not a number: '" + s + "'");
  }
  return v;
}

void require_variance(std::span<const double> v, std::string_view what) {
  for (double x : v) {
    if (x != v.front()) return;
  }
  throw Error(ErrorKind::Degenerate, std::string(what) + " has zero variance");
}

double pearson_unchecked(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  double r = sxy / std::sqrt(sxx * syy);
  if (std::abs(std::abs(r) - 1.0) < 1e-12) r = r > 0 ? 1.0 : -1.0;
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace

std::vector<double> ObservationMatrix::column(Dimension d) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    auto v = row.d.get(d);
    if (!v) {
      throw Error(ErrorKind::Precondition,
                  std::string(to_string(d)) + " is absent for " + row.model_id + "/" + row.dataset);
    }
    out.push_back(*v);
  }
  return out;
}

ObservationMatrix parse_observations_csv(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> col;
  ObservationMatrix m;
  static const char* kRequired[] = {"model", "dataset", "cq", "cs", "rs", "ls", "es", "ss"};
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto fields = split_csv_line(line, origin, lineno);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col.emplace(lower(fields[i]), i);
      for (const char* name : kRequired) {
        if (!col.contains(name)) {
          throw Error(ErrorKind::Parse, std::string(origin) + ": header lacks column '" + name + "'");
        }
      }
      continue;
    }
    auto field = [&](const char* name) -> const std::string& {
      std::size_t i = col.at(name);
      if (i >= fields.size()) {
        throw Error(ErrorKind::Parse, std::string(origin) + ":" + std::to_string(lineno) + ": missing column '" + name + "'");
      }
      return fields[i];
    };
    Observation o;
    o.model_id = field("model");
    o.dataset = field("dataset");
    o.d.cq = parse_number(field("cq"), origin, lineno, "cq");
    o.d.cs = parse_number(field("cs"), origin, lineno, "cs");
    if (!field("rs").empty()) o.d.rs = parse_number(field("rs"), origin, lineno, "rs");
    o.d.ls = parse_number(field("ls"), origin, lineno, "ls");
    o.d.es = parse_number(field("es"), origin, lineno, "es");
    o.d.ss = parse_number(field("ss"), origin, lineno, "ss");
    m.rows.push_back(std::move(o));
  }
  if (col.empty()) throw Error(ErrorKind::Parse, std::string(origin) + ": empty observation file");
  return m;
}

ObservationMatrix load_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open observation file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_observations_csv(ss.str(), path.string());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::Precondition, "pearson: columns differ in length");
  if (x.size() < 3) throw Error(ErrorKind::Precondition, "pearson needs n >= 3 observations");
  require_variance(x, "first column");
  require_variance(y, "second column");
  return pearson_unchecked(x, y);
}

PValue p_value(double r, std::size_t n) {
  if (n < 3) throw Error(ErrorKind::Precondition, "p-value needs n >= 3");
  if (!(std::abs(r) <= 1.0)) throw Error(ErrorKind::Precondition, "correlation outside [-1, 1]");
  if (std::abs(r) == 1.0) return {0.0, true};
  if (r == 0.0) return {1.0, false};
  // Two-sided tail of t = r sqrt(df / (1 - r^2)) is I_x(df/2, 1/2) with
  // x = df / (df + t^2) = 1 - r^2.
  const double df = static_cast<double>(n - 2);
  const double x = 1.0 - r * r;
  return {boost::math::ibeta(df / 2.0, 0.5, x), false};
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Precondition, "normal quantile needs 0 < p < 1");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval fisher_ci(double r, std::size_t n, double level) {
  if (n < 4) throw Error(ErrorKind::Precondition, "Fisher interval needs n >= 4");
  if (!(std::abs(r) < 1.0)) throw Error(ErrorKind::Precondition, "Fisher interval undefined for |r| = 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Precondition, "confidence level must be in (0, 1)");
  const double z = std::atanh(r);
  const double half = normal_quantile(0.5 + level / 2.0) / std::sqrt(static_cast<double>(n - 3));
  return {std::tanh(z - half), std::tanh(z + half)};
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::Precondition, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(std::span<const std::pair<double, double>> pairs, const BootstrapConfig& cfg) {
  const std::size_t n = pairs.size();
  if (n < 3) throw Error(ErrorKind::Precondition, "bootstrap needs n >= 3 observations");
  if (cfg.b < 100) throw Error(ErrorKind::Precondition, "bootstrap needs B >= 100 resamples");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw Error(ErrorKind::Precondition, "confidence level must be in (0, 1)");
  {
    std::vector<double> x, y;
    for (const auto& [a, b] : pairs) {
      x.push_back(a);
      y.push_back(b);
    }
    require_variance(x, "first column");
    require_variance(y, "second column");
  }

  const std::size_t max_redraws = cfg.b / 10;
  std::vector<double> rs(cfg.b);
  std::vector<std::size_t> redraws(cfg.b, 0);
  std::atomic<std::size_t> total_redraws{0};
  std::atomic<bool> exhausted{false};

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = begin; i < end && !exhausted.load(std::memory_order_relaxed); ++i) {
      for (std::uint64_t attempt = 0;; ++attempt) {
        SplitMix64 rng(derive_seed(cfg.seed, i, attempt));
        for (std::size_t k = 0; k < n; ++k) {
          const auto& row = pairs[static_cast<std::size_t>(rng.below(n))];
          x[k] = row.first;
          y[k] = row.second;
        }
        const bool flat = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
                          std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
        if (!flat) {
          rs[i] = pearson_unchecked(x, y);
          break;
        }
        ++redraws[i];
        if (total_redraws.fetch_add(1) + 1 > max_redraws) {
          exhausted = true;
          return;
        }
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.b)));
  if (threads == 1) {
    work(0, cfg.b);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cfg.b + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(cfg.b, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  if (exhausted) {
    throw Error(ErrorKind::Degenerate, "bootstrap: more than B/10 zero-variance resamples (" +
                                           std::to_string(max_redraws) + " allowed)");
  }

  std::sort(rs.begin(), rs.end());
  BootstrapResult out;
  const double alpha = 1.0 - cfg.level;
  out.ci = {quantile_sorted(rs, alpha / 2.0), quantile_sorted(rs, 1.0 - alpha / 2.0)};
  for (auto c : redraws) out.redraws += c;
  out.degenerate = out.ci.lo == out.ci.hi;
  return out;
}

double partial_correlation(double r_xy, double r_xz, double r_yz) {
  if (!(std::abs(r_xz) < 1.0) || !(std::abs(r_yz) < 1.0)) {
    throw Error(ErrorKind::Precondition, "partial correlation undefined when a control correlation is +-1");
  }
  const double denom = std::sqrt((1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz));
  if (denom == 0.0) throw Error(ErrorKind::Precondition, "partial correlation denominator is 0");
  return (r_xy - r_xz * r_yz) / denom;
}

const char* to_string(Category c) noexcept {
  switch (c) {
    case Category::Independent: return "independent";
    case Category::Weak: return "weak";
    case Category::Moderate: return "moderate";
    case Category::Structural: return "structural";
  }
  return "?";
}

DimPair make_pair(Dimension a, Dimension b) { return a < b ? DimPair{a, b} : DimPair{b, a}; }

std::string pair_label(const DimPair& p) { return std::string(to_string(p.first)) + "-" + to_string(p.second); }

StructuralSet StructuralSet::defaults() {
  return {{make_pair(Dimension::CQ, Dimension::RS), make_pair(Dimension::CQ, Dimension::ES)}};
}

Category classify(const DimPair& pair, double r, const StructuralSet& structural) {
  if (structural.contains(pair.first, pair.second)) return Category::Structural;
  const double a = std::abs(r);
  if (a < 0.20) return Category::Independent;
  if (a < 0.50) return Category::Weak;
  return Category::Moderate;
}

ValidityReport validity_matrix(const ObservationMatrix& obs, const ValidityConfig& cfg) {
  if (obs.n() < 3) throw Error(ErrorKind::Precondition, "validity analysis needs n >= 3 observations");
  std::map<Dimension, std::vector<double>> cols;
  for (auto d : kDimensions) {
    cols[d] = obs.column(d);
    try {
      require_variance(cols[d], to_string(d));
    } catch (const Error&) {
      throw Error(ErrorKind::Degenerate, std::string("dimension ") + to_string(d) + " is constant across all " +
                                             std::to_string(obs.n()) + " observations");
    }
  }

  ValidityReport rep;
  rep.n = obs.n();
  std::map<DimPair, double> r_of;
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    for (std::size_t j = i + 1; j < kDimensions.size(); ++j) {
      CorrelationRecord rec;
      rec.pair = {kDimensions[i], kDimensions[j]};
      rec.n = obs.n();
      rec.r = pearson(cols[kDimensions[i]], cols[kDimensions[j]]);
      auto pv = p_value(rec.r, rec.n);
      rec.p = pv.p;
      rec.exact_fit = pv.exact_fit;
      if (rec.n >= 4 && std::abs(rec.r) < 1.0) {
        rec.ci = fisher_ci(rec.r, rec.n, cfg.level);
      } else if (std::abs(rec.r) == 1.0) {
        rec.ci = {rec.r, rec.r};
      } else {
        rec.ci = {-1.0, 1.0};  // n = 3 leaves no degrees of freedom for the z interval
      }
      if (cfg.bootstrap) {
        std::vector<std::pair<double, double>> pairs;
        for (std::size_t k = 0; k < rec.n; ++k) pairs.emplace_back(cols[rec.pair.first][k], cols[rec.pair.second][k]);
        auto bcfg = *cfg.bootstrap;
        bcfg.level = cfg.level;
        rec.bootstrap = bootstrap_ci(pairs, bcfg);
      }
      rec.category = classify(rec.pair, rec.r, cfg.structural);
      r_of[rec.pair] = rec.r;
      switch (rec.category) {
        case Category::Independent: ++rep.summary.independent; break;
        case Category::Weak: ++rep.summary.weak; break;
        case Category::Moderate: ++rep.summary.moderate; break;
        case Category::Structural: ++rep.summary.structural; break;
      }
      if (std::abs(rec.r) < 0.50) ++rep.summary.below_050;
      rep.records.push_back(std::move(rec));
    }
  }

  // Two dimensions that are each structurally tied to the same control share
  // variance through it; report their correlation with the control removed.
  for (auto z : kDimensions) {
    std::vector<Dimension> linked;
    for (auto d : kDimensions) {
      if (d != z && cfg.structural.contains(d, z)) linked.push_back(d);
    }
    for (std::size_t a = 0; a < linked.size(); ++a) {
      for (std::size_t b = a + 1; b < linked.size(); ++b) {
        const auto xy = make_pair(linked[a], linked[b]);
        const double rxz = r_of.at(make_pair(linked[a], z));
        const double ryz = r_of.at(make_pair(linked[b], z));
        if (std::abs(rxz) >= 1.0 || std::abs(ryz) >= 1.0) continue;
        rep.partials.push_back({xy, z, partial_correlation(r_of.at(xy), rxz, ryz)});
      }
    }
  }
  return rep;
}

}  // namespace reasonq
