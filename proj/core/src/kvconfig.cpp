#include "reasonq/kvconfig.hpp"

#include "reasonq/error.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace reasonq {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
  }
  return true;
}

[[noreturn]] void fail(std::string_view origin, int line, const std::string& what) {
  throw Error(ErrorKind::Config, std::string(origin) + ":" + std::to_string(line) + ": " + what);
}

// Parses one scalar starting at s[pos]; advances pos past it.
std::string parse_scalar(std::string_view s, size_t& pos, std::string_view stop, std::string_view origin,
                         int line) {
  if (pos < s.size() && s[pos] == '"') {
    std::string out;
    ++pos;
    while (pos < s.size() && s[pos] != '"') {
      char c = s[pos++];
      if (c == '\\') {
        if (pos >= s.size()) fail(origin, line, "dangling escape");
        char e = s[pos++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(origin, line, std::string("unknown escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    if (pos >= s.size()) fail(origin, line, "unterminated string");
    ++pos;
    return out;
  }
  size_t start = pos;
  while (pos < s.size() && stop.find(s[pos]) == std::string_view::npos) ++pos;
  return std::string(trim(s.substr(start, pos - start)));
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && in_string) {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text, std::string_view origin) {
  KvConfig cfg;
  cfg.origin_ = std::string(origin);
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "malformed section header");
      auto name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) fail(origin, line_no, "invalid section name");
      section = std::string(name) + ".";
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(origin, line_no, "expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    if (!valid_key(key)) fail(origin, line_no, "invalid key '" + std::string(key) + "'");
    std::string_view rhs = trim(line.substr(eq + 1));

    Entry entry;
    entry.line = line_no;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']') fail(origin, line_no, "unterminated list");
      entry.is_list = true;
      std::string_view body = rhs.substr(1, rhs.size() - 2);
      size_t pos = 0;
      while (true) {
        while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
        if (pos >= body.size()) break;
        entry.items.push_back(parse_scalar(body, pos, ",", origin, line_no));
        while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
        if (pos < body.size()) {
          if (body[pos] != ',') fail(origin, line_no, "expected ',' in list");
          ++pos;
        }
      }
    } else {
      size_t pos = 0;
      entry.items.push_back(parse_scalar(rhs, pos, "", origin, line_no));
      if (!trim(rhs.substr(pos)).empty()) fail(origin, line_no, "trailing characters after value");
    }

    std::string full = section + std::string(key);
    if (cfg.values_.contains(full)) {
      fail(origin, line_no, "duplicate key '" + full + "' (first set on line " +
                                std::to_string(cfg.values_[full].line) + ")");
    }
    cfg.values_.emplace(std::move(full), std::move(entry));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KvConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.is_list) {
    throw Error(ErrorKind::Config, origin_ + ":" + std::to_string(it->second.line) + ": '" + key +
                                       "' is a list, expected a scalar");
  }
  return it->second.items.front();
}

std::optional<long long> KvConfig::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  long long v = 0;
  auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc{} || p != s->data() + s->size()) {
    throw Error(ErrorKind::Config, origin_ + ": '" + key + "' is not an integer: " + *s);
  }
  return v;
}

std::optional<double> KvConfig::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  double v = 0;
  auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc{} || p != s->data() + s->size()) {
    throw Error(ErrorKind::Config, origin_ + ": '" + key + "' is not a number: " + *s);
  }
  return v;
}

std::optional<std::vector<std::string>> KvConfig::get_list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second.items;
}

std::vector<std::string> KvConfig::keys() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [k, _] : values_) out.push_back(k);
  return out;
}

}  // namespace reasonq
