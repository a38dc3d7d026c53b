#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reasonq {

/// Minimal TOML-like key/value configuration.
///
/// Grammar (one construct per line):
///
///     # comment                 full-line or trailing comments
///     [section]                 prefixes following keys with "section."
///     key = value               bare value, trimmed
///     key = "quoted value"      supports \" \\ \n \t escapes
///     key = [a, "b c", 3]       list of bare or quoted items
///
/// Keys are [A-Za-z0-9_.-]+. Redefining a key is an error.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text, std::string_view origin = "<string>");
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::vector<std::string>> get_list(const std::string& key) const;

  std::vector<std::string> keys() const;

 private:
  struct Entry {
    std::vector<std::string> items;
    bool is_list = false;
    int line = 0;
  };
  std::map<std::string, Entry> values_;
  std::string origin_;
};

}  // namespace reasonq
