#pragma once

// Plain-text key-value documents:
//
//   # comment
//   key = value
//   list_key = 1, 2, 3
//
// Keys are unique; every key in a document must be consumed by the reader,
// so a misspelt key is reported instead of silently ignored.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace strokeforge {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::uint64_t> get_uints(const std::string& key, const std::vector<std::uint64_t>& fallback) const;

  /// Throws ConfigError naming the first key that no getter asked for.
  void reject_unused() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  const std::string* lookup(const std::string& key) const;

  std::string source_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace strokeforge
