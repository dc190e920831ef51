#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace levelnet {

/// `key = value` text configuration. Blank lines and lines starting with `#`
/// are ignored; keys are unique; order of keys does not matter.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(std::string_view text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& file);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  /// Throws ConfigError when missing or malformed.
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;
  /// Comma-separated list; whitespace around items is trimmed.
  std::vector<std::string> get_list(const std::string& key) const;

  /// Keys starting with `prefix`, with the prefix stripped.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Canonical `key = value` rendering, sorted by key.
  std::string canonical() const;
  /// FNV-1a of `canonical()`, as 16 hex digits.
  std::string hash() const;

 private:
  std::string origin_ = "<config>";
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string trim(std::string_view s);

}  // namespace levelnet
