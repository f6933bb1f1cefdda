#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ptl {

/// Flat `key=value` configuration. Lines starting with '#' and blank lines are
/// ignored; later assignments override earlier ones. Rendering is sorted by
/// key so an echoed config is byte-stable.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);

  void set(std::string key, std::string value);
  /// Applies "key=value"; throws ConfigError when there is no '='.
  void apply_override(std::string_view assignment);
  void merge(const KeyValues& other);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  /// Comma-separated list; empty items are dropped.
  std::vector<std::string> get_list(std::string_view key, std::vector<std::string> fallback) const;

  /// Throws ConfigError naming every key not in `allowed`.
  void reject_unknown(const std::set<std::string, std::less<>>& allowed) const;

  std::string to_text() const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

std::string join(const std::vector<std::string>& items, std::string_view sep);

}  // namespace ptl
