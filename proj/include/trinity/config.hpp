#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace trinity {

// Line-oriented `key = value` store backing taxonomy, manifest, scene-spec
// and run-config files. `#` starts a comment line; keys are unique; entry
// order is preserved on save. Typed getters mark keys as consumed so callers
// can reject unknown keys afterwards.
class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse_file(const std::string& path);
  static KeyValues parse_string(const std::string& text, const std::string& source);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // comma-separated list; empty value -> empty list
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, int64_t value);
  void set_double(const std::string& key, double value);

  // later entries win; overrides are marked as overrides for error messages
  void merge(const KeyValues& overrides);

  // keys never touched by a typed getter; non-empty means a config typo
  std::vector<std::string> unconsumed() const;
  void mark_consumed(const std::string& key) const;

  std::string to_string() const;
  void save(const std::string& path) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  const std::string* find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string source_ = "<memory>";
  mutable std::set<std::string> consumed_;
};

std::string trim(const std::string& s);
std::vector<std::string> split_list(const std::string& s);

}  // namespace trinity
