#include "trinity/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "trinity/error.hpp"
#include "trinity/io_util.hpp"

namespace trinity {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_string(std::string(bytes.begin(), bytes.end()), path);
}

KeyValues KeyValues::parse_string(const std::string& text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream is(text);
  std::string line;
  size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected `key = value`, got \"" +
                       stripped + "\"");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": duplicate key \"" + key + "\"");
    }
    kv.entries_.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

const std::string* KeyValues::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

bool KeyValues::has(const std::string& key) const { return find(key) != nullptr; }

void KeyValues::mark_consumed(const std::string& key) const { consumed_.insert(key); }

std::string KeyValues::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ConfigError(source_ + ": missing required key \"" + key + "\"");
  mark_consumed(key);
  return *v;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  mark_consumed(key);
  const std::string* v = find(key);
  return v ? *v : fallback;
}

namespace {

int64_t to_int(const std::string& value, const std::string& key, const std::string& source) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    throw ConfigError(source + ": key \"" + key + "\": not an integer: \"" + value + "\"");
  }
  return v;
}

double to_double(const std::string& value, const std::string& key, const std::string& source) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    throw ConfigError(source + ": key \"" + key + "\": not a number: \"" + value + "\"");
  }
  return v;
}

}  // namespace

int64_t KeyValues::get_int(const std::string& key) const {
  return to_int(get_string(key), key, source_);
}

int64_t KeyValues::get_int(const std::string& key, int64_t fallback) const {
  mark_consumed(key);
  const std::string* v = find(key);
  return v ? to_int(*v, key, source_) : fallback;
}

uint64_t KeyValues::get_u64(const std::string& key) const {
  const int64_t v = get_int(key);
  if (v < 0) throw ConfigError(source_ + ": key \"" + key + "\": negative value");
  return static_cast<uint64_t>(v);
}

uint64_t KeyValues::get_u64(const std::string& key, uint64_t fallback) const {
  mark_consumed(key);
  const std::string* v = find(key);
  if (!v) return fallback;
  const int64_t parsed = to_int(*v, key, source_);
  if (parsed < 0) throw ConfigError(source_ + ": key \"" + key + "\": negative value");
  return static_cast<uint64_t>(parsed);
}

double KeyValues::get_double(const std::string& key) const {
  return to_double(get_string(key), key, source_);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  mark_consumed(key);
  const std::string* v = find(key);
  return v ? to_double(*v, key, source_) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  mark_consumed(key);
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError(source_ + ": key \"" + key + "\": not a bool: \"" + *v + "\"");
}

std::vector<std::string> KeyValues::get_list(const std::string& key) const {
  return split_list(get_string(key));
}

std::vector<std::string> KeyValues::get_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const {
  mark_consumed(key);
  const std::string* v = find(key);
  return v ? split_list(*v) : fallback;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValues::set_int(const std::string& key, int64_t value) { set(key, std::to_string(value)); }

void KeyValues::set_double(const std::string& key, double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  set(key, os.str());
}

void KeyValues::merge(const KeyValues& overrides) {
  for (const auto& [k, v] : overrides.entries_) set(k, v);
}

std::vector<std::string> KeyValues::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (!consumed_.count(k)) out.push_back(k);
  }
  return out;
}

std::string KeyValues::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
  return os.str();
}

void KeyValues::save(const std::string& path) const {
  const std::string text = to_string();
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

}  // namespace trinity
