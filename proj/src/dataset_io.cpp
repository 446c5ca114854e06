#include "trinity/dataset_io.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "trinity/config.hpp"
#include "trinity/error.hpp"
#include "trinity/io_util.hpp"

namespace trinity {

void Taxonomy::validate() const {
  if (cs_names.empty()) throw ConfigError("taxonomy: needs at least one CS class");
  if (ca_slot_count == 0) throw ConfigError("taxonomy: ca_slots must be >= 1");
  std::set<std::string> seen;
  for (const auto& name : cs_names) {
    if (name.empty()) throw ConfigError("taxonomy: empty CS class name");
    if (!seen.insert(name).second) throw ConfigError("taxonomy: duplicate CS class \"" + name + "\"");
  }
  for (uint16_t v : void_ids) {
    if (v < cs_names.size()) {
      throw ConfigError("taxonomy: void id " + std::to_string(v) + " collides with CS class \"" +
                        cs_names[v] + "\"");
    }
    // codes [K, K+M) are claimed by prediction slots
    if (v < cs_names.size() + ca_slot_count) {
      throw ConfigError("taxonomy: void id " + std::to_string(v) +
                        " collides with the CA slot code range [" + std::to_string(cs_names.size()) +
                        "," + std::to_string(cs_names.size() + ca_slot_count) + ")");
    }
  }
  for (const auto& name : cs_unscored) {
    if (std::find(cs_names.begin(), cs_names.end(), name) == cs_names.end()) {
      throw ConfigError("taxonomy: unscored class \"" + name + "\" is not a CS class");
    }
  }
}

Taxonomy Taxonomy::load(const std::string& path) {
  const KeyValues kv = KeyValues::parse_file(path);
  Taxonomy tax;
  // cs_class.<id> keys must be dense from 0
  size_t k = 0;
  while (kv.has("cs_class." + std::to_string(k))) {
    tax.cs_names.push_back(kv.get_string("cs_class." + std::to_string(k)));
    ++k;
  }
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("cs_class.", 0) == 0) {
      const std::string idx = key.substr(9);
      size_t parsed = 0;
      try {
        parsed = std::stoul(idx);
      } catch (...) {
        throw ConfigError(path + ": malformed key \"" + key + "\"");
      }
      if (parsed >= k) {
        throw ConfigError(path + ": non-dense CS class ids, found \"" + key + "\" but only " +
                          std::to_string(k) + " dense ids");
      }
    }
  }
  tax.ca_slot_count = kv.get_u64("ca_slots");
  size_t t = 0;
  while (kv.has("ca_terrain." + std::to_string(t))) {
    tax.ca_terrain_names.push_back(kv.get_string("ca_terrain." + std::to_string(t)));
    ++t;
  }
  for (const auto& item : kv.get_list("void_ids", {})) {
    int64_t v = 0;
    try {
      v = std::stoll(item);
    } catch (...) {
      throw ConfigError(path + ": void_ids entry not an integer: \"" + item + "\"");
    }
    if (v < 0 || v >= kVoidLabel) throw ConfigError(path + ": void id out of u16 range: " + item);
    if (!tax.void_ids.insert(static_cast<uint16_t>(v)).second) {
      throw ConfigError(path + ": duplicate void id " + item);
    }
  }
  for (const auto& name : kv.get_list("cs_unscored", {})) tax.cs_unscored.insert(name);
  kv.get_int("version", 1);
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("ca_terrain.", 0) == 0 || key.rfind("cs_class.", 0) == 0) kv.mark_consumed(key);
  }
  const auto leftover = kv.unconsumed();
  if (!leftover.empty()) {
    throw ConfigError(path + ": unknown keys: " + leftover.front() +
                      (leftover.size() > 1 ? " (+" + std::to_string(leftover.size() - 1) + " more)" : ""));
  }
  tax.validate();
  return tax;
}

void Taxonomy::save(const std::string& path) const {
  validate();
  KeyValues kv;
  kv.set_int("version", 1);
  for (size_t i = 0; i < cs_names.size(); ++i) kv.set("cs_class." + std::to_string(i), cs_names[i]);
  kv.set_int("ca_slots", static_cast<int64_t>(ca_slot_count));
  for (size_t i = 0; i < ca_terrain_names.size(); ++i) {
    kv.set("ca_terrain." + std::to_string(i), ca_terrain_names[i]);
  }
  if (!void_ids.empty()) {
    std::ostringstream os;
    bool first = true;
    for (uint16_t v : void_ids) {
      if (!first) os << ",";
      os << v;
      first = false;
    }
    kv.set("void_ids", os.str());
  }
  if (!cs_unscored.empty()) {
    std::ostringstream os;
    bool first = true;
    for (const auto& name : cs_unscored) {
      if (!first) os << ",";
      os << name;
      first = false;
    }
    kv.set("cs_unscored", os.str());
  }
  kv.save(path);
}

bool is_void_code(uint16_t code, const Taxonomy& tax) {
  return code == kVoidLabel || tax.void_ids.count(code) > 0;
}

std::vector<size_t> region_ids(const LabelMap& labels, const Taxonomy& tax) {
  std::set<size_t> ids;
  const size_t num_cs = tax.num_cs();
  for (uint16_t code : labels.codes) {
    if (!is_void_code(code, tax) && code >= num_cs) ids.insert(code - num_cs);
  }
  return {ids.begin(), ids.end()};
}

std::vector<uint8_t> region_mask(const LabelMap& labels, const Taxonomy& tax, size_t region_id) {
  std::vector<uint8_t> mask(labels.size(), 0);
  const uint16_t code = static_cast<uint16_t>(tax.num_cs() + region_id);
  if (is_void_code(code, tax)) return mask;
  for (size_t i = 0; i < labels.size(); ++i) mask[i] = labels.codes[i] == code ? 1 : 0;
  return mask;
}

void validate_labels(const LabelMap& labels, const Taxonomy& tax) {
  // region ids get generous headroom; per-image counts are checked against
  // the slot budget where matching happens.
  const size_t limit = tax.num_cs() + 4096;
  for (size_t i = 0; i < labels.size(); ++i) {
    const uint16_t code = labels.codes[i];
    if (is_void_code(code, tax)) continue;
    if (code >= limit) {
      throw ValueError("label code " + std::to_string(code) + " at pixel " + std::to_string(i) +
                       " outside CS/CA code space");
    }
  }
}

void write_image(const std::string& path, const Image& image) {
  if (image.rgb.size() != image.width * image.height * 3) {
    throw DimensionError("write_image: buffer size " + std::to_string(image.rgb.size()) +
                         " vs dims " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  std::ostringstream header;
  header << "P6\n" << image.width << " " << image.height << "\n255\n";
  const std::string h = header.str();
  std::vector<uint8_t> bytes;
  bytes.reserve(h.size() + image.rgb.size());
  bytes.insert(bytes.end(), h.begin(), h.end());
  bytes.insert(bytes.end(), image.rgb.begin(), image.rgb.end());
  write_file_atomic(path, bytes);
}

namespace {

// Reads one PPM header token, skipping whitespace and `#` comments.
size_t ppm_token(const std::vector<uint8_t>& bytes, size_t pos, const std::string& path,
                 std::string* token) {
  while (pos < bytes.size()) {
    if (std::isspace(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size()) {
    throw ParseError(path + ": truncated PPM header at byte offset " + std::to_string(pos));
  }
  token->clear();
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token->push_back(static_cast<char>(bytes[pos]));
    ++pos;
  }
  return pos;
}

size_t ppm_number(const std::vector<uint8_t>& bytes, size_t pos, const std::string& path,
                  size_t* value) {
  std::string token;
  const size_t start_guess = pos;
  pos = ppm_token(bytes, pos, path, &token);
  try {
    size_t idx = 0;
    const unsigned long v = std::stoul(token, &idx);
    if (idx != token.size()) throw std::invalid_argument(token);
    *value = v;
  } catch (...) {
    throw ParseError(path + ": expected number in PPM header near byte offset " +
                     std::to_string(start_guess) + ", got \"" + token + "\"");
  }
  return pos;
}

}  // namespace

Image read_image(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  std::string magic;
  size_t pos = ppm_token(bytes, 0, path, &magic);
  if (magic != "P6") {
    throw ParseError(path + ": bad PPM magic \"" + magic + "\" at byte offset 0, expected \"P6\"");
  }
  Image image;
  size_t maxval = 0;
  pos = ppm_number(bytes, pos, path, &image.width);
  pos = ppm_number(bytes, pos, path, &image.height);
  pos = ppm_number(bytes, pos, path, &maxval);
  if (maxval != 255) {
    throw ParseError(path + ": unsupported maxval " + std::to_string(maxval) + ", expected 255");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ParseError(path + ": missing whitespace after maxval at byte offset " + std::to_string(pos));
  }
  ++pos;  // single whitespace separates header from pixel data
  const size_t need = image.width * image.height * 3;
  if (bytes.size() - pos < need) {
    throw ParseError(path + ": truncated pixel data at byte offset " + std::to_string(bytes.size()) +
                     ", need " + std::to_string(need + pos) + " bytes");
  }
  if (bytes.size() - pos > need) {
    throw ParseError(path + ": " + std::to_string(bytes.size() - pos - need) +
                     " trailing bytes after pixel data");
  }
  image.rgb.assign(bytes.begin() + pos, bytes.end());
  return image;
}

void write_labels(const std::string& path, const LabelMap& labels) {
  if (labels.codes.size() != labels.width * labels.height) {
    throw DimensionError("write_labels: " + std::to_string(labels.codes.size()) + " codes for " +
                         std::to_string(labels.width) + "x" + std::to_string(labels.height));
  }
  std::vector<uint8_t> bytes;
  bytes.reserve(16 + labels.codes.size() * 2);
  bytes.insert(bytes.end(), {'T', 'L', 'B', 'L'});
  put_u32(bytes, kLabelFormatVersion);
  put_u32(bytes, static_cast<uint32_t>(labels.width));
  put_u32(bytes, static_cast<uint32_t>(labels.height));
  for (uint16_t code : labels.codes) put_u16(bytes, code);
  write_file_atomic(path, bytes);
}

LabelMap read_labels(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path);
  if (r.str(4, "magic") != "TLBL") {
    throw ParseError(path + ": bad magic, expected \"TLBL\"");
  }
  const uint32_t version = r.u32("version");
  if (version != kLabelFormatVersion) {
    throw ParseError(path + ": unsupported label format version " + std::to_string(version));
  }
  LabelMap labels;
  labels.width = r.u32("width");
  labels.height = r.u32("height");
  labels.codes.resize(labels.width * labels.height);
  for (auto& code : labels.codes) code = r.u16("codes");
  if (r.remaining() != 0) {
    throw ParseError(path + ": " + std::to_string(r.remaining()) + " trailing bytes at offset " +
                     std::to_string(r.offset()));
  }
  return labels;
}

std::string Manifest::resolve(const std::string& relative) const {
  if (relative.empty() || relative.front() == '/') return relative;
  if (base_dir.empty()) return relative;
  return base_dir + "/" + relative;
}

std::vector<SampleRecord> Manifest::split_samples(const std::string& split) const {
  std::vector<SampleRecord> out;
  for (const auto& s : samples) {
    if (split.empty() || s.split == split) out.push_back(s);
  }
  return out;
}

Manifest Manifest::load(const std::string& path, bool check_files) {
  const KeyValues kv = KeyValues::parse_file(path);
  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  m.version = static_cast<uint32_t>(kv.get_int("version", 1));
  m.taxonomy_path = kv.get_string("taxonomy");
  const size_t count = kv.get_u64("samples");
  std::set<std::string> ids;
  m.samples.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const std::string prefix = "sample." + std::to_string(i) + ".";
    SampleRecord rec;
    rec.id = kv.get_string(prefix + "id");
    rec.image_path = kv.get_string(prefix + "image");
    rec.labels_path = kv.get_string(prefix + "labels");
    rec.split = kv.get_string(prefix + "split", "train");
    rec.region_names = kv.get_list(prefix + "regions", {});
    if (!ids.insert(rec.id).second) {
      throw ConfigError(path + ": duplicate sample id \"" + rec.id + "\"");
    }
    m.samples.push_back(std::move(rec));
  }
  if (check_files) {
    std::vector<std::string> missing;
    auto probe = [&](const std::string& rel) {
      const std::string full = m.resolve(rel);
      if (!std::filesystem::exists(full)) missing.push_back(full);
    };
    probe(m.taxonomy_path);
    for (const auto& rec : m.samples) {
      probe(rec.image_path);
      probe(rec.labels_path);
    }
    if (!missing.empty()) {
      std::ostringstream os;
      os << path << ": " << missing.size() << " referenced files missing:";
      for (const auto& f : missing) os << " " << f;
      throw IoError(os.str());
    }
  }
  return m;
}

void Manifest::save(const std::string& path) const {
  KeyValues kv;
  kv.set_int("version", version);
  kv.set("taxonomy", taxonomy_path);
  kv.set_int("samples", static_cast<int64_t>(samples.size()));
  for (size_t i = 0; i < samples.size(); ++i) {
    const std::string prefix = "sample." + std::to_string(i) + ".";
    kv.set(prefix + "id", samples[i].id);
    kv.set(prefix + "image", samples[i].image_path);
    kv.set(prefix + "labels", samples[i].labels_path);
    kv.set(prefix + "split", samples[i].split);
    if (!samples[i].region_names.empty()) {
      std::ostringstream os;
      for (size_t r = 0; r < samples[i].region_names.size(); ++r) {
        if (r) os << ",";
        os << samples[i].region_names[r];
      }
      kv.set(prefix + "regions", os.str());
    }
  }
  kv.save(path);
}

}  // namespace trinity
