#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace trinity {

// Per-pixel label code marking void (ignored) pixels.
constexpr uint16_t kVoidLabel = 0xFFFF;

// Declares which label codes are class-specific and how many class-agnostic
// prediction slots the model exposes. CS classes occupy codes [0, K);
// per-image CA region ids follow at [K, K+R).
struct Taxonomy {
  std::vector<std::string> cs_names;            // index == class id
  size_t ca_slot_count = 0;                     // M
  std::set<uint16_t> void_ids;                  // source-dataset codes mapped to void
  std::vector<std::string> ca_terrain_names;    // optional GT-side names for reporting
  std::set<std::string> cs_unscored;            // CS classes excluded from mIoU

  size_t num_cs() const { return cs_names.size(); }

  void validate() const;
  static Taxonomy load(const std::string& path);
  void save(const std::string& path) const;
};

// Dense row-major RGB image, 8 bits per channel.
struct Image {
  size_t width = 0;
  size_t height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height

  uint8_t at(size_t x, size_t y, size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  uint8_t& at(size_t x, size_t y, size_t c) { return rgb[(y * width + x) * 3 + c]; }
};

// Per-pixel ground-truth/prediction codes; see Taxonomy for the code space.
struct LabelMap {
  size_t width = 0;
  size_t height = 0;
  std::vector<uint16_t> codes;  // row-major

  uint16_t at(size_t x, size_t y) const { return codes[y * width + x]; }
  uint16_t& at(size_t x, size_t y) { return codes[y * width + x]; }
  size_t size() const { return codes.size(); }
};

// True for the dedicated void code or any code the taxonomy declares void.
bool is_void_code(uint16_t code, const Taxonomy& tax);

// Sorted distinct CA region ids present in a label map (codes >= K, void
// excluded), relative to K (i.e. region id 0 is code K).
std::vector<size_t> region_ids(const LabelMap& labels, const Taxonomy& tax);

// Binary mask (1 = member) for one CA region id.
std::vector<uint8_t> region_mask(const LabelMap& labels, const Taxonomy& tax, size_t region_id);

// Rejects codes that are neither CS, CA region, nor void.
void validate_labels(const LabelMap& labels, const Taxonomy& tax);

// ---- binary PPM (P6, maxval 255) ----
void write_image(const std::string& path, const Image& image);
Image read_image(const std::string& path);

// ---- label map format ----
// magic "TLBL", version u32 LE, width u32 LE, height u32 LE, then
// width*height u16 LE codes, row-major.
constexpr uint32_t kLabelFormatVersion = 1;
void write_labels(const std::string& path, const LabelMap& labels);
LabelMap read_labels(const std::string& path);

// One dataset sample; paths are relative to the manifest's directory.
struct SampleRecord {
  std::string id;
  std::string image_path;
  std::string labels_path;
  std::string split;                       // train | val | test
  std::vector<std::string> region_names;   // optional, region id -> terrain name
};

struct Manifest {
  uint32_t version = 1;
  std::string taxonomy_path;               // relative to manifest dir
  std::vector<SampleRecord> samples;
  std::string base_dir;                    // set by load()

  std::string resolve(const std::string& relative) const;
  std::vector<SampleRecord> split_samples(const std::string& split) const;

  // Validates unique ids and, with check_files, enumerates every missing
  // referenced file in one error.
  static Manifest load(const std::string& path, bool check_files = true);
  void save(const std::string& path) const;
};

}  // namespace trinity
