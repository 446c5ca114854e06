#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trinity/config.hpp"
#include "trinity/dataset_io.hpp"

namespace trinity {

struct ObjectTypeConfig {
  std::string name;
  double activation_prob = 0.5;
};

struct GenConfig {
  size_t width = 64;
  size_t height = 64;
  size_t texture_pool = 24;  // T
  size_t terrains_min = 2;
  size_t terrains_max = 6;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double sky_fraction = 0.25;
  std::vector<ObjectTypeConfig> object_types;  // class id = 1 + index; sky is class 0
  size_t ca_slots = 8;                         // M in the emitted taxonomy
  uint64_t seed = 0;

  static GenConfig defaults();
  void validate() const;
  static GenConfig from_config(const KeyValues& kv);
  void to_config(KeyValues& kv) const;

  // sky + object classes, plus the slot budget
  Taxonomy taxonomy() const;
};

struct PlacedObject {
  size_t type = 0;  // index into object_types; shape cycles disc/box/wedge
  double cx = 0.0;
  double cy = 0.0;
  double size = 0.0;  // half extent, pixels
  double r = 0.5, g = 0.5, b = 0.5;
};

// Everything the renderer needs; re-rendering a spec reproduces the image
// and labels bit-exactly.
struct SceneSpec {
  uint64_t scene_seed = 0;
  size_t width = 0;
  size_t height = 0;
  size_t sky_rows = 0;
  size_t num_cs = 0;
  uint64_t sky_seed = 0;
  uint64_t dither_seed = 0;
  std::vector<size_t> texture_ids;      // one per CA region, distinct
  std::vector<double> texture_scales;   // parallel to texture_ids
  std::vector<double> site_x, site_y;   // Voronoi sites in the ground band
  std::vector<size_t> cell_region;      // site index -> region index
  std::vector<PlacedObject> objects;

  void save(const std::string& path) const;
  static SceneSpec load(const std::string& path);
};

// Deterministic value-noise paint for one texture; same id and scale always
// produce the same color at the same coordinate.
class TexturePaint {
 public:
  TexturePaint(size_t texture_id, double scale);
  void color_at(double x, double y, double rgb[3]) const;
  size_t id() const { return id_; }

 private:
  size_t id_;
  double scale_;
  double base_[3];
};

TexturePaint make_texture(size_t texture_id, double scale, size_t pool_size);

struct Scene {
  Image image;
  LabelMap labels;
  SceneSpec spec;
  std::vector<std::string> region_names;  // "tex<id>" per region
};

SceneSpec sample_scene_spec(const GenConfig& cfg, uint64_t scene_seed);
Scene render_scene(const SceneSpec& spec);
Scene generate_scene(const GenConfig& cfg, uint64_t scene_seed);

// Writes n scenes (seeds master+i), the taxonomy, per-scene specs and the
// manifest (80/10/10 train/val/test split) under out_dir. Scene rendering
// fans out over `workers` threads; outputs are identical for any count.
Manifest generate_dataset(const GenConfig& cfg, size_t n, const std::string& out_dir,
                          size_t workers = 1);

}  // namespace trinity
