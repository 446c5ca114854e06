#include "trinity/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "trinity/error.hpp"
#include "trinity/parallel.hpp"
#include "trinity/rng.hpp"

namespace trinity {

namespace {

// Stateless splitmix64-style hash; the basis of all render-time randomness.
uint64_t hash_u64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t h = hash_u64(seed ^ 0x2545f4914f6cdd1dULL);
  h = hash_u64(h ^ a);
  h = hash_u64(h ^ (b + 0x9e3779b97f4a7c15ULL));
  h = hash_u64(h ^ (c + 0x85ebca6b0b131ULL));
  return h;
}

double hash_unit(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  return static_cast<double>(hash_combine(seed, a, b, c) >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise in [-1, 1]; infinite domain, keyed by seed.
double value_noise(double u, double v, uint64_t seed) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const int64_t iu = static_cast<int64_t>(fu);
  const int64_t iv = static_cast<int64_t>(fv);
  const double tu = smoothstep(u - fu);
  const double tv = smoothstep(v - fv);
  auto corner = [&](int64_t du, int64_t dv) {
    return 2.0 * hash_unit(seed, static_cast<uint64_t>(iu + du) * 2654435761ULL,
                           static_cast<uint64_t>(iv + dv) * 40503ULL) -
           1.0;
  };
  const double top = corner(0, 0) + (corner(1, 0) - corner(0, 0)) * tu;
  const double bot = corner(0, 1) + (corner(1, 1) - corner(0, 1)) * tu;
  return top + (bot - top) * tv;
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  rgb[0] = r + (v - c);
  rgb[1] = g + (v - c);
  rgb[2] = b + (v - c);
}

double fract(double x) { return x - std::floor(x); }

uint8_t to_byte(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(clamped * 255.0));
}

}  // namespace

TexturePaint::TexturePaint(size_t texture_id, double scale) : id_(texture_id), scale_(scale) {
  if (scale <= 0.0) throw ConfigError("texture scale must be positive");
  // golden-ratio hue spacing keeps pool base colors distinct
  const double hue = fract(0.61803398874989 * static_cast<double>(texture_id + 1));
  const double sat = 0.35 + 0.3 * fract(0.75487766624669 * static_cast<double>(texture_id + 1));
  const double val = 0.38 + 0.42 * fract(0.27975928509 * static_cast<double>(texture_id + 1) + 0.17);
  hsv_to_rgb(hue, sat, val, base_);
}

void TexturePaint::color_at(double x, double y, double rgb[3]) const {
  const double base_wavelength = 10.0 * scale_;
  double noise = 0.0;
  double amp = 1.0, total = 0.0;
  for (int octave = 0; octave < 3; ++octave) {
    const double wavelength = base_wavelength / static_cast<double>(1 << octave);
    noise += amp * value_noise(x / wavelength, y / wavelength,
                               hash_combine(0x7e87fe, id_, static_cast<uint64_t>(octave)));
    total += amp;
    amp *= 0.5;
  }
  noise /= total;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = std::clamp(base_[c] * (1.0 + 0.15 * noise), 0.0, 1.0);
  }
}

TexturePaint make_texture(size_t texture_id, double scale, size_t pool_size) {
  if (texture_id >= pool_size) {
    throw ConfigError("texture id " + std::to_string(texture_id) + " outside pool of " +
                      std::to_string(pool_size));
  }
  return TexturePaint(texture_id, scale);
}

GenConfig GenConfig::defaults() {
  GenConfig cfg;
  cfg.object_types = {{"disc", 0.6}, {"box", 0.4}, {"wedge", 0.7}};
  return cfg;
}

void GenConfig::validate() const {
  if (width < 8 || height < 8) throw ConfigError("gen: image size must be at least 8x8");
  if (texture_pool == 0) throw ConfigError("gen: texture pool must be non-empty");
  if (terrains_min < 1 || terrains_min > terrains_max) {
    throw ConfigError("gen: need 1 <= terrains_min <= terrains_max");
  }
  if (terrains_max > ca_slots) {
    throw ConfigError("gen: terrains_max " + std::to_string(terrains_max) +
                      " exceeds slot budget " + std::to_string(ca_slots));
  }
  if (terrains_max > texture_pool) {
    throw ConfigError("gen: terrains_max " + std::to_string(terrains_max) + " exceeds pool of " +
                      std::to_string(texture_pool));
  }
  if (scale_min <= 0.0 || scale_min > scale_max) {
    throw ConfigError("gen: need 0 < scale_min <= scale_max");
  }
  if (sky_fraction < 0.0 || sky_fraction > 0.8) {
    throw ConfigError("gen: sky_fraction must be in [0, 0.8]");
  }
  for (const auto& obj : object_types) {
    if (obj.activation_prob < 0.0 || obj.activation_prob > 1.0) {
      throw ConfigError("gen: activation probability for \"" + obj.name + "\" outside [0,1]");
    }
    if (obj.name.empty()) throw ConfigError("gen: object type with empty name");
  }
}

GenConfig GenConfig::from_config(const KeyValues& kv) {
  GenConfig cfg = defaults();
  cfg.width = kv.get_u64("gen.width", cfg.width);
  cfg.height = kv.get_u64("gen.height", cfg.height);
  cfg.texture_pool = kv.get_u64("gen.texture_pool", cfg.texture_pool);
  cfg.terrains_min = kv.get_u64("gen.terrains_min", cfg.terrains_min);
  cfg.terrains_max = kv.get_u64("gen.terrains_max", cfg.terrains_max);
  cfg.scale_min = kv.get_double("gen.scale_min", cfg.scale_min);
  cfg.scale_max = kv.get_double("gen.scale_max", cfg.scale_max);
  cfg.sky_fraction = kv.get_double("gen.sky_fraction", cfg.sky_fraction);
  cfg.ca_slots = kv.get_u64("gen.ca_slots", cfg.ca_slots);
  cfg.seed = kv.get_u64("gen.seed", cfg.seed);
  if (kv.has("gen.objects")) {
    cfg.object_types.clear();
    for (const auto& item : kv.get_list("gen.objects")) {
      const size_t colon = item.find(':');
      if (colon == std::string::npos) {
        throw ConfigError("gen.objects: expected name:probability, got \"" + item + "\"");
      }
      ObjectTypeConfig obj;
      obj.name = trim(item.substr(0, colon));
      try {
        obj.activation_prob = std::stod(item.substr(colon + 1));
      } catch (...) {
        throw ConfigError("gen.objects: bad probability in \"" + item + "\"");
      }
      cfg.object_types.push_back(std::move(obj));
    }
  }
  cfg.validate();
  return cfg;
}

void GenConfig::to_config(KeyValues& kv) const {
  kv.set_int("gen.width", static_cast<int64_t>(width));
  kv.set_int("gen.height", static_cast<int64_t>(height));
  kv.set_int("gen.texture_pool", static_cast<int64_t>(texture_pool));
  kv.set_int("gen.terrains_min", static_cast<int64_t>(terrains_min));
  kv.set_int("gen.terrains_max", static_cast<int64_t>(terrains_max));
  kv.set_double("gen.scale_min", scale_min);
  kv.set_double("gen.scale_max", scale_max);
  kv.set_double("gen.sky_fraction", sky_fraction);
  kv.set_int("gen.ca_slots", static_cast<int64_t>(ca_slots));
  kv.set_int("gen.seed", static_cast<int64_t>(seed));
  std::ostringstream os;
  for (size_t i = 0; i < object_types.size(); ++i) {
    if (i) os << ",";
    os << object_types[i].name << ":" << object_types[i].activation_prob;
  }
  kv.set("gen.objects", os.str());
}

Taxonomy GenConfig::taxonomy() const {
  Taxonomy tax;
  tax.cs_names.push_back("sky");
  for (const auto& obj : object_types) tax.cs_names.push_back(obj.name);
  tax.ca_slot_count = ca_slots;
  tax.validate();
  return tax;
}

void SceneSpec::save(const std::string& path) const {
  KeyValues kv;
  kv.set_int("scene_seed", static_cast<int64_t>(scene_seed));
  kv.set_int("width", static_cast<int64_t>(width));
  kv.set_int("height", static_cast<int64_t>(height));
  kv.set_int("sky_rows", static_cast<int64_t>(sky_rows));
  kv.set_int("num_cs", static_cast<int64_t>(num_cs));
  kv.set_int("sky_seed", static_cast<int64_t>(sky_seed));
  kv.set_int("dither_seed", static_cast<int64_t>(dither_seed));
  kv.set_int("textures", static_cast<int64_t>(texture_ids.size()));
  for (size_t i = 0; i < texture_ids.size(); ++i) {
    kv.set_int("texture." + std::to_string(i) + ".id", static_cast<int64_t>(texture_ids[i]));
    kv.set_double("texture." + std::to_string(i) + ".scale", texture_scales[i]);
  }
  kv.set_int("sites", static_cast<int64_t>(site_x.size()));
  for (size_t i = 0; i < site_x.size(); ++i) {
    kv.set_double("site." + std::to_string(i) + ".x", site_x[i]);
    kv.set_double("site." + std::to_string(i) + ".y", site_y[i]);
    kv.set_int("site." + std::to_string(i) + ".region", static_cast<int64_t>(cell_region[i]));
  }
  kv.set_int("objects", static_cast<int64_t>(objects.size()));
  for (size_t i = 0; i < objects.size(); ++i) {
    const std::string p = "object." + std::to_string(i) + ".";
    kv.set_int(p + "type", static_cast<int64_t>(objects[i].type));
    kv.set_double(p + "cx", objects[i].cx);
    kv.set_double(p + "cy", objects[i].cy);
    kv.set_double(p + "size", objects[i].size);
    kv.set_double(p + "r", objects[i].r);
    kv.set_double(p + "g", objects[i].g);
    kv.set_double(p + "b", objects[i].b);
  }
  kv.save(path);
}

SceneSpec SceneSpec::load(const std::string& path) {
  const KeyValues kv = KeyValues::parse_file(path);
  SceneSpec spec;
  spec.scene_seed = kv.get_u64("scene_seed");
  spec.width = kv.get_u64("width");
  spec.height = kv.get_u64("height");
  spec.sky_rows = kv.get_u64("sky_rows");
  spec.num_cs = kv.get_u64("num_cs");
  spec.sky_seed = kv.get_u64("sky_seed");
  spec.dither_seed = kv.get_u64("dither_seed");
  const size_t textures = kv.get_u64("textures");
  for (size_t i = 0; i < textures; ++i) {
    spec.texture_ids.push_back(kv.get_u64("texture." + std::to_string(i) + ".id"));
    spec.texture_scales.push_back(kv.get_double("texture." + std::to_string(i) + ".scale"));
  }
  const size_t sites = kv.get_u64("sites");
  for (size_t i = 0; i < sites; ++i) {
    spec.site_x.push_back(kv.get_double("site." + std::to_string(i) + ".x"));
    spec.site_y.push_back(kv.get_double("site." + std::to_string(i) + ".y"));
    spec.cell_region.push_back(kv.get_u64("site." + std::to_string(i) + ".region"));
  }
  const size_t objects = kv.get_u64("objects");
  for (size_t i = 0; i < objects; ++i) {
    const std::string p = "object." + std::to_string(i) + ".";
    PlacedObject obj;
    obj.type = kv.get_u64(p + "type");
    obj.cx = kv.get_double(p + "cx");
    obj.cy = kv.get_double(p + "cy");
    obj.size = kv.get_double(p + "size");
    obj.r = kv.get_double(p + "r");
    obj.g = kv.get_double(p + "g");
    obj.b = kv.get_double(p + "b");
    spec.objects.push_back(obj);
  }
  return spec;
}

SceneSpec sample_scene_spec(const GenConfig& cfg, uint64_t scene_seed) {
  cfg.validate();
  Rng rng(scene_seed);
  SceneSpec spec;
  spec.scene_seed = scene_seed;
  spec.width = cfg.width;
  spec.height = cfg.height;
  spec.sky_rows = static_cast<size_t>(std::lround(cfg.sky_fraction * static_cast<double>(cfg.height)));
  spec.num_cs = 1 + cfg.object_types.size();

  const size_t n_tex =
      cfg.terrains_min + rng.uniform_int(cfg.terrains_max - cfg.terrains_min + 1);
  // partial Fisher-Yates draw of distinct texture ids
  std::vector<size_t> pool(cfg.texture_pool);
  for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (size_t i = 0; i < n_tex; ++i) {
    const size_t j = i + rng.uniform_int(pool.size() - i);
    std::swap(pool[i], pool[j]);
    spec.texture_ids.push_back(pool[i]);
    spec.texture_scales.push_back(rng.uniform(cfg.scale_min, cfg.scale_max));
  }

  const double ground_top = static_cast<double>(spec.sky_rows);
  const size_t n_cells = n_tex + 1 + rng.uniform_int(n_tex + 4);
  for (size_t i = 0; i < n_cells; ++i) {
    spec.site_x.push_back(rng.uniform(0.0, static_cast<double>(cfg.width)));
    spec.site_y.push_back(rng.uniform(ground_top, static_cast<double>(cfg.height)));
    // the first n_tex cells pin one cell per region; the rest spread freely
    spec.cell_region.push_back(i < n_tex ? i : rng.uniform_int(n_tex));
  }

  const double ground_h = static_cast<double>(cfg.height - spec.sky_rows);
  for (size_t t = 0; t < cfg.object_types.size(); ++t) {
    if (!rng.bernoulli(cfg.object_types[t].activation_prob)) continue;
    const size_t instances = 1 + rng.uniform_int(2);
    for (size_t k = 0; k < instances; ++k) {
      PlacedObject obj;
      obj.type = t;
      double size = rng.uniform(5.0, 11.0);
      size = std::min(size, std::max(2.0, ground_h / 2.0 - 1.0));
      obj.size = size;
      obj.cx = rng.uniform(size, static_cast<double>(cfg.width) - size);
      obj.cy = rng.uniform(ground_top + size * 0.5,
                           static_cast<double>(cfg.height) - size * 0.5);
      // type-keyed base color with per-instance jitter
      double base[3];
      hsv_to_rgb(fract(0.23 + 0.31 * static_cast<double>(t)), 0.55, 0.8, base);
      obj.r = std::clamp(base[0] + rng.uniform(-0.08, 0.08), 0.05, 0.95);
      obj.g = std::clamp(base[1] + rng.uniform(-0.08, 0.08), 0.05, 0.95);
      obj.b = std::clamp(base[2] + rng.uniform(-0.08, 0.08), 0.05, 0.95);
      spec.objects.push_back(obj);
    }
  }

  spec.sky_seed = rng.next_u64();
  spec.dither_seed = rng.next_u64();
  return spec;
}

namespace {

// Membership test for the three object silhouettes; shapes cycle by type.
bool inside_object(const PlacedObject& obj, double x, double y) {
  const double dx = x - obj.cx;
  const double dy = y - obj.cy;
  switch (obj.type % 3) {
    case 0:  // disc
      return dx * dx + dy * dy <= obj.size * obj.size;
    case 1:  // box
      return std::abs(dx) <= 0.9 * obj.size && std::abs(dy) <= 0.65 * obj.size;
    default: {  // wedge: apex up
      if (dy < -obj.size || dy > 0.7 * obj.size) return false;
      const double half_width = 0.95 * obj.size * (dy + obj.size) / (1.7 * obj.size);
      return std::abs(dx) <= half_width;
    }
  }
}

}  // namespace

Scene render_scene(const SceneSpec& spec) {
  if (spec.width == 0 || spec.height == 0) throw ConfigError("render_scene: empty dimensions");
  if (spec.texture_ids.empty()) throw ConfigError("render_scene: no textures");
  if (spec.texture_ids.size() != spec.texture_scales.size() ||
      spec.site_x.size() != spec.site_y.size() || spec.site_x.size() != spec.cell_region.size()) {
    throw ConfigError("render_scene: inconsistent spec arrays");
  }
  for (size_t region : spec.cell_region) {
    if (region >= spec.texture_ids.size()) {
      throw ConfigError("render_scene: cell region " + std::to_string(region) + " out of range");
    }
  }

  Scene scene;
  scene.spec = spec;
  scene.image.width = spec.width;
  scene.image.height = spec.height;
  scene.image.rgb.assign(spec.width * spec.height * 3, 0);
  scene.labels.width = spec.width;
  scene.labels.height = spec.height;
  scene.labels.codes.assign(spec.width * spec.height, 0);

  std::vector<TexturePaint> paints;
  paints.reserve(spec.texture_ids.size());
  for (size_t i = 0; i < spec.texture_ids.size(); ++i) {
    paints.emplace_back(spec.texture_ids[i], spec.texture_scales[i]);
  }

  // sky band
  for (size_t y = 0; y < spec.sky_rows; ++y) {
    const double t = spec.sky_rows <= 1
                         ? 0.0
                         : static_cast<double>(y) / static_cast<double>(spec.sky_rows - 1);
    for (size_t x = 0; x < spec.width; ++x) {
      const double wobble = 0.04 * (hash_unit(spec.sky_seed, x, y) - 0.5);
      scene.image.at(x, y, 0) = to_byte(0.36 + t * 0.42 + wobble);
      scene.image.at(x, y, 1) = to_byte(0.55 + t * 0.33 + wobble);
      scene.image.at(x, y, 2) = to_byte(0.82 + t * 0.15 + wobble);
      scene.labels.at(x, y) = 0;  // sky class
    }
  }

  // terrain mosaic with a one-pixel dithered boundary band
  const uint16_t region_base = static_cast<uint16_t>(spec.num_cs);
  for (size_t y = spec.sky_rows; y < spec.height; ++y) {
    for (size_t x = 0; x < spec.width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      size_t best = 0, second = 0;
      double d1 = std::numeric_limits<double>::infinity();
      double d2 = std::numeric_limits<double>::infinity();
      for (size_t s = 0; s < spec.site_x.size(); ++s) {
        const double dx = px - spec.site_x[s];
        const double dy = py - spec.site_y[s];
        const double d = dx * dx + dy * dy;
        if (d < d1) {
          d2 = d1;
          second = best;
          d1 = d;
          best = s;
        } else if (d < d2) {
          d2 = d;
          second = s;
        }
      }
      size_t cell = best;
      if (spec.site_x.size() > 1 && std::sqrt(d2) - std::sqrt(d1) < 1.0 &&
          spec.cell_region[best] != spec.cell_region[second]) {
        if (hash_unit(spec.dither_seed, x, y) < 0.5) cell = second;
      }
      const size_t region = spec.cell_region[cell];
      double rgb[3];
      paints[region].color_at(px, py, rgb);
      scene.image.at(x, y, 0) = to_byte(rgb[0]);
      scene.image.at(x, y, 1) = to_byte(rgb[1]);
      scene.image.at(x, y, 2) = to_byte(rgb[2]);
      scene.labels.at(x, y) = static_cast<uint16_t>(region_base + region);
    }
  }

  // objects occlude terrain; skip an instance rather than erase a region's
  // last pixel
  std::vector<size_t> region_pixels(spec.texture_ids.size(), 0);
  for (uint16_t code : scene.labels.codes) {
    if (code >= region_base) region_pixels[code - region_base]++;
  }
  for (const PlacedObject& obj : spec.objects) {
    const size_t x0 = static_cast<size_t>(std::max(0.0, std::floor(obj.cx - obj.size)));
    const size_t x1 = std::min(spec.width, static_cast<size_t>(std::ceil(obj.cx + obj.size)) + 1);
    const size_t y0 = std::max(spec.sky_rows,
                               static_cast<size_t>(std::max(0.0, std::floor(obj.cy - obj.size))));
    const size_t y1 = std::min(spec.height, static_cast<size_t>(std::ceil(obj.cy + obj.size)) + 1);

    std::vector<size_t> eaten(spec.texture_ids.size(), 0);
    for (size_t y = y0; y < y1; ++y) {
      for (size_t x = x0; x < x1; ++x) {
        if (!inside_object(obj, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
        const uint16_t code = scene.labels.at(x, y);
        if (code >= region_base) eaten[code - region_base]++;
      }
    }
    bool erases_region = false;
    for (size_t r = 0; r < eaten.size(); ++r) {
      if (eaten[r] > 0 && eaten[r] >= region_pixels[r]) erases_region = true;
    }
    if (erases_region) continue;

    for (size_t y = y0; y < y1; ++y) {
      for (size_t x = x0; x < x1; ++x) {
        const double cx = static_cast<double>(x) + 0.5;
        const double cy = static_cast<double>(y) + 0.5;
        if (!inside_object(obj, cx, cy)) continue;
        const uint16_t code = scene.labels.at(x, y);
        if (code >= region_base) region_pixels[code - region_base]--;
        const double shade =
            std::clamp(0.8 + 0.35 * (cy - obj.cy + obj.size) / (2.0 * obj.size), 0.6, 1.15);
        scene.image.at(x, y, 0) = to_byte(obj.r * shade);
        scene.image.at(x, y, 1) = to_byte(obj.g * shade);
        scene.image.at(x, y, 2) = to_byte(obj.b * shade);
        scene.labels.at(x, y) = static_cast<uint16_t>(1 + obj.type);
      }
    }
  }

  scene.region_names.reserve(spec.texture_ids.size());
  for (size_t id : spec.texture_ids) {
    std::ostringstream os;
    os << "tex" << (id < 10 ? "0" : "") << id;
    scene.region_names.push_back(os.str());
  }
  return scene;
}

Scene generate_scene(const GenConfig& cfg, uint64_t scene_seed) {
  return render_scene(sample_scene_spec(cfg, scene_seed));
}

Manifest generate_dataset(const GenConfig& cfg, size_t n, const std::string& out_dir,
                          size_t workers) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "labels", ec);
  fs::create_directories(fs::path(out_dir) / "specs", ec);
  if (ec) throw IoError("cannot create output directories under " + out_dir);

  const Taxonomy tax = cfg.taxonomy();
  tax.save((fs::path(out_dir) / "taxonomy.txt").string());

  Manifest manifest;
  manifest.taxonomy_path = "taxonomy.txt";
  manifest.base_dir = out_dir;
  const size_t n_train = (n * 8) / 10;
  const size_t n_val = n / 10;
  manifest.samples.resize(n);
  parallel_for_indexed(n, workers, [&](size_t i) {
    const Scene scene = generate_scene(cfg, cfg.seed + i);
    std::ostringstream id;
    id.width(6);
    id.fill('0');
    id << i;
    const std::string image_rel = "images/" + id.str() + ".ppm";
    const std::string labels_rel = "labels/" + id.str() + ".tlbl";
    const std::string spec_rel = "specs/" + id.str() + ".spec";
    write_image((fs::path(out_dir) / image_rel).string(), scene.image);
    write_labels((fs::path(out_dir) / labels_rel).string(), scene.labels);
    scene.spec.save((fs::path(out_dir) / spec_rel).string());

    SampleRecord rec;
    rec.id = id.str();
    rec.image_path = image_rel;
    rec.labels_path = labels_rel;
    rec.split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    rec.region_names = scene.region_names;
    manifest.samples[i] = std::move(rec);
  });
  manifest.save((fs::path(out_dir) / "manifest.txt").string());
  return manifest;
}

}  // namespace trinity
