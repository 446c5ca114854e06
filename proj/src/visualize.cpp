#include "trinity/visualize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "trinity/error.hpp"
#include "trinity/rng.hpp"

namespace trinity {

namespace {

// Fixed CS palette, deliberately avoiding cyan hues (reserved for CA regions).
constexpr uint8_t kCsPalette[][3] = {
    {86, 170, 64},   // green
    {196, 72, 54},   // red
    {236, 200, 80},  // yellow
    {110, 90, 200},  // violet
    {222, 128, 48},  // orange
    {150, 150, 150}, // gray
    {170, 90, 140},  // magenta
    {110, 70, 30},   // brown
    {240, 160, 200}, // pink
    {90, 120, 40},   // olive
    {250, 250, 240}, // near-white
    {60, 60, 110},   // navy
    {180, 210, 140}, // pale green
    {120, 40, 60},   // maroon
    {230, 230, 60},  // bright yellow
    {40, 40, 40},    // near-black
};
constexpr size_t kCsPaletteSize = sizeof(kCsPalette) / sizeof(kCsPalette[0]);

}  // namespace

Image visualize_overlay(const Image& image, const LabelMap& labels, const Taxonomy& tax,
                        uint64_t seed) {
  if (image.width != labels.width || image.height != labels.height) {
    throw DimensionError("visualize: image " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " vs labels " +
                         std::to_string(labels.width) + "x" + std::to_string(labels.height));
  }
  // per-image random cyan shade for every region id present
  std::map<uint16_t, std::array<uint8_t, 3>> region_color;
  Rng rng(seed);
  const size_t num_cs = tax.num_cs();
  for (uint16_t code : labels.codes) {
    if (is_void_code(code, tax) || code < num_cs) continue;
    if (region_color.count(code)) continue;
    const double g = 0.55 + 0.40 * rng.uniform();
    const double b = 0.60 + 0.38 * rng.uniform();
    const double r = 0.10 * rng.uniform();
    region_color[code] = {static_cast<uint8_t>(std::lround(r * 255.0)),
                          static_cast<uint8_t>(std::lround(g * 255.0)),
                          static_cast<uint8_t>(std::lround(b * 255.0))};
  }

  Image out = image;
  constexpr double kAlpha = 0.55;
  for (size_t i = 0; i < labels.size(); ++i) {
    const uint16_t code = labels.codes[i];
    if (is_void_code(code, tax)) continue;
    const uint8_t* color = nullptr;
    if (code < num_cs) {
      color = kCsPalette[code % kCsPaletteSize];
    } else {
      color = region_color[code].data();
    }
    for (size_t c = 0; c < 3; ++c) {
      const double blended =
          (1.0 - kAlpha) * static_cast<double>(out.rgb[i * 3 + c]) + kAlpha * color[c];
      out.rgb[i * 3 + c] = static_cast<uint8_t>(std::lround(blended));
    }
  }
  return out;
}

}  // namespace trinity
