#include "trinity/backbone.hpp"

#include <cmath>

#include "trinity/error.hpp"
#include "trinity/rng.hpp"

namespace trinity {

Backbone::Backbone(BackboneConfig cfg) : cfg_(cfg) {
  if (cfg_.patch_size == 0 || cfg_.feature_dim == 0) {
    throw ConfigError("backbone: patch_size and feature_dim must be positive");
  }
  const size_t in_dim = cfg_.patch_size * cfg_.patch_size * 3;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in_dim));
  Rng rng(cfg_.seed);
  projection_.resize(in_dim * cfg_.feature_dim);
  for (auto& w : projection_) w = rng.normal(0.0, stddev);
}

namespace {

// Fixed 2-D sinusoidal encoding; dimension j rotates between sin/cos of the
// row and column coordinate at a frequency decaying with j.
void add_position_encoding(std::vector<double>& feature, size_t row, size_t col, size_t d) {
  for (size_t j = 0; j < d; ++j) {
    const size_t pair = j / 4;
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(4 * pair) /
                                 static_cast<double>(d));
    const double coord = (j % 4 < 2) ? static_cast<double>(row) : static_cast<double>(col);
    feature[j] += (j % 2 == 0) ? std::sin(coord * freq) : std::cos(coord * freq);
  }
}

}  // namespace

FeatureMap Backbone::encode_image(const Image& image) const {
  const size_t p = cfg_.patch_size;
  if (image.width == 0 || image.height == 0 || image.width % p != 0 || image.height % p != 0) {
    throw DimensionError("encode_image: dims " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " not divisible by patch size " +
                         std::to_string(p));
  }
  const size_t hf = image.height / p;
  const size_t wf = image.width / p;
  const size_t d = cfg_.feature_dim;
  const size_t in_dim = p * p * 3;

  std::vector<double> features(hf * wf * d, 0.0);
  std::vector<double> patch(in_dim);
  std::vector<double> cell(d);
  for (size_t py = 0; py < hf; ++py) {
    for (size_t px = 0; px < wf; ++px) {
      size_t idx = 0;
      for (size_t y = 0; y < p; ++y) {
        for (size_t x = 0; x < p; ++x) {
          for (size_t c = 0; c < 3; ++c) {
            patch[idx++] = image.at(px * p + x, py * p + y, c) / 255.0;
          }
        }
      }
      std::fill(cell.begin(), cell.end(), 0.0);
      for (size_t i = 0; i < in_dim; ++i) {
        const double v = patch[i];
        if (v == 0.0) continue;
        const double* prow = projection_.data() + i * d;
        for (size_t j = 0; j < d; ++j) cell[j] += v * prow[j];
      }
      add_position_encoding(cell, py, px, d);
      std::copy(cell.begin(), cell.end(), features.begin() + (py * wf + px) * d);
    }
  }

  FeatureMap fm;
  fm.features = Tensor({hf, wf, d}, std::move(features));
  fm.source_h = image.height;
  fm.source_w = image.width;
  return fm;
}

FeatureMap encode_image(const Image& image, const BackboneConfig& cfg) {
  return Backbone(cfg).encode_image(image);
}

}  // namespace trinity
