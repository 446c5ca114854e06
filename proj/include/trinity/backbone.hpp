#pragma once

#include <cstdint>

#include "trinity/dataset_io.hpp"
#include "trinity/tensor.hpp"

namespace trinity {

struct BackboneConfig {
  size_t patch_size = 8;
  size_t feature_dim = 64;  // D
  uint64_t seed = 0;
};

// Patch-level feature map produced by the frozen encoder.
struct FeatureMap {
  Tensor features;  // [Hf, Wf, D], never requires grad
  size_t source_h = 0;
  size_t source_w = 0;

  size_t hf() const { return features.dim(0); }
  size_t wf() const { return features.dim(1); }
  size_t dim() const { return features.dim(2); }
};

// Frozen image encoder: per-patch linear projection with a seeded random
// matrix plus fixed sinusoidal position encoding. Carries no trainable
// parameters and never participates in a gradient graph.
class Backbone {
 public:
  explicit Backbone(BackboneConfig cfg);

  FeatureMap encode_image(const Image& image) const;
  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  std::vector<double> projection_;  // [patch*patch*3, D], row-major
};

// Convenience wrapper constructing the frozen projection on the fly.
FeatureMap encode_image(const Image& image, const BackboneConfig& cfg);

}  // namespace trinity
