#pragma once

#include <cstdint>

#include "trinity/dataset_io.hpp"

namespace trinity {

// Semi-transparent label overlay: CS classes use a fixed palette, CA regions
// get per-image random shades of cyan, void pixels show the plain image.
Image visualize_overlay(const Image& image, const LabelMap& labels, const Taxonomy& tax,
                        uint64_t seed);

}  // namespace trinity
