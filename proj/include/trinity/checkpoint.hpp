#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trinity/tensor.hpp"

namespace trinity {

// Parameter checkpoint, bit-exact round trip.
// Layout: magic "TRIN", version u32 LE, tensor count u32 LE, then per tensor:
// name length u16 LE + UTF-8 name, rank u8, dims u32 LE each, values f64 LE.
constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

}  // namespace trinity
