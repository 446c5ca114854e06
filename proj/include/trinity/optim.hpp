#pragma once

#include <cstdint>
#include <vector>

#include "trinity/tensor.hpp"

namespace trinity {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter moment estimates; zero-initialized on first use.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t step = 0;
};

// One Adam update with bias correction, applied in place to param values.
void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
               const AdamConfig& cfg);

}  // namespace trinity
