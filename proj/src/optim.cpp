#include "trinity/optim.hpp"

#include <cmath>

#include "trinity/error.hpp"

namespace trinity {

void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
               const AdamConfig& cfg) {
  const size_t n = param.size();
  if (grad.size() != n) {
    throw DimensionError("adam_step: grad size " + std::to_string(grad.size()) +
                         " vs param size " + std::to_string(n));
  }
  if (state.step == 0) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  } else if (state.m.size() != n || state.v.size() != n) {
    throw DimensionError("adam_step: state size " + std::to_string(state.m.size()) +
                         " vs param size " + std::to_string(n));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto& values = param.mutable_values();
  for (size_t i = 0; i < n; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

}  // namespace trinity
