#include "geolab/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace geolab::nn {

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  for (auto& [_, p] : store) {
    if (!p.trainable) continue;
    ++p.step;
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    if (cfg.weight_decay != 0) p.value *= 1.0 - cfg.lr * cfg.weight_decay;
    p.value.array() -= cfg.lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + cfg.eps);
  }
}

double linear_decay_lr(double base, long step, long total_steps) {
  if (total_steps <= 0) return base;
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return base * std::clamp(frac, 0.0, 1.0);
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
  double sq = 0;
  for (const auto& [_, p] : store)
    if (p.trainable) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, p] : store)
      if (p.trainable) p.grad *= s;
  }
  return norm;
}

}  // namespace geolab::nn
