#pragma once

#include "geolab/nn/tensor.hpp"

namespace geolab::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One AdamW update over every trainable parameter: bias-corrected moments
/// plus decoupled weight decay (p -= lr * wd * p). Gradients are left as-is.
void adam_step(ParameterStore& store, const AdamConfig& cfg);

/// Linearly decays from `base` at step 0 to 0 at `total_steps`.
double linear_decay_lr(double base, long step, long total_steps);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterStore& store, double max_norm);

}  // namespace geolab::nn
