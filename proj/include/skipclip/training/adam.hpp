#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "skipclip/numerics/param_set.hpp"

namespace skipclip::training {

using numerics::ParamSet;

enum class WeightDecayMode {
  kDecoupled,  // theta -= lr * wd * theta before the Adam delta
  kCoupled,    // g += wd * theta
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  WeightDecayMode weight_decay_mode = WeightDecayMode::kDecoupled;
};

struct AdamState {
  ParamSet<float> m;
  ParamSet<float> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParamSet<float>& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update of every parameter `trainable` accepts
/// (all when empty). The step counter advances once per call.
void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg = {},
               const std::function<bool(const std::string&)>& trainable = {});

}  // namespace skipclip::training
