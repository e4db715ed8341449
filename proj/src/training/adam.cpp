#include "skipclip/training/adam.hpp"

#include <cmath>

#include "skipclip/errors.hpp"

namespace skipclip::training {

AdamState AdamState::zeros_like(const ParamSet<float>& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg,
               const std::function<bool(const std::string&)>& trainable) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ConfigError("adam_step: parameter, gradient and moment sets differ in size");
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& g = grads.entries()[p];
    if (!g.tensor.all_finite()) throw NumericalError("non-finite gradient in parameter '" + g.name + "'");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& param = params.entries()[p];
    const auto& grad = grads.entries()[p];
    if (grad.name != param.name || grad.tensor.shape() != param.tensor.shape())
      throw ConfigError("adam_step: gradient for '" + param.name + "' does not align");
    if (trainable && !trainable(param.name)) continue;
    auto& m = state.m.entries()[p].tensor;
    auto& v = state.v.entries()[p].tensor;
    for (std::size_t i = 0; i < param.tensor.size(); ++i) {
      double theta = param.tensor[i];
      double g = grad.tensor[i];
      if (cfg.weight_decay_mode == WeightDecayMode::kCoupled)
        g += weight_decay * theta;
      else
        theta -= lr * weight_decay * theta;
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      theta -= lr * (mi / correct1) / (std::sqrt(vi / correct2) + cfg.epsilon);
      param.tensor[i] = static_cast<float>(theta);
    }
  }
}

}  // namespace skipclip::training
