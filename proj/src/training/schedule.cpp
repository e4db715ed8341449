#include "skipclip/training/schedule.hpp"

#include <algorithm>

#include "skipclip/errors.hpp"

namespace skipclip::training {

Schedule pretrain_reference_schedule() { return Schedule{3e-4, 0.1, 200, std::nullopt, 1e-7}; }

Schedule finetune_reference_schedule() { return Schedule{5e-4, 0.5, 15, 60, 1e-2}; }

void validate(const Schedule& s) {
  if (!(s.base_lr > 0.0)) throw ConfigError("schedule: base_lr must be > 0");
  if (!(s.decay_factor > 0.0 && s.decay_factor <= 1.0)) throw ConfigError("schedule: decay_factor must be in (0, 1]");
  if (s.decay_every == 0) throw ConfigError("schedule: decay_every must be >= 1");
  if (!(s.weight_decay >= 0.0)) throw ConfigError("schedule: weight_decay must be >= 0");
}

double lr_at_epoch(const Schedule& s, std::size_t epoch) {
  validate(s);
  const std::size_t capped = s.decay_until ? std::min(epoch, *s.decay_until) : epoch;
  const std::size_t decays = capped / s.decay_every;
  double lr = s.base_lr;
  for (std::size_t i = 0; i < decays; ++i) lr *= s.decay_factor;
  return lr;
}

}  // namespace skipclip::training
