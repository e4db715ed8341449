#pragma once

#include <cstddef>
#include <optional>

namespace skipclip::training {

/// Step decay: base_lr * decay_factor^(number of decay epochs passed).
struct Schedule {
  double base_lr = 3e-4;
  double decay_factor = 0.1;
  std::size_t decay_every = 200;
  std::optional<std::size_t> decay_until;  // no decays after this epoch
  double weight_decay = 1e-7;
};

/// Pre-training constants: lr 3e-4, x0.1 every 200 epochs, weight decay 1e-7.
Schedule pretrain_reference_schedule();
/// Fine-tuning constants: lr 5e-4, x0.5 every 15 epochs up to epoch 60, weight decay 1e-2.
Schedule finetune_reference_schedule();

void validate(const Schedule& schedule);
double lr_at_epoch(const Schedule& schedule, std::size_t epoch);

}  // namespace skipclip::training
