#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "skipclip/encoders/encoders.hpp"
#include "skipclip/objectives/objectives.hpp"
#include "skipclip/sampling/sampler.hpp"
#include "skipclip/training/adam.hpp"
#include "skipclip/training/checkpoint.hpp"
#include "skipclip/training/schedule.hpp"

namespace skipclip::training {

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t checkpoint_every = 0;  // epochs; 0 keeps only the final checkpoint
  Schedule schedule{1e-3, 0.1, 200, std::nullopt, 1e-7};
  AdamConfig adam;
};

struct PretrainSetup {
  sampling::SampleSpec sample;
  sampling::AugmentationSpec augment;
  encoders::EncoderConfig encoder;
  objectives::LossConfig loss;
  PretrainConfig run;
  std::string config_json;  // recorded into checkpoints
};

/// Batch means of one optimizer step.
struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss_total = 0.0;
  double loss_rank = 0.0;
  double loss_contrastive = 0.0;
  double loss_rotation = 0.0;
  double mean_target_score = 0.0;
  std::optional<double> mean_negative_score;
};

std::string metrics_json(const StepMetrics& m);

using MetricsSink = std::function<void(const StepMetrics&)>;
using CheckpointSink = std::function<void(const Checkpoint&)>;

/// Fresh checkpoint at epoch 0: seeded parameters, zero Adam moments.
Checkpoint initial_checkpoint(const PretrainSetup& setup);

/// Runs epochs [start.epoch, setup.run.epochs): sample, augment, encode,
/// total_loss, backward, adam_step. Returns the checkpoint after the last epoch.
Checkpoint pretrain(std::span<const videoio::Video> videos, const PretrainSetup& setup, Checkpoint start,
                    const MetricsSink& on_step = {}, const CheckpointSink& on_checkpoint = {});

}  // namespace skipclip::training
