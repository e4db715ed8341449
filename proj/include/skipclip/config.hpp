#pragma once

// Run configuration: one JSON document with sections
// {data, sample, augment, encoder, loss, optim, run}. Missing fields keep
// their defaults; unknown fields are rejected.

#include <cstdint>
#include <string>

#include "skipclip/encoders/encoders.hpp"
#include "skipclip/evaluation/finetune.hpp"
#include "skipclip/objectives/objectives.hpp"
#include "skipclip/sampling/sampler.hpp"
#include "skipclip/training/pretrain.hpp"
#include "skipclip/videoio/synthetic.hpp"

namespace skipclip {

struct DataConfig {
  videoio::SyntheticSpec synthetic;
  std::size_t test_videos = 64;
};

struct OptimConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  training::Schedule pretrain_schedule{1e-3, 0.1, 200, std::nullopt, 1e-7};
  training::AdamConfig adam;
  std::size_t finetune_epochs = 30;
  std::size_t finetune_batch_size = 16;
  training::Schedule finetune_schedule{2e-2, 0.5, 15, 60, 1e-2};
};

struct RunSection {
  std::string name = "skipclip";
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string out_dir;
  std::size_t threads = 1;
  std::size_t checkpoint_every = 0;
  std::size_t eval_examples = 500;
  std::string finetune_mode = "probe";
};

struct RunConfig {
  DataConfig data;
  sampling::SampleSpec sample;
  sampling::AugmentationSpec augment;
  encoders::EncoderConfig encoder;
  objectives::LossConfig loss;
  OptimConfig optim;
  RunSection run;

  /// Worker count after applying the deterministic flag.
  std::size_t effective_threads() const { return run.deterministic ? 1 : std::max<std::size_t>(run.threads, 1); }
};

/// Overlays a JSON document onto the defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

/// Cross-section consistency (crop vs frame, K vs encoder, class counts, ...).
void validate(const RunConfig& cfg);

videoio::SyntheticSpec synthetic_spec(const RunConfig& cfg);
training::PretrainSetup pretrain_setup(const RunConfig& cfg);
evaluation::FinetuneConfig finetune_config(const RunConfig& cfg);

}  // namespace skipclip
