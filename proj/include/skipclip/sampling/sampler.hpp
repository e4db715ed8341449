#pragma once

// Context / target / negative sampling and the per-example augmentations.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "skipclip/rng.hpp"
#include "skipclip/videoio/video.hpp"

namespace skipclip::sampling {

using numerics::Tensor;
using videoio::Video;

struct SampleSpec {
  std::size_t context_frames = 16;  // K
  std::size_t num_targets = 8;      // M
  std::size_t target_rate = 4;      // r
  std::size_t target_length = 1;    // d
  std::size_t num_negatives = 8;

  /// Frames spanned from the first context frame to the last target frame.
  std::size_t window() const { return context_frames + num_targets * target_rate + target_length - 1; }
  /// Shortest video admitting a seek.
  std::size_t min_frames() const { return window() + 1; }
};

void validate(const SampleSpec& spec);

struct AugmentationSpec {
  double reverse_prob = 0.5;
  double hflip_prob = 0.5;
  std::size_t crop_height = 32;
  std::size_t crop_width = 32;
  bool random_crop = true;  // false: centered crop
  bool rotation_enabled = true;
};

/// Augmentation choices drawn once per example.
struct AugmentationRecord {
  bool reversed = false;
  bool flipped = false;
  std::size_t crop_y = 0;
  std::size_t crop_x = 0;
  std::size_t crop_height = 0;
  std::size_t crop_width = 0;
};

struct SampledClips {
  Tensor context;                   // (K, C, H, W)
  std::vector<Tensor> targets;      // M x (d, C, H, W), temporal order
  std::vector<std::size_t> target_starts;
  std::size_t seek = 0;             // t
};

struct FrameSource {
  std::string video_id;
  std::size_t frame = 0;
};

struct NegativeSet {
  std::vector<Tensor> frames;  // (1, C, H, W) each
  std::vector<FrameSource> sources;
};

struct TrainingExample {
  Tensor context;                  // (K, C, h, w)
  std::vector<Tensor> targets;     // M x (d, C, h, w)
  std::vector<Tensor> negatives;   // num_negatives x (d, C, h, w)
  std::vector<Tensor> rotation_inputs;       // M x (C, h, w), rotated targets
  std::vector<std::size_t> rotation_labels;  // quarter turns in {0,1,2,3}
  std::size_t seek = 0;
  std::vector<std::size_t> target_starts;
  std::string video_id;
  std::vector<FrameSource> negative_sources;
  AugmentationRecord augmentation;
};

/// Context and targets for a fixed seek t; requires t + window <= N.
SampledClips sample_at(const Video& video, const SampleSpec& spec, std::size_t seek);

/// Uniform seek over {0, ..., N - window - 1}.
SampledClips seek_and_sample(const Video& video, const SampleSpec& spec, Rng& rng);

/// Single frames from uniformly chosen videos other than `exclude_id`.
NegativeSet sample_negatives(std::span<const Video> videos, const std::string& exclude_id,
                             const SampleSpec& spec, Rng& rng);

/// Draws one flip and crop decision (reversal is the caller's business).
AugmentationRecord draw_augmentation(std::size_t height, std::size_t width, const AugmentationSpec& spec,
                                     Rng& rng);

/// Applies a recorded flip and crop to every frame of an (F, C, H, W) clip.
Tensor apply_augmentation(const Tensor& clip, const AugmentationRecord& record);

struct AugmentedClips {
  Tensor context;
  std::vector<Tensor> targets;
  AugmentationRecord record;
};

/// One crop window and flip decision applied identically to context and targets.
AugmentedClips augment(const Tensor& context, std::span<const Tensor> targets, const AugmentationSpec& spec,
                       Rng& rng);

/// Counter-clockwise rotation of a (C, h, w) frame by k quarter turns.
Tensor rotate_frame(const Tensor& frame, std::size_t k);

/// Full pretext sample from video `index`: optional reversal, seek, negatives,
/// augmentation (shared by negatives) and rotation copies of the targets.
TrainingExample make_example(std::span<const Video> videos, std::size_t index, const SampleSpec& spec,
                             const AugmentationSpec& aug, Rng& rng);

}  // namespace skipclip::sampling
