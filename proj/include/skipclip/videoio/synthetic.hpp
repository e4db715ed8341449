#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "skipclip/videoio/manifest.hpp"

namespace skipclip::videoio {

/// Parameters of the moving-sprite corpus.
///
/// Motion class = direction * num_speed_buckets + speed bucket. Directions are
/// evenly spaced angles; speeds are evenly spaced over [speed_min, speed_max].
/// Every trajectory stays inside the frame shrunk by `safe_margin` on each
/// side, so sprites never bounce and a centered crop of size
/// (H - 2 * safe_margin) always sees the whole sprite.
struct SyntheticSpec {
  std::size_t num_videos = 160;
  std::size_t frames_per_video = 64;
  std::size_t height = 36;
  std::size_t width = 36;
  std::size_t channels = 1;
  std::size_t num_motion_classes = 16;
  std::size_t num_speed_buckets = 2;
  double sprite_size = 5.0;
  double speed_min = 0.2;  // pixels per frame
  double speed_max = 0.4;
  std::size_t safe_margin = 2;
  /// Shortest video the default sampler accepts (K + M*r + d).
  std::size_t min_frames = 49;
  std::uint64_t seed = 0;
};

struct SpriteMotion {
  std::size_t motion_class = 0;
  double vx = 0.0, vy = 0.0;  // pixels per frame; +x right, +y down
  double x0 = 0.0, y0 = 0.0;  // top-left corner at frame 0
};

void validate(const SyntheticSpec& spec);

std::size_t num_directions(const SyntheticSpec& spec);
/// Velocity of a motion class.
std::array<double, 2> class_velocity(const SyntheticSpec& spec, std::size_t motion_class);

/// Renders video `index` of a split. A pure function of (spec, split, index).
Video render_video(const SyntheticSpec& spec, Split split, std::size_t index,
                   SpriteMotion* motion = nullptr);

/// Writes `count` videos under dir/<split>/ and returns their manifest (also
/// written to dir/<split>.json).
DatasetManifest generate_split(const SyntheticSpec& spec, Split split, std::size_t count,
                               const std::filesystem::path& dir);

struct GeneratedCorpus {
  DatasetManifest train, test;
};

/// Train split of spec.num_videos and a test split of `test_videos`.
GeneratedCorpus generate_synthetic_dataset(const SyntheticSpec& spec, std::size_t test_videos,
                                           const std::filesystem::path& dir);

}  // namespace skipclip::videoio
