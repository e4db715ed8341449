#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "skipclip/numerics/tensor.hpp"

namespace skipclip::videoio {

using numerics::Tensor;

/// Frames (N, C, H, W) with values in [0, 1].
struct Video {
  Tensor frames;
  std::string id;
  std::optional<std::size_t> motion_class;

  std::size_t num_frames() const { return frames.dim(0); }
  std::size_t channels() const { return frames.dim(1); }
  std::size_t height() const { return frames.dim(2); }
  std::size_t width() const { return frames.dim(3); }

  /// One frame as (C, H, W).
  Tensor frame(std::size_t index) const;
  /// Frames [begin, end) as (end - begin, C, H, W).
  Tensor clip(std::size_t begin, std::size_t end) const;
  /// Same video with the frame order reversed.
  Video reversed() const;
};

/// Checks rank, N >= 1 and the [0, 1] value range (with 1e-6 slack).
void validate_video(const Video& video);

void save_video(const Video& video, const std::filesystem::path& path);
/// The id defaults to the file stem; motion_class comes from the manifest.
Video load_video(const std::filesystem::path& path);

}  // namespace skipclip::videoio
