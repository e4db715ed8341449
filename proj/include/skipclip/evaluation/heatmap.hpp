#pragma once

#include <filesystem>

#include "skipclip/numerics/tensor.hpp"

namespace skipclip::evaluation {

/// Per-cell cosine between aligned cells of two (C, H, W) grids, as (H, W).
/// Its mean (same reduction) is exactly the ranking score.
numerics::Tensor heatmap_grid(const numerics::Tensor& h, const numerics::Tensor& z);

/// Nearest-neighbour upsampling of an (H, W) grid of cosines in [-1, 1] to an
/// 8-bit binary PGM of size height x width.
void write_heatmap_pgm(const numerics::Tensor& grid, std::size_t height, std::size_t width,
                       const std::filesystem::path& path);

/// Writes channel 0 of a (C, h, w) frame in [0, 1] as a PGM.
void write_frame_pgm(const numerics::Tensor& frame, const std::filesystem::path& path);

struct HeatmapFiles {
  std::filesystem::path image;
  std::filesystem::path grid;
};

/// heatmap.pgm (upsampled) plus heatmap_grid.skt (raw grid) under dir.
HeatmapFiles export_heatmap(const numerics::Tensor& grid, std::size_t height, std::size_t width,
                            const std::filesystem::path& dir);

}  // namespace skipclip::evaluation
