#include "skipclip/evaluation/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/ops.hpp"
#include "skipclip/numerics/skt.hpp"

namespace skipclip::evaluation {

namespace {

void write_pgm(const std::vector<unsigned char>& pixels, std::size_t height, std::size_t width,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

unsigned char to_byte(double unit) {
  return static_cast<unsigned char>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

}  // namespace

numerics::Tensor heatmap_grid(const numerics::Tensor& h, const numerics::Tensor& z) {
  return numerics::cell_cosines(h, z);
}

void write_heatmap_pgm(const numerics::Tensor& grid, std::size_t height, std::size_t width,
                       const std::filesystem::path& path) {
  if (grid.rank() != 2) throw ShapeError("heatmap grid must be (H, W)");
  const std::size_t gh = grid.dim(0), gw = grid.dim(1);
  std::vector<unsigned char> pixels(height * width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t cy = y * gh / height, cx = x * gw / width;
      pixels[y * width + x] = to_byte((grid[cy * gw + cx] + 1.0) / 2.0);
    }
  write_pgm(pixels, height, width, path);
}

void write_frame_pgm(const numerics::Tensor& frame, const std::filesystem::path& path) {
  if (frame.rank() != 3) throw ShapeError("frame must be (C, h, w)");
  const std::size_t h = frame.dim(1), w = frame.dim(2);
  std::vector<unsigned char> pixels(h * w);
  for (std::size_t i = 0; i < h * w; ++i) pixels[i] = to_byte(frame[i]);
  write_pgm(pixels, h, w, path);
}

HeatmapFiles export_heatmap(const numerics::Tensor& grid, std::size_t height, std::size_t width,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  HeatmapFiles files{dir / "heatmap.pgm", dir / "heatmap_grid.skt"};
  write_heatmap_pgm(grid, height, width, files.image);
  numerics::save_skt(files.grid, grid);
  return files;
}

}  // namespace skipclip::evaluation
