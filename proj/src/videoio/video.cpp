#include "skipclip/videoio/video.hpp"

#include <algorithm>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/skt.hpp"

namespace skipclip::videoio {

Tensor Video::frame(std::size_t index) const {
  if (index >= num_frames())
    throw DataError("frame " + std::to_string(index) + " out of range for video '" + id + "' with " +
                    std::to_string(num_frames()) + " frames");
  return frames.slice0(index, index + 1).reshaped({channels(), height(), width()});
}

Tensor Video::clip(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > num_frames())
    throw DataError("clip [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for video '" +
                    id + "'");
  return frames.slice0(begin, end);
}

Video Video::reversed() const {
  const std::size_t n = num_frames(), per = frames.size() / n;
  std::vector<float> data(frames.size());
  for (std::size_t f = 0; f < n; ++f)
    std::copy_n(frames.data().begin() + static_cast<std::ptrdiff_t>((n - 1 - f) * per), per,
                data.begin() + static_cast<std::ptrdiff_t>(f * per));
  return Video{Tensor(frames.shape(), std::move(data)), id, motion_class};
}

void validate_video(const Video& video) {
  if (video.frames.rank() != 4)
    throw DataError("video '" + video.id + "' must be (N, C, H, W), got " +
                    numerics::shape_string(video.frames.shape()));
  for (float v : video.frames.data())
    if (!(v >= -1e-6f && v <= 1.0f + 1e-6f))
      throw DataError("video '" + video.id + "' has a value outside [0, 1]");
}

void save_video(const Video& video, const std::filesystem::path& path) {
  validate_video(video);
  numerics::save_skt(path, video.frames);
}

Video load_video(const std::filesystem::path& path) {
  Video v{numerics::load_skt(path, 4), path.stem().string(), std::nullopt};
  return v;
}

}  // namespace skipclip::videoio
