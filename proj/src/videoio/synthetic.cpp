#include "skipclip/videoio/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skipclip/errors.hpp"
#include "skipclip/rng.hpp"

namespace skipclip::videoio {

namespace {

// Background: static value noise on a coarse lattice, bilinear upsampled.
constexpr std::size_t kLattice = 6;
constexpr float kBackgroundFloor = 0.05f;
constexpr float kBackgroundSpan = 0.15f;
// Illumination ramp, brightest at the top row, so a static frame has an upright orientation.
constexpr float kRampSpan = 0.1f;
// Sprite = square body plus a brighter cap over its upper half, so frames have
// an upright orientation. Background max + body + cap stays <= 1.
constexpr float kBodyGain = 0.45f;
constexpr float kCapGain = 0.25f;

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

std::size_t travel_range(const SyntheticSpec& s, std::size_t extent) {
  return extent - 2 * s.safe_margin;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.num_videos < 2) throw ConfigError("synthetic: num_videos must be at least 2");
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0)
    throw ConfigError("synthetic: frame dimensions must be positive");
  if (spec.frames_per_video < spec.min_frames)
    throw ConfigError("synthetic: frames_per_video " + std::to_string(spec.frames_per_video) +
                      " is below the sampler minimum of " + std::to_string(spec.min_frames) + " frames");
  if (spec.num_speed_buckets == 0 || spec.num_motion_classes == 0 ||
      spec.num_motion_classes % spec.num_speed_buckets != 0)
    throw ConfigError("synthetic: num_motion_classes must be a positive multiple of num_speed_buckets");
  if (!(spec.speed_min > 0.0) || spec.speed_max < spec.speed_min)
    throw ConfigError("synthetic: need 0 < speed_min <= speed_max");
  if (2 * spec.safe_margin >= std::min(spec.height, spec.width))
    throw ConfigError("synthetic: safe_margin leaves no room in the frame");
  const double room = static_cast<double>(std::min(travel_range(spec, spec.height), travel_range(spec, spec.width))) -
                      spec.sprite_size;
  const double travel = spec.speed_max * static_cast<double>(spec.frames_per_video - 1);
  if (!(spec.sprite_size > 0.0) || travel > room)
    throw ConfigError("synthetic: a sprite at speed " + std::to_string(spec.speed_max) + " travels " +
                      std::to_string(travel) + " px over " + std::to_string(spec.frames_per_video) +
                      " frames but only " + std::to_string(room) + " px fit inside the safe area");
}

std::size_t num_directions(const SyntheticSpec& spec) {
  return spec.num_motion_classes / spec.num_speed_buckets;
}

std::array<double, 2> class_velocity(const SyntheticSpec& spec, std::size_t motion_class) {
  const std::size_t dirs = num_directions(spec);
  const std::size_t dir = motion_class / spec.num_speed_buckets;
  const std::size_t bucket = motion_class % spec.num_speed_buckets;
  const double speed = spec.num_speed_buckets == 1
                           ? spec.speed_min
                           : spec.speed_min + (spec.speed_max - spec.speed_min) * static_cast<double>(bucket) /
                                                  static_cast<double>(spec.num_speed_buckets - 1);
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(dir) / static_cast<double>(dirs);
  return {speed * std::cos(angle), speed * std::sin(angle)};
}

Video render_video(const SyntheticSpec& spec, Split split, std::size_t index, SpriteMotion* motion) {
  validate(spec);
  Rng rng = Rng::derive(spec.seed, "synthetic", split == Split::kTrain ? 0 : 1, index);
  const std::size_t n = spec.frames_per_video, c = spec.channels, h = spec.height, w = spec.width;

  SpriteMotion m;
  m.motion_class = index % spec.num_motion_classes;
  const auto v = class_velocity(spec, m.motion_class);
  m.vx = v[0];
  m.vy = v[1];
  const double s = spec.sprite_size;
  const double last = static_cast<double>(n - 1);
  auto place = [&](double vel, std::size_t extent) {
    const double lo = static_cast<double>(spec.safe_margin);
    const double hi = static_cast<double>(extent - spec.safe_margin) - s;
    const double travel = vel * last;
    const double start_lo = lo - std::min(0.0, travel);
    const double start_hi = hi - std::max(0.0, travel);
    return rng.uniform(start_lo, start_hi);
  };
  m.x0 = place(m.vx, w);
  m.y0 = place(m.vy, h);

  std::vector<float> lattice(c * kLattice * kLattice);
  for (auto& x : lattice) x = static_cast<float>(rng.uniform01());
  std::vector<float> background(c * h * w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double gy = static_cast<double>(y) * (kLattice - 1) / static_cast<double>(std::max<std::size_t>(h - 1, 1));
        const double gx = static_cast<double>(x) * (kLattice - 1) / static_cast<double>(std::max<std::size_t>(w - 1, 1));
        const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), kLattice - 2);
        const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), kLattice - 2);
        const double fy = gy - static_cast<double>(y0), fx = gx - static_cast<double>(x0);
        const float* L = lattice.data() + ch * kLattice * kLattice;
        const double val = (1 - fy) * ((1 - fx) * L[y0 * kLattice + x0] + fx * L[y0 * kLattice + x0 + 1]) +
                           fy * ((1 - fx) * L[(y0 + 1) * kLattice + x0] + fx * L[(y0 + 1) * kLattice + x0 + 1]);
        const double ramp = 1.0 - static_cast<double>(y) / static_cast<double>(std::max<std::size_t>(h - 1, 1));
        background[(ch * h + y) * w + x] =
            kBackgroundFloor + kBackgroundSpan * static_cast<float>(val) + kRampSpan * static_cast<float>(ramp);
      }

  std::vector<float> data(n * c * h * w);
  std::vector<double> cov_x(w), cov_y(h), cov_cap(h);
  for (std::size_t f = 0; f < n; ++f) {
    const double px = m.x0 + m.vx * static_cast<double>(f);
    const double py = m.y0 + m.vy * static_cast<double>(f);
    for (std::size_t x = 0; x < w; ++x) cov_x[x] = overlap(static_cast<double>(x), static_cast<double>(x) + 1, px, px + s);
    for (std::size_t y = 0; y < h; ++y) {
      cov_y[y] = overlap(static_cast<double>(y), static_cast<double>(y) + 1, py, py + s);
      cov_cap[y] = overlap(static_cast<double>(y), static_cast<double>(y) + 1, py, py + 0.5 * s);
    }
    float* out = data.data() + f * c * h * w;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t i = (ch * h + y) * w + x;
          out[i] = background[i] + kBodyGain * static_cast<float>(cov_y[y] * cov_x[x]) +
                   kCapGain * static_cast<float>(cov_cap[y] * cov_x[x]);
        }
  }
  if (motion) *motion = m;
  const std::string prefix = split == Split::kTrain ? "train_" : "test_";
  std::string id = std::to_string(index);
  id.insert(0, id.size() < 5 ? 5 - id.size() : 0, '0');
  return Video{numerics::Tensor({n, c, h, w}, std::move(data)), prefix + id, m.motion_class};
}

DatasetManifest generate_split(const SyntheticSpec& spec, Split split, std::size_t count,
                               const std::filesystem::path& dir) {
  validate(spec);
  const std::string name = to_string(split);
  std::filesystem::create_directories(dir / name);
  DatasetManifest manifest{split, spec.seed, {}};
  for (std::size_t i = 0; i < count; ++i) {
    Video v = render_video(spec, split, i);
    const std::string rel = name + "/" + v.id + ".skt";
    save_video(v, dir / rel);
    manifest.entries.push_back(ManifestEntry{rel, v.num_frames(), v.channels(), v.height(), v.width(), v.motion_class});
  }
  write_manifest(manifest, dir / (name + ".json"));
  return manifest;
}

GeneratedCorpus generate_synthetic_dataset(const SyntheticSpec& spec, std::size_t test_videos,
                                           const std::filesystem::path& dir) {
  GeneratedCorpus corpus;
  corpus.train = generate_split(spec, Split::kTrain, spec.num_videos, dir);
  corpus.test = generate_split(spec, Split::kTest, test_videos, dir);
  return corpus;
}

}  // namespace skipclip::videoio
