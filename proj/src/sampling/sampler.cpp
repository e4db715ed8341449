#include "skipclip/sampling/sampler.hpp"

#include <algorithm>

#include "skipclip/errors.hpp"

namespace skipclip::sampling {

using numerics::Shape;

void validate(const SampleSpec& spec) {
  if (spec.context_frames < 1) throw ConfigError("sample: context_frames (K) must be >= 1");
  if (spec.num_targets < 2) throw ConfigError("sample: num_targets (M) must be >= 2 for ranking");
  if (spec.target_rate < 1) throw ConfigError("sample: target_rate (r) must be >= 1");
  if (spec.target_length < 1) throw ConfigError("sample: target_length (d) must be >= 1");
  if (spec.num_negatives < 1) throw ConfigError("sample: num_negatives must be >= 1");
}

SampledClips sample_at(const Video& video, const SampleSpec& spec, std::size_t seek) {
  validate(spec);
  if (seek + spec.window() > video.num_frames())
    throw DataError("video '" + video.id + "' has " + std::to_string(video.num_frames()) +
                    " frames; seek " + std::to_string(seek) + " needs " + std::to_string(seek + spec.window()));
  SampledClips out;
  out.seek = seek;
  out.context = video.clip(seek, seek + spec.context_frames);
  const std::size_t last_context = seek + spec.context_frames - 1;
  for (std::size_t j = 1; j <= spec.num_targets; ++j) {
    const std::size_t start = last_context + j * spec.target_rate;
    out.target_starts.push_back(start);
    out.targets.push_back(video.clip(start, start + spec.target_length));
  }
  return out;
}

SampledClips seek_and_sample(const Video& video, const SampleSpec& spec, Rng& rng) {
  validate(spec);
  if (video.num_frames() < spec.min_frames())
    throw DataError("video '" + video.id + "' is too short: " + std::to_string(video.num_frames()) +
                    " frames, at least " + std::to_string(spec.min_frames()) + " required");
  const std::size_t seeks = video.num_frames() - spec.window();
  return sample_at(video, spec, rng.uniform_index(seeks));
}

NegativeSet sample_negatives(std::span<const Video> videos, const std::string& exclude_id, const SampleSpec& spec,
                             Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < videos.size(); ++i)
    if (videos[i].id != exclude_id) eligible.push_back(i);
  if (videos.size() < 2 || eligible.empty()) throw DataError("no negative source available");
  NegativeSet out;
  for (std::size_t k = 0; k < spec.num_negatives; ++k) {
    const Video& v = videos[eligible[rng.uniform_index(eligible.size())]];
    const std::size_t f = rng.uniform_index(v.num_frames() - spec.target_length + 1);
    out.frames.push_back(v.clip(f, f + spec.target_length));
    out.sources.push_back(FrameSource{v.id, f});
  }
  return out;
}

AugmentationRecord draw_augmentation(std::size_t height, std::size_t width, const AugmentationSpec& spec,
                                     Rng& rng) {
  if (spec.crop_height == 0 || spec.crop_width == 0 || spec.crop_height > height || spec.crop_width > width)
    throw ConfigError("augment: crop " + std::to_string(spec.crop_height) + "x" + std::to_string(spec.crop_width) +
                      " does not fit frame " + std::to_string(height) + "x" + std::to_string(width));
  AugmentationRecord rec;
  rec.crop_height = spec.crop_height;
  rec.crop_width = spec.crop_width;
  rec.flipped = rng.bernoulli(spec.hflip_prob);
  if (spec.random_crop) {
    rec.crop_y = rng.uniform_index(height - spec.crop_height + 1);
    rec.crop_x = rng.uniform_index(width - spec.crop_width + 1);
  } else {
    rec.crop_y = (height - spec.crop_height) / 2;
    rec.crop_x = (width - spec.crop_width) / 2;
  }
  return rec;
}

Tensor apply_augmentation(const Tensor& clip, const AugmentationRecord& rec) {
  if (clip.rank() != 4) throw ShapeError("apply_augmentation: clip must be (F, C, H, W)");
  const std::size_t f = clip.dim(0), c = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
  if (rec.crop_y + rec.crop_height > h || rec.crop_x + rec.crop_width > w)
    throw ConfigError("augment: crop window exceeds frame");
  const std::size_t ch = rec.crop_height, cw = rec.crop_width;
  std::vector<float> out(f * c * ch * cw);
  for (std::size_t p = 0; p < f * c; ++p)
    for (std::size_t y = 0; y < ch; ++y)
      for (std::size_t x = 0; x < cw; ++x) {
        const std::size_t sx = rec.crop_x + (rec.flipped ? cw - 1 - x : x);
        out[(p * ch + y) * cw + x] = clip[(p * h + rec.crop_y + y) * w + sx];
      }
  return Tensor({f, c, ch, cw}, std::move(out));
}

AugmentedClips augment(const Tensor& context, std::span<const Tensor> targets, const AugmentationSpec& spec,
                       Rng& rng) {
  AugmentedClips out;
  out.record = draw_augmentation(context.dim(2), context.dim(3), spec, rng);
  out.context = apply_augmentation(context, out.record);
  for (const Tensor& t : targets) out.targets.push_back(apply_augmentation(t, out.record));
  return out;
}

Tensor rotate_frame(const Tensor& frame, std::size_t k) {
  if (frame.rank() != 3) throw ShapeError("rotate_frame: frame must be (C, h, w)");
  if (k > 3) throw ConfigError("rotate_frame: k must be in {0,1,2,3}");
  const std::size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  if (k % 2 == 1 && h != w) throw ShapeError("rotate_frame: odd quarter turns need a square frame");
  Tensor out(Shape{c, k % 2 == 1 ? w : h, k % 2 == 1 ? h : w});
  for (std::size_t p = 0; p < c; ++p)
    for (std::size_t row = 0; row < h; ++row)
      for (std::size_t col = 0; col < w; ++col) {
        std::size_t r2 = row, c2 = col;
        switch (k) {
          case 1: r2 = w - 1 - col; c2 = row; break;
          case 2: r2 = h - 1 - row; c2 = w - 1 - col; break;
          case 3: r2 = col; c2 = h - 1 - row; break;
          default: break;
        }
        out[(p * h + r2) * w + c2] = frame[(p * h + row) * w + col];
      }
  return out;
}

TrainingExample make_example(std::span<const Video> videos, std::size_t index, const SampleSpec& spec,
                             const AugmentationSpec& aug, Rng& rng) {
  const Video& source = videos[index];
  const bool reversed = rng.bernoulli(aug.reverse_prob);
  const Video reversed_video = reversed ? source.reversed() : Video{};
  const Video& video = reversed ? reversed_video : source;

  SampledClips clips = seek_and_sample(video, spec, rng);
  NegativeSet negatives = sample_negatives(videos, source.id, spec, rng);
  AugmentedClips a = augment(clips.context, clips.targets, aug, rng);
  a.record.reversed = reversed;

  TrainingExample ex;
  ex.context = std::move(a.context);
  ex.targets = std::move(a.targets);
  for (const Tensor& n : negatives.frames) ex.negatives.push_back(apply_augmentation(n, a.record));
  ex.negative_sources = std::move(negatives.sources);
  ex.seek = clips.seek;
  ex.target_starts = std::move(clips.target_starts);
  ex.video_id = source.id;
  ex.augmentation = a.record;
  if (aug.rotation_enabled) {
    for (const Tensor& t : ex.targets) {
      const std::size_t k = rng.uniform_index(4);
      ex.rotation_labels.push_back(k);
      ex.rotation_inputs.push_back(rotate_frame(t.slice0(0, 1).reshaped({t.dim(1), t.dim(2), t.dim(3)}), k));
    }
  }
  return ex;
}

}  // namespace skipclip::sampling
