#include <fstream>
#include <iterator>
#include <set>

#include <gtest/gtest.h>

#include "skipclip/numerics/skt.hpp"
#include "skipclip/sampling/sampler.hpp"
#include "skipclip/videoio/manifest.hpp"
#include "skipclip/videoio/synthetic.hpp"
#include "test_util.hpp"

namespace skipclip::testing {
namespace {

using videoio::DatasetManifest;
using videoio::ManifestEntry;
using videoio::Split;
using videoio::SyntheticSpec;
using videoio::Video;

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

template <typename Fn>
std::string error_text(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

// ---- rng --------------------------------------------------------------------

TEST(Rng, DeriveIsStableAndLabelSensitive) {
  Rng a = Rng::derive(7, "sampler", 3), b = Rng::derive(7, "sampler", 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng::derive(7, "sampler", 3).next(), Rng::derive(7, "negatives", 3).next());
  EXPECT_NE(Rng::derive(7, "sampler", 3).next(), Rng::derive(7, "sampler", 4).next());
  EXPECT_NE(Rng::derive(7, "sampler", 3, 0).next(), Rng::derive(7, "sampler", 3, 1).next());
  EXPECT_NE(Rng::derive(7, "sampler").next(), Rng::derive(8, "sampler").next());
}

TEST(Rng, Mt19937_64ReferenceOutput) {
  // The standard pins the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next();
  EXPECT_EQ(x, 9981545732273789042ull);
}

TEST(Rng, DrawsStayInRange) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(rng.uniform_index(7), 7u);
    const double u = rng.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_FALSE(rng.bernoulli(0.0));
  EXPECT_TRUE(rng.bernoulli(1.0));
  EXPECT_THROW(rng.uniform_index(0), std::invalid_argument);
}

TEST(Rng, StateRoundTrip) {
  Rng rng(3);
  rng.next();
  const std::string s = rng.state();
  const std::uint64_t expect = rng.next();
  Rng other(99);
  other.restore(s);
  EXPECT_EQ(other.next(), expect);
  EXPECT_THROW(other.restore("garbage"), DataError);
}

// ---- video files ------------------------------------------------------------

TEST(VideoFile, RoundTripIsBitIdentical) {
  Rng rng(1);
  const Video v = random_video("clip", 5, 2, 4, 3, rng);
  TempDir dir;
  videoio::save_video(v, dir / "clip.skt");
  const Video back = videoio::load_video(dir / "clip.skt");
  EXPECT_EQ(back.frames, v.frames);
  EXPECT_EQ(back.id, "clip");
}

TEST(VideoFile, DistinctErrorKinds) {
  Rng rng(2);
  TempDir dir;
  videoio::save_video(random_video("v", 3, 1, 4, 4, rng), dir / "v.skt");
  const std::string good = read_bytes(dir / "v.skt");
  auto code_of = [&](const std::string& bytes) {
    write_bytes(dir / "bad.skt", bytes);
    try {
      videoio::load_video(dir / "bad.skt");
    } catch (const numerics::SktError& e) {
      return e.code();
    }
    ADD_FAILURE() << "load succeeded";
    return numerics::SktErrorCode::kOpen;
  };
  EXPECT_EQ(code_of("XKT1" + good.substr(4)), numerics::SktErrorCode::kBadMagic);
  EXPECT_EQ(code_of(good.substr(0, good.size() - 6)), numerics::SktErrorCode::kTruncatedPayload);
  std::string grown = good;
  grown[5] = 4;  // header claims N = 4 with the payload of 3 frames
  EXPECT_EQ(code_of(grown), numerics::SktErrorCode::kTruncatedPayload);
  EXPECT_EQ(code_of(good + std::string(8, '\0')), numerics::SktErrorCode::kSizeMismatch);
  EXPECT_EQ(code_of(numerics::encode_skt(Tensor({3, 4, 4}))), numerics::SktErrorCode::kBadRank);
  try {
    write_bytes(dir / "bad.skt", good.substr(0, good.size() - 6));
    videoio::load_video(dir / "bad.skt");
  } catch (const numerics::SktError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos) << e.what();
  }
  try {
    write_bytes(dir / "bad.skt", good + "abcd");
    videoio::load_video(dir / "bad.skt");
  } catch (const numerics::SktError& e) {
    EXPECT_NE(std::string(e.what()).find("size mismatch"), std::string::npos) << e.what();
  }
}

TEST(VideoFile, ValueRangeEnforced) {
  Video v{Tensor({2, 1, 2, 2}, 0.5f), "v", std::nullopt};
  EXPECT_NO_THROW(videoio::validate_video(v));
  v.frames[3] = 1.0f + 1e-7f;
  EXPECT_NO_THROW(videoio::validate_video(v));
  v.frames[3] = 1.01f;
  EXPECT_THROW(videoio::validate_video(v), DataError);
  v.frames[3] = -0.01f;
  EXPECT_THROW(videoio::validate_video(v), DataError);
}

TEST(VideoFile, ReversedFrameOrder) {
  const Video v = indexed_video("v", 6, 1, 2, 2);
  const Video r = v.reversed();
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(frame_index_of(r.frame(i)[0], 6), 5 - i);
  EXPECT_EQ(r.reversed().frames, v.frames);
}

// ---- manifest ---------------------------------------------------------------

DatasetManifest sample_manifest() {
  return DatasetManifest{Split::kTest, 42, {ManifestEntry{"test/a.skt", 50, 1, 8, 8, 3}, ManifestEntry{"test/b.skt", 60, 1, 8, 8, 0}}};
}

TEST(Manifest, JsonRoundTrip) {
  const DatasetManifest m = sample_manifest();
  EXPECT_EQ(videoio::parse_manifest(videoio::manifest_to_json(m)), m);
  DatasetManifest train{Split::kTrain, 1, {ManifestEntry{"x.skt", 5, 1, 2, 2, std::nullopt}}};
  EXPECT_EQ(videoio::parse_manifest(videoio::manifest_to_json(train)), train);
}

TEST(Manifest, FileRoundTripWithHeaderCrossCheck) {
  TempDir dir;
  std::filesystem::create_directories(dir / "test");
  Rng rng(3);
  DatasetManifest m = sample_manifest();
  for (const auto& e : m.entries) videoio::save_video(random_video("x", e.n, e.c, e.h, e.w, rng), dir / e.path);
  videoio::write_manifest(m, dir / "test.json");
  EXPECT_EQ(videoio::read_manifest(dir / "test.json"), m);
  const auto ds = videoio::load_dataset(dir / "test.json");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.videos[0].id, "a");
  EXPECT_EQ(ds.videos[0].motion_class, 3u);
}

TEST(Manifest, UnknownFieldsRejected) {
  const std::string top = R"({"split":"train","seed":0,"entries":[],"extra":1})";
  EXPECT_NE(error_text([&] { videoio::parse_manifest(top); }).find("extra"), std::string::npos);
  const std::string entry = R"({"split":"train","seed":0,"entries":[{"path":"a","n":1,"c":1,"h":1,"w":1,"fps":30}]})";
  EXPECT_NE(error_text([&] { videoio::parse_manifest(entry); }).find("entries[0].fps"), std::string::npos);
}

TEST(Manifest, MissingMotionClassOnTestSplit) {
  const std::string doc = R"({"split":"test","seed":0,"entries":[{"path":"a","n":1,"c":1,"h":1,"w":1}]})";
  const std::string msg = error_text([&] { videoio::parse_manifest(doc); });
  EXPECT_NE(msg.find("motion_class"), std::string::npos) << msg;
  EXPECT_THROW(videoio::parse_manifest(doc), DataError);
}

TEST(Manifest, SchemaErrorsNameTheField) {
  EXPECT_NE(error_text([] { videoio::parse_manifest(R"({"split":"train","entries":[]})"); }).find("seed"),
            std::string::npos);
  EXPECT_NE(error_text([] {
              videoio::parse_manifest(R"({"split":"train","seed":0,"entries":[{"path":"a","n":0,"c":1,"h":1,"w":1}]})");
            }).find("entries[0].n"),
            std::string::npos);
  EXPECT_NE(error_text([] { videoio::parse_manifest(R"({"split":"val","seed":0,"entries":[]})"); }).find("split"),
            std::string::npos);
  EXPECT_THROW(videoio::parse_manifest("{not json"), DataError);
}

TEST(Manifest, RecordedFrameCountMustMatchHeader) {
  TempDir dir;
  Rng rng(4);
  videoio::save_video(random_video("a", 50, 1, 8, 8, rng), dir / "a.skt");
  DatasetManifest m{Split::kTrain, 0, {ManifestEntry{"a.skt", 51, 1, 8, 8, std::nullopt}}};
  videoio::write_manifest(m, dir / "train.json");
  const std::string msg = error_text([&] { videoio::read_manifest(dir / "train.json"); });
  EXPECT_NE(msg.find("entries[0]"), std::string::npos) << msg;
  EXPECT_THROW(videoio::read_manifest(dir / "train.json"), DataError);
  m.entries[0] = ManifestEntry{"missing.skt", 50, 1, 8, 8, std::nullopt};
  videoio::write_manifest(m, dir / "train.json");
  EXPECT_THROW(videoio::read_manifest(dir / "train.json"), DataError);
}

// ---- synthetic corpus -------------------------------------------------------

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_videos = 16;
  return s;
}

/// Intensity-weighted centroid (x, y) of frame f above the per-pixel minimum over all frames.
std::array<double, 2> centroid(const Video& v, std::size_t f) {
  const std::size_t n = v.num_frames(), h = v.height(), w = v.width(), per = h * w;
  double sx = 0, sy = 0, mass = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      float bg = v.frames[y * w + x];
      for (std::size_t k = 1; k < n; ++k) bg = std::min(bg, v.frames[k * per + y * w + x]);
      const double m = v.frames[f * per + y * w + x] - bg;
      sx += m * (static_cast<double>(x) + 0.5);
      sy += m * (static_cast<double>(y) + 0.5);
      mass += m;
    }
  return {sx / mass, sy / mass};
}

TEST(Synthetic, GenerationIsByteIdentical) {
  TempDir a, b;
  SyntheticSpec s = small_spec();
  s.num_videos = 4;
  videoio::generate_synthetic_dataset(s, 2, a.path());
  videoio::generate_synthetic_dataset(s, 2, b.path());
  for (const char* rel : {"train.json", "test.json", "train/train_00000.skt", "train/train_00003.skt",
                          "test/test_00001.skt"})
    EXPECT_EQ(read_bytes(a / rel), read_bytes(b / rel)) << rel;
  s.seed = 1;
  EXPECT_NE(videoio::render_video(s, Split::kTrain, 0).frames, videoio::render_video(small_spec(), Split::kTrain, 0).frames);
  EXPECT_NE(videoio::render_video(small_spec(), Split::kTest, 0).frames,
            videoio::render_video(small_spec(), Split::kTrain, 0).frames);
}

TEST(Synthetic, CentroidMovesAtClassVelocity) {
  const SyntheticSpec s = small_spec();
  for (std::size_t idx = 0; idx < 16; ++idx) {
    videoio::SpriteMotion m;
    const Video v = videoio::render_video(s, Split::kTrain, idx, &m);
    const auto vel = videoio::class_velocity(s, m.motion_class);
    for (std::size_t f = 0; f + 1 < v.num_frames(); f += 7) {
      const auto c0 = centroid(v, f), c1 = centroid(v, f + 1);
      EXPECT_NEAR(c1[0] - c0[0], vel[0], 0.5) << idx << " frame " << f;
      EXPECT_NEAR(c1[1] - c0[1], vel[1], 0.5) << idx << " frame " << f;
    }
    // Over the whole clip rasterization error does not accumulate.
    const auto first = centroid(v, 0), last = centroid(v, v.num_frames() - 1);
    const double span = static_cast<double>(v.num_frames() - 1);
    EXPECT_NEAR(last[0] - first[0], vel[0] * span, 0.5);
    EXPECT_NEAR(last[1] - first[1], vel[1] * span, 0.5);
  }
}

TEST(Synthetic, ReversalNegatesDisplacement) {
  const SyntheticSpec s = small_spec();
  for (std::size_t idx : {1u, 6u, 11u}) {
    const Video v = videoio::render_video(s, Split::kTrain, idx);
    const Video r = v.reversed();
    const std::size_t n = v.num_frames();
    for (std::size_t f = 0; f + 1 < n; f += 9) {
      const auto a0 = centroid(v, f), a1 = centroid(v, f + 1);
      const auto b0 = centroid(r, n - 2 - f), b1 = centroid(r, n - 1 - f);
      EXPECT_NEAR(b1[0] - b0[0], -(a1[0] - a0[0]), 1e-9);
      EXPECT_NEAR(b1[1] - b0[1], -(a1[1] - a0[1]), 1e-9);
    }
  }
}

TEST(Synthetic, ClassesAreExactlyBalanced) {
  SyntheticSpec s;
  s.num_videos = 160;
  std::vector<std::size_t> counts(s.num_motion_classes);
  for (std::size_t i = 0; i < s.num_videos; ++i) {
    videoio::SpriteMotion m;
    videoio::render_video(s, Split::kTrain, i, &m);
    ++counts[m.motion_class];
  }
  for (std::size_t c : counts) EXPECT_EQ(c, 10u);
}

TEST(Synthetic, ClassVelocitiesAreDistinct) {
  const SyntheticSpec s;
  std::set<std::pair<long, long>> seen;
  for (std::size_t c = 0; c < s.num_motion_classes; ++c) {
    const auto v = videoio::class_velocity(s, c);
    seen.insert({std::lround(v[0] * 1e6), std::lround(v[1] * 1e6)});
    const double speed = std::hypot(v[0], v[1]);
    EXPECT_GE(speed, s.speed_min - 1e-12);
    EXPECT_LE(speed, s.speed_max + 1e-12);
  }
  EXPECT_EQ(seen.size(), s.num_motion_classes);
}

TEST(Synthetic, VideosFitSamplerAndValueRange) {
  const SyntheticSpec s = small_spec();
  const sampling::SampleSpec sample;
  for (std::size_t i = 0; i < 4; ++i) {
    const Video v = videoio::render_video(s, Split::kTest, i);
    EXPECT_GE(v.num_frames(), sample.min_frames());
    EXPECT_NO_THROW(videoio::validate_video(v));
    EXPECT_TRUE(v.motion_class.has_value());
  }
}

TEST(Synthetic, TooShortVideosRejectedWithMinimum) {
  SyntheticSpec s = small_spec();
  s.frames_per_video = 40;
  const std::string msg = error_text([&] { videoio::validate(s); });
  EXPECT_NE(msg.find("49"), std::string::npos) << msg;
  EXPECT_THROW(videoio::validate(s), ConfigError);
}

TEST(Synthetic, BounceFreeTravelEnforced) {
  SyntheticSpec s = small_spec();
  s.speed_max = 2.0;
  EXPECT_THROW(videoio::validate(s), ConfigError);
}

TEST(Synthetic, SpriteHasAnUprightCap) {
  // A brighter cap over the upper half pulls the centroid a quarter pixel above
  // the box center (body 0.5 x 5 rows, cap 0.25 x 2.5 rows), so frames have a
  // canonical orientation for the rotation task.
  const SyntheticSpec s = small_spec();
  for (std::size_t idx : {0u, 4u, 8u}) {
    videoio::SpriteMotion m;
    const Video v = videoio::render_video(s, Split::kTrain, idx, &m);
    const auto c = centroid(v, 0);
    EXPECT_NEAR(c[0] - (m.x0 + s.sprite_size / 2), 0.0, 0.1) << idx;
    EXPECT_NEAR(c[1] - (m.y0 + s.sprite_size / 2), -0.25, 0.1) << idx;
  }
}

TEST(Synthetic, BackgroundBrightensTowardTheTop) {
  const SyntheticSpec s = small_spec();
  const Video v = videoio::render_video(s, Split::kTrain, 2);
  const std::size_t h = v.height(), w = v.width(), per = h * w, n = v.num_frames();
  auto row_background = [&](std::size_t y) {
    double acc = 0;
    for (std::size_t x = 0; x < w; ++x) {
      float bg = v.frames[y * w + x];
      for (std::size_t k = 1; k < n; ++k) bg = std::min(bg, v.frames[k * per + y * w + x]);
      acc += bg;
    }
    return acc / static_cast<double>(w);
  };
  double top = 0, bottom = 0;
  for (std::size_t y = 0; y < 4; ++y) top += row_background(y), bottom += row_background(h - 1 - y);
  EXPECT_GT(top, bottom);
}

}  // namespace
}  // namespace skipclip::testing
