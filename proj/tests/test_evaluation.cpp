#include <algorithm>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "centroid_oracle.hpp"
#include "skipclip/evaluation/finetune.hpp"
#include "skipclip/evaluation/heatmap.hpp"
#include "skipclip/evaluation/ranking.hpp"
#include "skipclip/numerics/skt.hpp"
#include "skipclip/objectives/objective_check.hpp"
#include "skipclip/objectives/objectives.hpp"
#include "skipclip/videoio/synthetic.hpp"
#include "test_util.hpp"

namespace skipclip::testing {
namespace {

using evaluation::kendall_tau;
using evaluation::pairwise_ranking_accuracy;

double acc(std::vector<double> s) { return pairwise_ranking_accuracy(s); }
double tau(std::vector<double> s) { return kendall_tau(s); }

// ---- ranking metrics --------------------------------------------------------

TEST(RankingMetrics, HandExamples) {
  EXPECT_DOUBLE_EQ(acc({3, 1, 2}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(acc({3, 2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(acc({1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(acc({1, 1, 0}), 2.5 / 3.0);
  EXPECT_DOUBLE_EQ(tau({3, 1, 2}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tau({3, 2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(tau({1, 2, 3}), -1.0);
  EXPECT_DOUBLE_EQ(tau({1, 1, 0}), 2.0 / std::sqrt(6.0));
  EXPECT_EQ(tau({0.5, 0.5, 0.5}), 0.0);
  EXPECT_THROW(acc({1}), ConfigError);
}

TEST(RankingMetrics, TauIsAnAffineImageOfAccuracyWithoutTies) {
  Rng rng(40);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> s(2 + rng.uniform_index(10));
    for (double& v : s) v = rng.uniform01();
    EXPECT_NEAR(tau(s), 2 * acc(s) - 1, 1e-12);
    const double a = acc(s);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(RankingMetrics, TauMatchesRankCorrelationOracle) {
  // Without ties, tau = 1 - 4 * inversions / (n (n - 1)) where an inversion is
  // a pair out of descending order; inversions counted by insertion sort.
  Rng rng(41);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> s(2 + rng.uniform_index(12));
    for (double& v : s) v = rng.uniform01();
    std::vector<double> work = s;
    double inversions = 0;
    for (std::size_t a = 1; a < work.size(); ++a)
      for (std::size_t b = a; b > 0 && work[b - 1] < work[b]; --b) {
        std::swap(work[b - 1], work[b]);
        inversions += 1;
      }
    const double n = static_cast<double>(s.size());
    EXPECT_NEAR(tau(s), 1 - 4 * inversions / (n * (n - 1)), 1e-12);
  }
}

std::vector<videoio::Video> synthetic_split(std::size_t count, videoio::Split split) {
  videoio::SyntheticSpec spec;
  std::vector<videoio::Video> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(videoio::render_video(spec, split, i));
  return out;
}

TEST(EvaluateRanking, CentroidOracleRanksPerfectly) {
  const auto held_out = synthetic_split(32, videoio::Split::kTest);
  const auto report = evaluation::evaluate_ranking(CentroidOracle(), held_out, sampling::SampleSpec{}, 32, 32, 300, 5);
  EXPECT_EQ(report.examples, 300u);
  EXPECT_EQ(report.pairwise_accuracy, 1.0);
  EXPECT_EQ(report.kendall_tau, 1.0);
}

TEST(EvaluateRanking, DeterministicAndThreadInvariant) {
  const auto held_out = synthetic_split(8, videoio::Split::kTest);
  const auto a = evaluation::evaluate_ranking(CentroidOracle(0.05), held_out, sampling::SampleSpec{}, 32, 32, 50, 9, 1);
  const auto b = evaluation::evaluate_ranking(CentroidOracle(0.05), held_out, sampling::SampleSpec{}, 32, 32, 50, 9, 3);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.pairwise_accuracy, b.pairwise_accuracy);
}

// ---- sliding window ---------------------------------------------------------

TEST(SlidingWindow, AverageAndArgmax) {
  const std::vector<Tensor> probs{Tensor(Shape{2}, {0.6f, 0.4f}), Tensor(Shape{2}, {0.2f, 0.8f})};
  const Tensor avg = evaluation::average_probabilities(probs);
  EXPECT_FLOAT_EQ(avg[0], 0.4f);
  EXPECT_FLOAT_EQ(avg[1], 0.6f);
  EXPECT_EQ(evaluation::argmax_lowest(avg), 1u);
  EXPECT_EQ(evaluation::argmax_lowest(Tensor(Shape{3}, {0.3f, 0.4f, 0.4f})), 1u);
  EXPECT_THROW(evaluation::average_probabilities(std::vector<Tensor>{}), ConfigError);
}

// Per-window probabilities computed outside the library path.
std::vector<std::vector<double>> window_probabilities(const ParamSet<float>& params,
                                                      const encoders::EncoderConfig& cfg,
                                                      const videoio::Video& video) {
  std::vector<std::vector<double>> out;
  const std::size_t k = cfg.context_frames, ch = video.channels(), h = cfg.frame_height, w = cfg.frame_width;
  const std::size_t vh = video.height(), vw = video.width();
  const std::size_t y0 = (video.height() - cfg.frame_height) / 2, x0 = (video.width() - cfg.frame_width) / 2;
  for (std::size_t start = 0; start + k <= video.num_frames(); start += k) {
    Tensor clip(Shape{k, ch, h, w});
    for (std::size_t f = 0; f < k; ++f)
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            clip[((f * ch + c) * h + y) * w + x] = video.frames[(((start + f) * ch + c) * vh + y0 + y) * vw + x0 + x];
    Tape<float> tape;
    encoders::BoundParams<float> bound(tape, params);
    const Tensor logits = tape.value(encoders::classify(tape, bound, encoders::encode_context(tape, bound, cfg, clip)));
    double mx = logits[0], z = 0;
    for (float v : logits.data()) mx = std::max<double>(mx, v);
    std::vector<double> p;
    for (float v : logits.data()) z += std::exp(v - mx);
    for (float v : logits.data()) p.push_back(std::exp(v - mx) / z);
    out.push_back(p);
  }
  return out;
}

TEST(SlidingWindow, MatchesHandAveragesOnOneAndTwoWindows) {
  const auto p = objectives::tiny_problem();
  const auto params = encoders::init_params(p.encoder, 11);
  Rng rng(42);
  for (std::size_t frames : {4u, 7u, 8u, 9u}) {
    const auto video = random_video("w", frames, 1, p.height, p.width, rng);
    const auto per = window_probabilities(params, p.encoder, video);
    const auto pred = evaluation::sliding_window_predict(params, p.encoder, video, 4);
    ASSERT_EQ(pred.windows, per.size());
    EXPECT_EQ(pred.windows, frames / 4);
    for (std::size_t c = 0; c < p.encoder.num_classes; ++c) {
      double mean = 0;
      for (const auto& w : per) mean += w[c];
      EXPECT_NEAR(pred.probabilities[c], mean / static_cast<double>(per.size()), 1e-6);
    }
    EXPECT_EQ(pred.label, evaluation::argmax_lowest(pred.probabilities));
  }
}

TEST(SlidingWindow, DefaultWindowOn33FramesUsesTwoWindows) {
  const encoders::EncoderConfig cfg;
  const auto params = encoders::init_params(cfg, 1);
  Rng rng(43);
  const auto video = random_video("long", 33, 1, 36, 36, rng);
  EXPECT_EQ(evaluation::sliding_window_predict(params, cfg, video, 16).windows, 2u);
  const auto short_video = random_video("short", 15, 1, 36, 36, rng);
  EXPECT_THROW(evaluation::sliding_window_predict(params, cfg, short_video, 16), DataError);
}

// ---- fine-tuning ------------------------------------------------------------

std::vector<videoio::Video> labelled(std::size_t count, std::uint64_t seed, std::size_t frames = 8) {
  const auto p = objectives::tiny_problem();
  Rng rng(seed);
  std::vector<videoio::Video> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto v = random_video("l" + std::to_string(i), frames, 1, p.height, p.width, rng);
    v.motion_class = i % p.encoder.num_classes;
    out.push_back(std::move(v));
  }
  return out;
}

evaluation::FinetuneConfig tiny_finetune(evaluation::FinetuneMode mode) {
  evaluation::FinetuneConfig ft;
  ft.mode = mode;
  ft.epochs = 3;
  ft.batch_size = 2;
  ft.window = objectives::tiny_problem().encoder.context_frames;
  return ft;
}

TEST(Finetune, ProbeLeavesEveryEncoderParameterBitIdentical) {
  const auto p = objectives::tiny_problem();
  const auto init = encoders::init_params(p.encoder, 12);
  const auto train = labelled(6, 1), test = labelled(4, 2);
  const auto result = evaluation::finetune(init, p.encoder, train, test, tiny_finetune(evaluation::FinetuneMode::kProbe));
  bool head_moved = false;
  for (std::size_t i = 0; i < init.size(); ++i) {
    const auto& before = init.entries()[i];
    const auto& after = result.params.entries()[i];
    if (encoders::is_classifier_param(before.name))
      head_moved = head_moved || before.tensor != after.tensor;
    else
      EXPECT_EQ(before.tensor, after.tensor) << before.name;
  }
  EXPECT_TRUE(head_moved);
  EXPECT_EQ(result.report.test_videos, 4u);
  EXPECT_EQ(result.report.per_class_accuracy.size(), p.encoder.num_classes);
}

TEST(Finetune, FullModeTrainsTheContextEncoderOnly) {
  const auto p = objectives::tiny_problem();
  const auto init = encoders::init_params(p.encoder, 12);
  const auto result = evaluation::finetune(init, p.encoder, labelled(6, 1), labelled(4, 2),
                                           tiny_finetune(evaluation::FinetuneMode::kFull));
  for (std::size_t i = 0; i < init.size(); ++i) {
    const auto& name = init.entries()[i].name;
    const bool changed = init.entries()[i].tensor != result.params.entries()[i].tensor;
    EXPECT_EQ(changed, encoders::is_context_param(name) || encoders::is_classifier_param(name)) << name;
  }
}

TEST(Finetune, RejectsUnlabelledVideosAndWindowMismatch) {
  const auto p = objectives::tiny_problem();
  const auto init = encoders::init_params(p.encoder, 12);
  auto test = labelled(2, 2);
  test[1].motion_class.reset();
  EXPECT_THROW(evaluation::finetune(init, p.encoder, labelled(2, 1), test, tiny_finetune(evaluation::FinetuneMode::kProbe)),
               DataError);
  auto ft = tiny_finetune(evaluation::FinetuneMode::kProbe);
  ft.window = 5;
  EXPECT_THROW(evaluation::finetune(init, p.encoder, labelled(2, 1), labelled(2, 2), ft), ConfigError);
}

TEST(Finetune, ReportIsDeterministic) {
  const auto p = objectives::tiny_problem();
  const auto init = encoders::init_params(p.encoder, 12);
  const auto ft = tiny_finetune(evaluation::FinetuneMode::kProbe);
  const auto a = evaluation::finetune(init, p.encoder, labelled(6, 1), labelled(4, 2), ft);
  const auto b = evaluation::finetune(init, p.encoder, labelled(6, 1), labelled(4, 2), ft);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(evaluation::report_json(a.report), evaluation::report_json(b.report));
}

// ---- heatmap ----------------------------------------------------------------

TEST(Heatmap, GridMeanIsExactlyTheScore) {
  Rng rng(44);
  for (int i = 0; i < 500; ++i) {
    const Tensor h = random_tensor({8, 4, 4}, rng), z = random_tensor({8, 4, 4}, rng);
    const Tensor grid = evaluation::heatmap_grid(h, z);
    EXPECT_EQ(grid.shape(), (Shape{4, 4}));
    EXPECT_EQ(numerics::grid_mean(grid), objectives::score(h, z));
  }
}

TEST(Heatmap, IdenticalLatentsGiveOnes) {
  Rng rng(45);
  const Tensor h = random_tensor({8, 4, 4}, rng);
  const Tensor grid = evaluation::heatmap_grid(h, h);
  for (float v : grid.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
}

TEST(Heatmap, ExportWritesPgmAndRawGrid) {
  TempDir dir;
  const Tensor grid(Shape{2, 2}, {-1.0f, 1.0f, 0.0f, 0.5f});
  const auto files = evaluation::export_heatmap(grid, 4, 6, dir.path() / "hm");
  EXPECT_EQ(numerics::load_skt(files.grid), grid);
  std::ifstream in(files.image, std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  std::vector<unsigned char> px(w * h);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  ASSERT_TRUE(in);
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 6u);
  EXPECT_EQ(h, 4u);
  EXPECT_EQ(maxval, 255u);
  EXPECT_EQ(px[0], 0);             // cell (0,0) = -1
  EXPECT_EQ(px[5], 255);           // cell (0,1) = 1
  EXPECT_EQ(px[3 * 6 + 0], 128);   // cell (1,0) = 0
  EXPECT_EQ(px[3 * 6 + 5], 191);   // cell (1,1) = 0.5
  EXPECT_THROW(evaluation::write_heatmap_pgm(Tensor(Shape{4}), 4, 4, dir / "bad.pgm"), ShapeError);
}

}  // namespace
}  // namespace skipclip::testing
