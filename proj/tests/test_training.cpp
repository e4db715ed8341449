#include <cmath>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "skipclip/objectives/objective_check.hpp"
#include "skipclip/training/adam.hpp"
#include "skipclip/training/checkpoint.hpp"
#include "skipclip/training/pretrain.hpp"
#include "skipclip/training/schedule.hpp"
#include "test_util.hpp"

namespace skipclip::testing {
namespace {

using numerics::ParamSet;
using training::AdamConfig;
using training::AdamState;
using training::Schedule;

// ---- schedule ---------------------------------------------------------------

TEST(Schedule, PretrainReferenceSpotValues) {
  const Schedule s = training::pretrain_reference_schedule();
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 0), 3e-4);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 199), 3e-4);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 200), 3e-5);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 400), 3e-6);
  EXPECT_EQ(s.weight_decay, 1e-7);
}

TEST(Schedule, FinetuneReferenceCapsAfterFourDecays) {
  const Schedule s = training::finetune_reference_schedule();
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 0), 5e-4);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 14), 5e-4);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 15), 2.5e-4);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 59), 6.25e-5);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 60), 3.125e-5);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 75), 3.125e-5);
  EXPECT_DOUBLE_EQ(training::lr_at_epoch(s, 10000), 3.125e-5);
  EXPECT_EQ(s.weight_decay, 1e-2);
}

TEST(Schedule, NonIncreasingInEpoch) {
  for (const Schedule& s : {training::pretrain_reference_schedule(), training::finetune_reference_schedule(),
                            Schedule{1.0, 0.7, 3, 20, 0.0}}) {
    double prev = training::lr_at_epoch(s, 0);
    for (std::size_t e = 1; e < 1000; ++e) {
      const double lr = training::lr_at_epoch(s, e);
      EXPECT_LE(lr, prev);
      EXPECT_GT(lr, 0.0);
      prev = lr;
    }
  }
}

TEST(Schedule, RejectsBadConstants) {
  EXPECT_THROW(training::lr_at_epoch(Schedule{0.0, 0.1, 10, std::nullopt, 0}, 0), ConfigError);
  EXPECT_THROW(training::lr_at_epoch(Schedule{1e-3, 1.5, 10, std::nullopt, 0}, 0), ConfigError);
  EXPECT_THROW(training::lr_at_epoch(Schedule{1e-3, 0.1, 0, std::nullopt, 0}, 0), ConfigError);
  EXPECT_THROW(training::lr_at_epoch(Schedule{1e-3, 0.1, 10, std::nullopt, -1}, 0), ConfigError);
}

// ---- adam -------------------------------------------------------------------

ParamSet<float> single(const std::string& name, std::vector<float> values) {
  ParamSet<float> p;
  const std::size_t n = values.size();
  p.add(name, Tensor(Shape{n}, std::move(values)));
  return p;
}

TEST(Adam, ZeroGradientWithoutDecayLeavesParamsUnchanged) {
  auto p = single("w", {1.5f, -2.0f});
  const auto before = p;
  AdamState s = AdamState::zeros_like(p);
  for (int i = 0; i < 5; ++i) training::adam_step(p, p.zeros_like(), s, 0.1, 0.0);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstTheGradient) {
  auto p = single("w", {1.0f, 1.0f, 1.0f});
  AdamState s = AdamState::zeros_like(p);
  training::adam_step(p, single("w", {0.5f, -3.0f, 1e-3f}), s, 0.01, 0.0);
  EXPECT_NEAR(p.entries()[0].tensor[0], 0.99f, 1e-6);
  EXPECT_NEAR(p.entries()[0].tensor[1], 1.01f, 1e-6);
  EXPECT_NEAR(p.entries()[0].tensor[2], 0.99f, 1e-6);
  EXPECT_NEAR(s.m.entries()[0].tensor[0], 0.05f, 1e-7);
  EXPECT_NEAR(s.v.entries()[0].tensor[1], 0.009f, 1e-7);
}

TEST(Adam, MinimizesAQuadratic) {
  auto p = single("w", {3.0f, -2.0f});
  AdamState s = AdamState::zeros_like(p);
  for (int i = 0; i < 2000; ++i) {
    auto g = p;
    for (auto& v : g.entries()[0].tensor.data()) v *= 2.0f;
    training::adam_step(p, g, s, 0.01, 0.0);
  }
  for (float v : p.entries()[0].tensor.data()) EXPECT_LT(std::fabs(v), 0.02f);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  ParamSet<float> p;
  p.add("g.conv0.weight", Tensor(Shape{2}, {1, 1}));
  p.add("cls.bias", Tensor(Shape{1}, {0}));
  auto g = p.zeros_like();
  g.entries()[1].tensor[0] = std::numeric_limits<float>::quiet_NaN();
  AdamState s = AdamState::zeros_like(p);
  try {
    training::adam_step(p, g, s, 0.1, 0.0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("cls.bias"), std::string::npos);
  }
  EXPECT_EQ(s.step, 0u);
}

TEST(Adam, DecoupledAndCoupledWeightDecay) {
  const double lr = 0.1, wd = 0.5;
  auto decoupled = single("w", {2.0f});
  AdamState s1 = AdamState::zeros_like(decoupled);
  training::adam_step(decoupled, decoupled.zeros_like(), s1, lr, wd);
  EXPECT_FLOAT_EQ(decoupled.entries()[0].tensor[0], static_cast<float>(2.0 * (1 - lr * wd)));

  auto coupled = single("w", {2.0f});
  AdamState s2 = AdamState::zeros_like(coupled);
  AdamConfig cfg;
  cfg.weight_decay_mode = training::WeightDecayMode::kCoupled;
  training::adam_step(coupled, coupled.zeros_like(), s2, lr, wd, cfg);
  // g = wd * theta = 1, so the first normalized step is lr.
  EXPECT_NEAR(coupled.entries()[0].tensor[0], 1.9f, 1e-6);
}

TEST(Adam, FrozenParametersKeepValuesAndMoments) {
  ParamSet<float> p;
  p.add("g.conv0.weight", Tensor(Shape{2}, {1, 2}));
  p.add("cls.weight", Tensor(Shape{2}, {3, 4}));
  const auto before = p;
  auto g = p;
  AdamState s = AdamState::zeros_like(p);
  training::adam_step(p, g, s, 0.1, 0.1, {}, encoders::is_classifier_param);
  EXPECT_EQ(p.entries()[0].tensor, before.entries()[0].tensor);
  EXPECT_NE(p.entries()[1].tensor, before.entries()[1].tensor);
  EXPECT_EQ(s.m.entries()[0].tensor, Tensor(Shape{2}));
}

// ---- pretraining and checkpoints --------------------------------------------

training::PretrainSetup tiny_setup(std::size_t epochs) {
  const auto p = objectives::tiny_problem();
  training::PretrainSetup setup;
  setup.sample = p.sample;
  setup.augment = p.augment;
  setup.encoder = p.encoder;
  setup.loss = p.loss;
  setup.run.epochs = epochs;
  setup.run.batch_size = 2;
  setup.run.seed = 7;
  setup.config_json = "{\"tiny\":true}";
  return setup;
}

std::vector<videoio::Video> tiny_corpus(std::size_t count = 5) {
  const auto p = objectives::tiny_problem();
  Rng rng(3);
  std::vector<videoio::Video> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(random_video("v" + std::to_string(i), p.sample.min_frames() + 2, 1, p.height, p.width, rng));
  return out;
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto setup = tiny_setup(2);
  const auto trained = training::pretrain(tiny_corpus(), setup, training::initial_checkpoint(setup));
  TempDir dir;
  training::save_checkpoint(trained, dir / "ckpt");
  const auto loaded = training::load_checkpoint(dir / "ckpt", trained.fingerprint);
  EXPECT_EQ(loaded, trained);
  EXPECT_EQ(loaded.epoch, 2u);
  EXPECT_EQ(loaded.config_json, setup.config_json);
}

TEST(Checkpoint, FingerprintMismatchIsAConfigError) {
  const auto setup = tiny_setup(1);
  TempDir dir;
  training::save_checkpoint(training::initial_checkpoint(setup), dir / "ckpt");
  auto other = setup.encoder;
  other.context_blocks.back().channels += 1;
  EXPECT_THROW(training::load_checkpoint(dir / "ckpt", encoders::architecture_fingerprint(other)), ConfigError);
}

TEST(Checkpoint, DamagedTensorFileIsADataError) {
  const auto setup = tiny_setup(1);
  TempDir dir;
  training::save_checkpoint(training::initial_checkpoint(setup), dir / "ckpt");
  std::filesystem::resize_file(dir / "ckpt" / "tensors.bin", 40);
  EXPECT_THROW(training::load_checkpoint(dir / "ckpt"), DataError);
  EXPECT_THROW(training::load_checkpoint(dir / "missing"), DataError);
}

TEST(Pretrain, LogsEveryStepAndReducesLoss) {
  const auto setup = tiny_setup(8);
  const auto videos = tiny_corpus();
  std::vector<training::StepMetrics> log;
  training::pretrain(videos, setup, training::initial_checkpoint(setup),
                     [&](const training::StepMetrics& m) { log.push_back(m); });
  ASSERT_EQ(log.size(), 8u * 3u);  // 5 videos in batches of 2
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(log[i].step, i);
    EXPECT_EQ(log[i].epoch, i / 3);
    EXPECT_TRUE(log[i].mean_negative_score.has_value());
  }
  auto epoch_mean = [&](std::size_t e) {
    return (log[3 * e].loss_total + log[3 * e + 1].loss_total + log[3 * e + 2].loss_total) / 3;
  };
  EXPECT_LT(epoch_mean(7), epoch_mean(0));
}

TEST(Pretrain, ContrastiveOnlyTotalEqualsContrastiveAtEveryStep) {
  auto setup = tiny_setup(3);
  setup.loss.enable_rank = setup.loss.enable_rotation = false;
  std::vector<training::StepMetrics> log;
  training::pretrain(tiny_corpus(), setup, training::initial_checkpoint(setup),
                     [&](const training::StepMetrics& m) { log.push_back(m); });
  ASSERT_FALSE(log.empty());
  for (const auto& m : log) {
    EXPECT_EQ(m.loss_total, m.loss_contrastive);
    EXPECT_EQ(m.loss_rank, 0.0);
    EXPECT_EQ(m.loss_rotation, 0.0);
  }
}

TEST(Pretrain, ResumeMatchesUninterruptedRun) {
  const auto videos = tiny_corpus();
  const auto full = training::pretrain(videos, tiny_setup(4), training::initial_checkpoint(tiny_setup(4)));
  const auto half = training::pretrain(videos, tiny_setup(2), training::initial_checkpoint(tiny_setup(2)));
  TempDir dir;
  training::save_checkpoint(half, dir / "half");
  const auto resumed = training::pretrain(videos, tiny_setup(4), training::load_checkpoint(dir / "half"));
  EXPECT_EQ(resumed, full);
}

TEST(Pretrain, ThreadCountDoesNotChangeResults) {
  const auto videos = tiny_corpus();
  auto one = tiny_setup(2), three = tiny_setup(2);
  three.run.threads = 3;
  EXPECT_EQ(training::pretrain(videos, one, training::initial_checkpoint(one)),
            training::pretrain(videos, three, training::initial_checkpoint(three)));
}

TEST(Pretrain, IntermediateCheckpointsFollowTheCadence) {
  auto setup = tiny_setup(5);
  setup.run.checkpoint_every = 2;
  std::vector<std::size_t> epochs;
  training::pretrain(tiny_corpus(), setup, training::initial_checkpoint(setup), {},
                     [&](const training::Checkpoint& c) { epochs.push_back(c.epoch); });
  EXPECT_EQ(epochs, (std::vector<std::size_t>{2, 4}));
}

TEST(Pretrain, NonFiniteInputIsReportedWithItsSource) {
  auto videos = tiny_corpus(2);
  const auto setup = tiny_setup(1);
  for (auto& v : videos)
    for (auto& x : v.frames.data()) x = std::numeric_limits<float>::quiet_NaN();
  try {
    training::pretrain(videos, setup, training::initial_checkpoint(setup));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("epoch 0"), std::string::npos) << what;
    EXPECT_NE(what.find("video 'v"), std::string::npos) << what;
  }
}

}  // namespace
}  // namespace skipclip::testing
