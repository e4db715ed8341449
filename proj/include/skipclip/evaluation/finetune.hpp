#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skipclip/encoders/encoders.hpp"
#include "skipclip/training/adam.hpp"
#include "skipclip/training/schedule.hpp"
#include "skipclip/videoio/video.hpp"

namespace skipclip::evaluation {

enum class FinetuneMode { kProbe, kFull };

std::string to_string(FinetuneMode mode);
FinetuneMode parse_finetune_mode(const std::string& text);

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::kProbe;
  training::Schedule schedule{2e-2, 0.5, 15, 60, 1e-2};
  training::AdamConfig adam;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::size_t window = 16;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct ProbeReport {
  double top1_accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // -1 for classes absent from the test split
  FinetuneMode mode = FinetuneMode::kProbe;
  std::uint64_t seed = 0;
  std::size_t test_videos = 0;
};

std::string report_json(const ProbeReport& report);

struct FinetuneResult {
  ProbeReport report;
  numerics::ParamSet<float> params;
};

struct WindowPrediction {
  std::size_t label = 0;
  numerics::Tensor probabilities;
  std::size_t windows = 0;
};

/// Arithmetic mean of equally sized probability vectors.
numerics::Tensor average_probabilities(std::span<const numerics::Tensor> probabilities);
/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax_lowest(const numerics::Tensor& values);

/// Softmax of the classifier over each of the floor(N / window)
/// non-overlapping windows (centered crop), averaged.
WindowPrediction sliding_window_predict(const numerics::ParamSet<float>& params, const encoders::EncoderConfig& cfg,
                                        const videoio::Video& video, std::size_t window);

/// Trains the classifier head (probe) or head and context encoder (full) on
/// random windows with random crops, then scores the test split with
/// sliding-window inference. During training the head sees pooled features
/// standardized with statistics of the starting encoder on the train split;
/// the returned cls.* parameters have that standardization folded in.
FinetuneResult finetune(numerics::ParamSet<float> params, const encoders::EncoderConfig& cfg,
                        std::span<const videoio::Video> train, std::span<const videoio::Video> test,
                        const FinetuneConfig& ft);

}  // namespace skipclip::evaluation
