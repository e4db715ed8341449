#pragma once

// Per-cell cosine score, the hinge rank / contrastive / rotation terms, and
// their unweighted sum.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipclip/encoders/encoders.hpp"
#include "skipclip/sampling/sampler.hpp"

namespace skipclip::objectives {

using numerics::BasicTensor;
using numerics::ParamSet;
using numerics::Tape;
using numerics::Var;

struct LossConfig {
  double delta_rank = 0.1;
  double delta_neg = 0.1;
  bool enable_rank = true;
  bool enable_contrastive = true;
  bool enable_rotation = true;
};

void validate(const LossConfig& cfg);

/// Scores of one example; target_scores[0] belongs to the nearest future target.
struct ScoreSet {
  std::vector<double> target_scores;
  std::vector<double> negative_scores;
};

/// Average per-cell cosine of two (C, H, W) grids. Zero-norm cells count as 0.
template <typename T>
T score(const BasicTensor<T>& h, const BasicTensor<T>& z, std::size_t* zero_cells = nullptr);

/// Sum over pairs i < j of max(0, s_j - s_i + delta). Optional subgradient
/// w.r.t. each score and the smallest |hinge argument|.
template <typename T>
T rank_hinge(std::span<const T> scores, T delta, std::span<T> grad = {}, T* kink = nullptr);

/// Sum over targets of max(0, mean(negatives) - s_i + delta).
template <typename T>
T contrastive_hinge(std::span<const T> targets, std::span<const T> negatives, T delta,
                    std::span<T> target_grad = {}, std::span<T> negative_grad = {}, T* kink = nullptr);

// Taped versions.
template <typename T>
Var rank_loss(Tape<T>& tape, std::span<const Var> target_scores, T delta);
template <typename T>
Var contrastive_loss(Tape<T>& tape, std::span<const Var> target_scores, std::span<const Var> negative_scores,
                     T delta);
/// Mean softmax cross-entropy over the rotated targets.
template <typename T>
Var rotation_loss(Tape<T>& tape, std::span<const Var> rotation_logits, std::span<const std::size_t> labels);

struct LossBreakdown {
  double total = 0.0;
  double rank = 0.0;
  double contrastive = 0.0;
  double rotation = 0.0;
  double mean_target_score = 0.0;
  std::optional<double> mean_negative_score;  // only when negatives are scored
  ScoreSet scores;
};

/// Taped objective for one example.
template <typename T>
struct TapedLoss {
  Var total;
  LossBreakdown breakdown;
};

template <typename T>
TapedLoss<T> total_loss(Tape<T>& tape, const encoders::BoundParams<T>& params, const encoders::EncoderConfig& enc,
                        const sampling::TrainingExample& example, const LossConfig& cfg);

/// Loss and parameter gradients for one example, plus diagnostics.
template <typename T>
struct ExampleGradient {
  LossBreakdown breakdown;
  ParamSet<T> grads;
  T min_kink = 0;
  std::size_t zero_norm_cells = 0;
  T min_cell_norm = 0;
};

template <typename T>
ExampleGradient<T> example_gradient(const ParamSet<T>& params, const encoders::EncoderConfig& enc,
                                    const sampling::TrainingExample& example, const LossConfig& cfg,
                                    const std::function<bool(const std::string&)>& trainable = {});

}  // namespace skipclip::objectives
