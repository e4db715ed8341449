#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skipclip/encoders/encoders.hpp"
#include "skipclip/sampling/sampler.hpp"

namespace skipclip::evaluation {

/// Fraction of pairs i < j with s_i > s_j; ties count one half.
double pairwise_ranking_accuracy(std::span<const double> scores);

/// Tau-b against the temporal order (earlier targets should score higher).
/// Returns 0 when every score is tied.
double kendall_tau(std::span<const double> scores);

struct RankingReport {
  double pairwise_accuracy = 0.0;
  double kendall_tau = 0.0;
  std::size_t examples = 0;
  std::vector<std::vector<double>> scores;  // per example, temporal order
};

/// Samples `n_examples` held-out contexts (no reversal, no flip, centered
/// crop), scores their targets with the per-cell cosine and averages the
/// per-example metrics.
RankingReport evaluate_ranking(const encoders::LatentEncoder& encoder, std::span<const videoio::Video> held_out,
                               const sampling::SampleSpec& spec, std::size_t crop_height, std::size_t crop_width,
                               std::size_t n_examples, std::uint64_t seed, std::size_t threads = 1);

}  // namespace skipclip::evaluation
