#include "skipclip/evaluation/ranking.hpp"

#include <cmath>

#include "skipclip/errors.hpp"
#include "skipclip/objectives/objectives.hpp"
#include "skipclip/parallel.hpp"

namespace skipclip::evaluation {

namespace {

struct PairCounts {
  double concordant = 0, discordant = 0, tied = 0, pairs = 0;
};

PairCounts count_pairs(std::span<const double> s) {
  PairCounts c;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      c.pairs += 1;
      if (s[i] > s[j])
        c.concordant += 1;
      else if (s[i] < s[j])
        c.discordant += 1;
      else
        c.tied += 1;
    }
  return c;
}

}  // namespace

double pairwise_ranking_accuracy(std::span<const double> scores) {
  if (scores.size() < 2) throw ConfigError("ranking accuracy needs at least 2 scores");
  const PairCounts c = count_pairs(scores);
  return (c.concordant + 0.5 * c.tied) / c.pairs;
}

double kendall_tau(std::span<const double> scores) {
  if (scores.size() < 2) throw ConfigError("kendall tau needs at least 2 scores");
  const PairCounts c = count_pairs(scores);
  // The temporal order has no ties, so only the score side is adjusted.
  const double denom = std::sqrt(c.pairs * (c.pairs - c.tied));
  return denom == 0.0 ? 0.0 : (c.concordant - c.discordant) / denom;
}

RankingReport evaluate_ranking(const encoders::LatentEncoder& encoder, std::span<const videoio::Video> held_out,
                               const sampling::SampleSpec& spec, std::size_t crop_height, std::size_t crop_width,
                               std::size_t n_examples, std::uint64_t seed, std::size_t threads) {
  if (held_out.empty()) throw DataError("evaluate_ranking: held-out split is empty");
  sampling::AugmentationSpec aug;
  aug.reverse_prob = 0.0;
  aug.hflip_prob = 0.0;
  aug.random_crop = false;
  aug.crop_height = crop_height;
  aug.crop_width = crop_width;
  aug.rotation_enabled = false;

  RankingReport report;
  report.examples = n_examples;
  report.scores.resize(n_examples);
  parallel_for(n_examples, threads, [&](std::size_t i) {
    Rng rng = Rng::derive(seed, "eval-rank", i);
    const auto& video = held_out[rng.uniform_index(held_out.size())];
    const auto clips = sampling::seek_and_sample(video, spec, rng);
    const auto a = sampling::augment(clips.context, clips.targets, aug, rng);
    const auto h = encoder.encode_context(a.context);
    for (const auto& t : a.targets) report.scores[i].push_back(objectives::score(h, encoder.encode_target(t)));
  });
  double acc = 0.0, tau = 0.0;
  for (const auto& s : report.scores) {
    acc += pairwise_ranking_accuracy(s);
    tau += kendall_tau(s);
  }
  if (n_examples) {
    report.pairwise_accuracy = acc / static_cast<double>(n_examples);
    report.kendall_tau = tau / static_cast<double>(n_examples);
  }
  return report;
}

}  // namespace skipclip::evaluation
