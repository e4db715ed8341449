#include "skipclip/training/pretrain.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "skipclip/errors.hpp"
#include "skipclip/parallel.hpp"
#include "skipclip/rng.hpp"

namespace skipclip::training {

std::string metrics_json(const StepMetrics& m) {
  nlohmann::json j{{"step", m.step},
                   {"epoch", m.epoch},
                   {"loss_total", m.loss_total},
                   {"loss_rank", m.loss_rank},
                   {"loss_contrastive", m.loss_contrastive},
                   {"loss_rotation", m.loss_rotation},
                   {"mean_target_score", m.mean_target_score}};
  j["mean_negative_score"] = m.mean_negative_score ? nlohmann::json(*m.mean_negative_score) : nlohmann::json(nullptr);
  return j.dump();
}

Checkpoint initial_checkpoint(const PretrainSetup& setup) {
  encoders::validate(setup.encoder);
  Checkpoint c;
  c.params = encoders::init_params(setup.encoder, Rng::derive(setup.run.seed, "init").next());
  c.adam = AdamState::zeros_like(c.params);
  c.epoch = 0;
  c.rng_state = Rng::derive(setup.run.seed, "shuffle").state();
  c.fingerprint = encoders::architecture_fingerprint(setup.encoder);
  c.config_json = setup.config_json;
  return c;
}

Checkpoint pretrain(std::span<const videoio::Video> videos, const PretrainSetup& setup, Checkpoint state,
                    const MetricsSink& on_step, const CheckpointSink& on_checkpoint) {
  const auto& run = setup.run;
  sampling::validate(setup.sample);
  objectives::validate(setup.loss);
  validate(run.schedule);
  encoders::validate(setup.encoder);
  if (run.batch_size == 0) throw ConfigError("pretrain: batch_size must be >= 1");
  if (videos.size() < 2) throw DataError("pretrain: need at least 2 training videos");
  if (state.fingerprint != encoders::architecture_fingerprint(setup.encoder))
    throw ConfigError("pretrain: resume checkpoint was built for a different architecture");
  for (const auto& v : videos)
    if (v.num_frames() < setup.sample.min_frames())
      throw DataError("pretrain: video '" + v.id + "' has " + std::to_string(v.num_frames()) +
                      " frames, the sampler needs " + std::to_string(setup.sample.min_frames()));

  Rng shuffle;
  shuffle.restore(state.rng_state);
  std::size_t step = state.adam.step;

  for (std::size_t epoch = state.epoch; epoch < run.epochs; ++epoch) {
    std::vector<std::size_t> order(videos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
    const double lr = lr_at_epoch(run.schedule, epoch);

    for (std::size_t begin = 0; begin < order.size(); begin += run.batch_size) {
      const std::size_t count = std::min(run.batch_size, order.size() - begin);
      std::vector<objectives::ExampleGradient<float>> results(count);
      std::vector<std::string> provenance(count);
      parallel_for(count, run.threads, [&](std::size_t i) {
        Rng rng = Rng::derive(run.seed, "example", epoch, begin + i);
        const auto example =
            sampling::make_example(videos, order[begin + i], setup.sample, setup.augment, rng);
        provenance[i] = "video '" + example.video_id + "' seek " + std::to_string(example.seek) +
                        (example.augmentation.reversed ? " (reversed)" : "");
        results[i] = objectives::example_gradient(state.params, setup.encoder, example, setup.loss);
      });

      ParamSet<float> grads = state.params.zeros_like();
      StepMetrics m;
      m.step = step;
      m.epoch = epoch;
      double neg_sum = 0.0;
      std::size_t neg_count = 0;
      for (std::size_t i = 0; i < count; ++i) {
        const auto& b = results[i].breakdown;
        if (!std::isfinite(b.total))
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " from " + provenance[i]);
        for (const auto& g : results[i].grads.entries())
          if (!g.tensor.all_finite())
            throw NumericalError("non-finite gradient in parameter '" + g.name + "' at epoch " +
                                 std::to_string(epoch) + " from " + provenance[i]);
        m.loss_total += b.total;
        m.loss_rank += b.rank;
        m.loss_contrastive += b.contrastive;
        m.loss_rotation += b.rotation;
        m.mean_target_score += b.mean_target_score;
        if (b.mean_negative_score) {
          neg_sum += *b.mean_negative_score;
          ++neg_count;
        }
        for (std::size_t p = 0; p < grads.size(); ++p) {
          auto& dst = grads.entries()[p].tensor;
          const auto& src = results[i].grads.entries()[p].tensor;
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      }
      const double n = static_cast<double>(count);
      m.loss_total /= n;
      m.loss_rank /= n;
      m.loss_contrastive /= n;
      m.loss_rotation /= n;
      m.mean_target_score /= n;
      if (neg_count) m.mean_negative_score = neg_sum / static_cast<double>(neg_count);
      const float inv = 1.0f / static_cast<float>(count);
      for (auto& e : grads.entries())
        for (auto& v : e.tensor.data()) v *= inv;

      adam_step(state.params, grads, state.adam, lr, run.schedule.weight_decay, run.adam);
      ++step;
      if (on_step) on_step(m);
    }
    state.epoch = epoch + 1;
    state.rng_state = shuffle.state();
    if (on_checkpoint && run.checkpoint_every && state.epoch % run.checkpoint_every == 0 && state.epoch < run.epochs)
      on_checkpoint(state);
  }
  return state;
}

}  // namespace skipclip::training
