#include "skipclip/objectives/objective_check.hpp"

#include <chrono>

#include <json.hpp>

#include "skipclip/errors.hpp"
#include "skipclip/rng.hpp"

namespace skipclip::objectives {

using numerics::ParamSet;
using numerics::Tensor;

TinyProblem tiny_problem() {
  TinyProblem p;
  p.sample.context_frames = 4;
  p.sample.num_targets = 3;
  p.sample.target_rate = 2;
  p.sample.target_length = 1;
  p.sample.num_negatives = 3;
  p.augment.crop_height = 8;
  p.augment.crop_width = 8;
  p.encoder.input_channels = 1;
  p.encoder.frame_height = 8;
  p.encoder.frame_width = 8;
  p.encoder.context_frames = 4;
  p.encoder.context_blocks = {{4, 2, 2}, {6, 2, 2}};
  p.encoder.target_blocks = {{4, 2}, {6, 2}};
  p.encoder.num_classes = 2;
  return p;
}

bool ObjectiveCheckReport::passed() const {
  if (instances.empty()) return false;
  for (const auto& r : instances)
    if (!r.passed()) return false;
  return true;
}

std::string report_json(const ObjectiveCheckReport& report) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& r : report.instances) {
    nlohmann::json worst;
    for (const auto& p : r.params)
      if (worst.is_null() || p.max_rel_error > worst["max_rel_error"].get<double>())
        worst = {{"param", p.name}, {"index", p.worst_index}, {"analytic", p.analytic}, {"numeric", p.numeric},
                 {"max_rel_error", p.max_rel_error}};
    inst.push_back({{"max_rel_error", r.max_rel_error}, {"flagged", r.flagged}, {"worst", worst}});
  }
  nlohmann::json doc{{"passed", report.passed()},         {"max_rel_error", report.max_rel_error},
                     {"instances", inst},                 {"redraws", report.redraws},
                     {"coordinates", report.coordinates}, {"seconds", report.seconds}};
  return doc.dump();
}

namespace {

std::vector<videoio::Video> random_videos(const TinyProblem& p, Rng& rng) {
  const std::size_t n = p.frames ? p.frames : p.sample.min_frames();
  std::vector<videoio::Video> out;
  for (std::size_t v = 0; v < p.videos; ++v) {
    Tensor frames({n, p.encoder.input_channels, p.height, p.width});
    for (float& x : frames.data()) x = static_cast<float>(rng.uniform01());
    out.push_back(videoio::Video{std::move(frames), "tiny_" + std::to_string(v), std::nullopt});
  }
  return out;
}

}  // namespace

ObjectiveCheckReport check_objective_gradients(const TinyProblem& p, const ObjectiveCheckConfig& cfg) {
  encoders::validate(p.encoder);
  validate(p.loss);
  const auto start = std::chrono::steady_clock::now();
  ObjectiveCheckReport report;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    bool done = false;
    for (std::size_t draw = 0; draw < cfg.max_draws_per_instance && !done; ++draw) {
      Rng rng = Rng::derive(cfg.seed, "gradcheck", i, draw);
      const auto videos = random_videos(p, rng);
      const sampling::TrainingExample example =
          sampling::make_example(videos, rng.uniform_index(videos.size()), p.sample, p.augment, rng);
      ParamSet<double> params = encoders::init_params(p.encoder, rng.next()).cast<double>();
      for (auto& e : params.entries())
        for (double& x : e.tensor.data()) x *= cfg.param_scale;

      const auto base = example_gradient<double>(params, p.encoder, example, p.loss);
      if (base.min_kink < cfg.min_kink || base.zero_norm_cells > 0) {
        ++report.redraws;
        continue;
      }
      const numerics::CheckedObjective objective = [&](const ParamSet<double>& theta, ParamSet<double>* grads) {
        auto g = example_gradient<double>(theta, p.encoder, example, p.loss);
        if (grads) *grads = std::move(g.grads);
        return g.breakdown.total;
      };
      numerics::GradCheckReport r = numerics::finite_diff_check(objective, params, cfg.step, cfg.tolerance);
      report.max_rel_error = std::max(report.max_rel_error, r.max_rel_error);
      for (const auto& e : params.entries()) report.coordinates += e.tensor.size();
      report.instances.push_back(std::move(r));
      done = true;
    }
    if (!done)
      throw NumericalError("gradcheck: no kink-free draw for instance " + std::to_string(i) + " after " +
                           std::to_string(cfg.max_draws_per_instance) + " attempts");
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace skipclip::objectives
