#pragma once

// Finite-difference check of the full objective on tiny random instances.

#include <cstdint>
#include <string>
#include <vector>

#include "skipclip/encoders/encoders.hpp"
#include "skipclip/numerics/gradcheck.hpp"
#include "skipclip/objectives/objectives.hpp"
#include "skipclip/sampling/sampler.hpp"

namespace skipclip::objectives {

struct TinyProblem {
  sampling::SampleSpec sample;
  sampling::AugmentationSpec augment;
  encoders::EncoderConfig encoder;
  LossConfig loss;
  std::size_t videos = 3;
  std::size_t frames = 0;  // 0: the sampler's minimum
  std::size_t height = 10, width = 10;
};

/// K=4, M=3, r=2, two conv blocks per encoder (4 and 6 channels), 8x8 crops, 2x2 grid.
TinyProblem tiny_problem();

struct ObjectiveCheckConfig {
  std::size_t instances = 20;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double tolerance = 1e-4;
  double min_kink = 1e-3;  // instances closer to a relu or hinge kink are redrawn
  double param_scale = 3.0;  // applied to the fan-in initialization of each draw
  std::size_t max_draws_per_instance = 100;
};

struct ObjectiveCheckReport {
  std::vector<numerics::GradCheckReport> instances;
  double max_rel_error = 0.0;
  std::size_t redraws = 0;
  std::size_t coordinates = 0;
  double seconds = 0.0;
  bool passed() const;
};

std::string report_json(const ObjectiveCheckReport& report);

ObjectiveCheckReport check_objective_gradients(const TinyProblem& problem, const ObjectiveCheckConfig& cfg);

}  // namespace skipclip::objectives
