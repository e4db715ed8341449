#include "skipclip/objectives/objectives.hpp"

#include <cmath>
#include <limits>

#include "skipclip/errors.hpp"

namespace skipclip::objectives {

void validate(const LossConfig& cfg) {
  if (!cfg.enable_rank && !cfg.enable_contrastive && !cfg.enable_rotation)
    throw ConfigError("loss: at least one of rank, contrastive, rotation must be enabled");
  if (!(cfg.delta_rank >= 0.0) || !(cfg.delta_neg >= 0.0)) throw ConfigError("loss: margins must be >= 0");
}

template <typename T>
T score(const BasicTensor<T>& h, const BasicTensor<T>& z, std::size_t* zero_cells) {
  return numerics::grid_mean(numerics::cell_cosines(h, z, zero_cells));
}

template <typename T>
T rank_hinge(std::span<const T> s, T delta, std::span<T> grad, T* kink) {
  if (s.size() < 2) throw ConfigError("rank loss needs at least 2 target scores");
  T loss{0};
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const T a = -s[i] + s[j] + delta;
      if (kink) *kink = std::min(*kink, std::abs(a));
      if (a > T{0}) {
        loss += a;
        if (!grad.empty()) {
          grad[i] -= T{1};
          grad[j] += T{1};
        }
      }
    }
  return loss;
}

template <typename T>
T contrastive_hinge(std::span<const T> targets, std::span<const T> negatives, T delta, std::span<T> target_grad,
                    std::span<T> negative_grad, T* kink) {
  if (negatives.empty()) throw ConfigError("contrastive loss needs at least one negative score");
  if (targets.empty()) throw ConfigError("contrastive loss needs at least one target score");
  T neg_sum{0};
  for (T v : negatives) neg_sum += v;
  const T neg_mean = neg_sum / static_cast<T>(negatives.size());
  T loss{0};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const T a = -targets[i] + neg_mean + delta;
    if (kink) *kink = std::min(*kink, std::abs(a));
    if (a > T{0}) {
      loss += a;
      if (!target_grad.empty()) target_grad[i] -= T{1};
      if (!negative_grad.empty())
        for (auto& g : negative_grad) g += T{1} / static_cast<T>(negatives.size());
    }
  }
  return loss;
}

namespace {

template <typename T>
std::vector<T> scalar_values(Tape<T>& tape, std::span<const Var> vars) {
  std::vector<T> out;
  out.reserve(vars.size());
  for (const Var& v : vars) out.push_back(tape.value(v).item());
  return out;
}

}  // namespace

template <typename T>
Var rank_loss(Tape<T>& tape, std::span<const Var> target_scores, T delta) {
  const std::vector<T> s = scalar_values(tape, target_scores);
  T kink = std::numeric_limits<T>::infinity();
  const T loss = rank_hinge<T>(s, delta, {}, &kink);
  tape.note_kink(kink);
  std::vector<Var> parents(target_scores.begin(), target_scores.end());
  return tape.record(BasicTensor<T>::scalar(loss), parents, [parents, delta](Tape<T>& t, std::size_t self) {
    const std::vector<T> s = scalar_values<T>(t, parents);
    std::vector<T> g(s.size(), T{0});
    rank_hinge<T>(s, delta, g);
    const T up = t.output_grad(self)[0];
    for (std::size_t i = 0; i < parents.size(); ++i)
      if (t.requires_grad(parents[i])) t.grad_buffer(parents[i])[0] += up * g[i];
  });
}

template <typename T>
Var contrastive_loss(Tape<T>& tape, std::span<const Var> target_scores, std::span<const Var> negative_scores,
                     T delta) {
  const std::vector<T> ts = scalar_values(tape, target_scores), ns = scalar_values(tape, negative_scores);
  T kink = std::numeric_limits<T>::infinity();
  const T loss = contrastive_hinge<T>(ts, ns, delta, {}, {}, &kink);
  tape.note_kink(kink);
  std::vector<Var> parents(target_scores.begin(), target_scores.end());
  parents.insert(parents.end(), negative_scores.begin(), negative_scores.end());
  const std::size_t m = target_scores.size();
  return tape.record(BasicTensor<T>::scalar(loss), parents, [parents, m, delta](Tape<T>& t, std::size_t self) {
    const std::vector<T> all = scalar_values<T>(t, parents);
    const std::span<const T> ts(all.data(), m), ns(all.data() + m, all.size() - m);
    std::vector<T> g(all.size(), T{0});
    contrastive_hinge<T>(ts, ns, delta, std::span<T>(g.data(), m), std::span<T>(g.data() + m, all.size() - m));
    const T up = t.output_grad(self)[0];
    for (std::size_t i = 0; i < parents.size(); ++i)
      if (t.requires_grad(parents[i])) t.grad_buffer(parents[i])[0] += up * g[i];
  });
}

template <typename T>
Var rotation_loss(Tape<T>& tape, std::span<const Var> rotation_logits, std::span<const std::size_t> labels) {
  if (rotation_logits.size() != labels.size() || labels.empty())
    throw ConfigError("rotation loss needs one label per rotated target");
  std::vector<Var> terms;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= encoders::kNumRotations)
      throw ConfigError("rotation label " + std::to_string(labels[i]) + " is outside {0,1,2,3}");
    terms.push_back(numerics::softmax_cross_entropy(tape, rotation_logits[i], labels[i]));
  }
  return numerics::mean<T>(tape, terms);
}

template <typename T>
TapedLoss<T> total_loss(Tape<T>& tape, const encoders::BoundParams<T>& params, const encoders::EncoderConfig& enc,
                        const sampling::TrainingExample& ex, const LossConfig& cfg) {
  validate(cfg);
  TapedLoss<T> out;
  LossBreakdown& b = out.breakdown;

  const Var h = encoders::encode_context(tape, params, enc, ex.context.template cast<T>());
  std::vector<Var> target_scores, negative_scores;
  for (const auto& x : ex.targets) {
    const Var z = encoders::encode_target(tape, params, enc, x.template cast<T>());
    target_scores.push_back(numerics::cosine_score(tape, h, z));
  }
  if (cfg.enable_contrastive)
    for (const auto& x : ex.negatives) {
      const Var z = encoders::encode_target(tape, params, enc, x.template cast<T>());
      negative_scores.push_back(numerics::cosine_score(tape, h, z));
    }

  std::vector<Var> terms;
  if (cfg.enable_rank) {
    const Var r = rank_loss<T>(tape, target_scores, static_cast<T>(cfg.delta_rank));
    b.rank = static_cast<double>(tape.value(r).item());
    terms.push_back(r);
  }
  if (cfg.enable_contrastive) {
    const Var c = contrastive_loss<T>(tape, target_scores, negative_scores, static_cast<T>(cfg.delta_neg));
    b.contrastive = static_cast<double>(tape.value(c).item());
    terms.push_back(c);
  }
  if (cfg.enable_rotation) {
    if (ex.rotation_inputs.empty()) throw ConfigError("rotation loss enabled but the example has no rotated targets");
    std::vector<Var> logits;
    for (const auto& x : ex.rotation_inputs)
      logits.push_back(encoders::predict_rotation(tape, params, encoders::encode_target(tape, params, enc, x.template cast<T>())));
    const Var r = rotation_loss<T>(tape, logits, ex.rotation_labels);
    b.rotation = static_cast<double>(tape.value(r).item());
    terms.push_back(r);
  }

  out.total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = numerics::add(tape, out.total, terms[i]);
  b.total = static_cast<double>(tape.value(out.total).item());

  for (const Var& s : target_scores) b.scores.target_scores.push_back(static_cast<double>(tape.value(s).item()));
  for (const Var& s : negative_scores) b.scores.negative_scores.push_back(static_cast<double>(tape.value(s).item()));
  double acc = 0.0;
  for (double s : b.scores.target_scores) acc += s;
  b.mean_target_score = acc / static_cast<double>(b.scores.target_scores.size());
  if (!b.scores.negative_scores.empty()) {
    acc = 0.0;
    for (double s : b.scores.negative_scores) acc += s;
    b.mean_negative_score = acc / static_cast<double>(b.scores.negative_scores.size());
  }
  return out;
}

template <typename T>
ExampleGradient<T> example_gradient(const ParamSet<T>& params, const encoders::EncoderConfig& enc,
                                    const sampling::TrainingExample& example, const LossConfig& cfg,
                                    const std::function<bool(const std::string&)>& trainable) {
  Tape<T> tape;
  encoders::BoundParams<T> bound(tape, params, trainable);
  TapedLoss<T> loss = total_loss(tape, bound, enc, example, cfg);
  tape.backward(loss.total);
  return ExampleGradient<T>{std::move(loss.breakdown), bound.gradients(), tape.min_kink_distance(),
                            tape.zero_norm_cells(), tape.min_cell_norm()};
}

#define SKIPCLIP_INSTANTIATE_OBJECTIVES(T)                                                                      \
  template T score(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t*);                                 \
  template T rank_hinge(std::span<const T>, T, std::span<T>, T*);                                               \
  template T contrastive_hinge(std::span<const T>, std::span<const T>, T, std::span<T>, std::span<T>, T*);      \
  template Var rank_loss(Tape<T>&, std::span<const Var>, T);                                                    \
  template Var contrastive_loss(Tape<T>&, std::span<const Var>, std::span<const Var>, T);                       \
  template Var rotation_loss(Tape<T>&, std::span<const Var>, std::span<const std::size_t>);                     \
  template TapedLoss<T> total_loss(Tape<T>&, const encoders::BoundParams<T>&, const encoders::EncoderConfig&,   \
                                   const sampling::TrainingExample&, const LossConfig&);                        \
  template ExampleGradient<T> example_gradient(const ParamSet<T>&, const encoders::EncoderConfig&,              \
                                               const sampling::TrainingExample&, const LossConfig&,             \
                                               const std::function<bool(const std::string&)>&);

SKIPCLIP_INSTANTIATE_OBJECTIVES(float)
SKIPCLIP_INSTANTIATE_OBJECTIVES(double)

}  // namespace skipclip::objectives
