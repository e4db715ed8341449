#include "skipclip/evaluation/finetune.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "skipclip/errors.hpp"
#include "skipclip/parallel.hpp"
#include "skipclip/rng.hpp"
#include "skipclip/sampling/sampler.hpp"

namespace skipclip::evaluation {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

std::string to_string(FinetuneMode mode) { return mode == FinetuneMode::kProbe ? "probe" : "full"; }

FinetuneMode parse_finetune_mode(const std::string& text) {
  if (text == "probe") return FinetuneMode::kProbe;
  if (text == "full") return FinetuneMode::kFull;
  throw ConfigError("finetune mode must be 'probe' or 'full', got '" + text + "'");
}

std::string report_json(const ProbeReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (double a : r.per_class_accuracy) per.push_back(a < 0 ? nlohmann::json(nullptr) : nlohmann::json(a));
  return nlohmann::json{{"top1_accuracy", r.top1_accuracy},
                        {"per_class_accuracy", per},
                        {"mode", to_string(r.mode)},
                        {"seed", r.seed},
                        {"test_videos", r.test_videos}}
      .dump(2);
}

Tensor average_probabilities(std::span<const Tensor> probabilities) {
  if (probabilities.empty()) throw ConfigError("average of zero probability vectors");
  Tensor avg(probabilities[0].shape());
  for (const auto& p : probabilities) {
    if (p.shape() != avg.shape()) throw ShapeError("probability vectors differ in length");
    for (std::size_t i = 0; i < p.size(); ++i) avg[i] += p[i];
  }
  for (auto& v : avg.data()) v /= static_cast<float>(probabilities.size());
  return avg;
}

std::size_t argmax_lowest(const Tensor& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

sampling::AugmentationRecord crop_record(const videoio::Video& v, const encoders::EncoderConfig& cfg, Rng* rng) {
  sampling::AugmentationSpec aug;
  aug.hflip_prob = 0.0;
  aug.crop_height = cfg.frame_height;
  aug.crop_width = cfg.frame_width;
  aug.random_crop = rng != nullptr;
  Rng unused;
  return sampling::draw_augmentation(v.height(), v.width(), aug, rng ? *rng : unused);
}

Tensor window_logits(const numerics::ParamSet<float>& params, const encoders::EncoderConfig& cfg, const Tensor& clip) {
  Tape<float> tape;
  encoders::BoundParams<float> bound(tape, params, [](const std::string&) { return false; });
  return tape.value(encoders::classify(tape, bound, encoders::encode_context(tape, bound, cfg, clip)));
}

// Per-dimension standardization of pooled context features, measured once on
// every non-overlapping training window with the starting parameters.
struct FeatureNorm {
  Tensor shift;      // -mean
  Tensor inv_scale;  // 1 / std, 1 for constant dimensions
};

FeatureNorm feature_norm(const numerics::ParamSet<float>& params, const encoders::EncoderConfig& cfg,
                         std::span<const videoio::Video> train, std::size_t window, std::size_t threads) {
  const encoders::ParamEncoder enc(params, cfg);
  std::vector<std::vector<Tensor>> pooled(train.size());
  parallel_for(train.size(), threads, [&](std::size_t i) {
    const auto& v = train[i];
    const auto rec = crop_record(v, cfg, nullptr);
    for (std::size_t w = 0; w < v.num_frames() / window; ++w) {
      const Tensor h = enc.encode_context(sampling::apply_augmentation(v.clip(w * window, (w + 1) * window), rec));
      const std::size_t c = h.dim(0), cells = h.dim(1) * h.dim(2);
      Tensor f(numerics::Shape{c});
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0;
        for (std::size_t j = 0; j < cells; ++j) acc += h[k * cells + j];
        f[k] = static_cast<float>(acc / static_cast<double>(cells));
      }
      pooled[i].push_back(std::move(f));
    }
  });
  const std::size_t dims = pooled.front().front().size();
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  double n = 0;
  for (const auto& per_video : pooled)
    for (const auto& f : per_video) {
      n += 1;
      for (std::size_t k = 0; k < dims; ++k) sum[k] += f[k];
    }
  for (const auto& per_video : pooled)
    for (const auto& f : per_video)
      for (std::size_t k = 0; k < dims; ++k) {
        const double d = f[k] - sum[k] / n;
        sq[k] += d * d;
      }
  FeatureNorm norm{Tensor(numerics::Shape{dims}), Tensor(numerics::Shape{dims})};
  for (std::size_t k = 0; k < dims; ++k) {
    const double sd = std::sqrt(sq[k] / n);
    norm.shift[k] = static_cast<float>(-sum[k] / n);
    norm.inv_scale[k] = sd > 0.0 ? static_cast<float>(1.0 / sd) : 1.0f;
  }
  return norm;
}

// Rewrites the head trained on standardized features as a head on raw features.
void fold_feature_norm(numerics::ParamSet<float>& params, const FeatureNorm& norm) {
  Tensor& w = params.at("cls.weight");
  Tensor& b = params.at("cls.bias");
  const std::size_t classes = w.dim(0), dims = w.dim(1);
  for (std::size_t i = 0; i < classes; ++i) {
    double bias = b[i];
    for (std::size_t k = 0; k < dims; ++k) {
      const double folded = static_cast<double>(w[i * dims + k]) * norm.inv_scale[k];
      bias += folded * norm.shift[k];
      w[i * dims + k] = static_cast<float>(folded);
    }
    b[i] = static_cast<float>(bias);
  }
}

}  // namespace

WindowPrediction sliding_window_predict(const numerics::ParamSet<float>& params, const encoders::EncoderConfig& cfg,
                                        const videoio::Video& video, std::size_t window) {
  if (window == 0 || video.num_frames() < window)
    throw DataError("sliding_window_predict: video '" + video.id + "' has " + std::to_string(video.num_frames()) +
                    " frames, fewer than the window of " + std::to_string(window));
  const auto rec = crop_record(video, cfg, nullptr);
  const std::size_t count = video.num_frames() / window;
  std::vector<Tensor> probs;
  for (std::size_t w = 0; w < count; ++w) {
    const Tensor clip = sampling::apply_augmentation(video.clip(w * window, (w + 1) * window), rec);
    probs.push_back(numerics::softmax(window_logits(params, cfg, clip)));
  }
  WindowPrediction out;
  out.probabilities = average_probabilities(probs);
  out.label = argmax_lowest(out.probabilities);
  out.windows = count;
  return out;
}

FinetuneResult finetune(numerics::ParamSet<float> params, const encoders::EncoderConfig& cfg,
                        std::span<const videoio::Video> train, std::span<const videoio::Video> test,
                        const FinetuneConfig& ft) {
  encoders::validate(cfg);
  training::validate(ft.schedule);
  if (ft.window != cfg.context_frames)
    throw ConfigError("finetune: window " + std::to_string(ft.window) + " must equal the context length " +
                      std::to_string(cfg.context_frames));
  if (ft.batch_size == 0) throw ConfigError("finetune: batch_size must be >= 1");
  if (train.empty() || test.empty()) throw DataError("finetune: train and test splits must be non-empty");
  for (auto split : {train, test})
    for (const auto& v : split) {
      if (!v.motion_class) throw DataError("finetune: video '" + v.id + "' has no motion_class label");
      if (*v.motion_class >= cfg.num_classes)
        throw DataError("finetune: video '" + v.id + "' label " + std::to_string(*v.motion_class) +
                        " exceeds num_classes " + std::to_string(cfg.num_classes));
      if (v.num_frames() < ft.window) throw DataError("finetune: video '" + v.id + "' is shorter than the window");
    }

  const auto trainable = [mode = ft.mode](const std::string& name) {
    return encoders::is_classifier_param(name) || (mode == FinetuneMode::kFull && encoders::is_context_param(name));
  };
  const FeatureNorm norm = feature_norm(params, cfg, train, ft.window, ft.threads);
  training::AdamState adam = training::AdamState::zeros_like(params);
  Rng shuffle = Rng::derive(ft.seed, "finetune-shuffle");

  for (std::size_t epoch = 0; epoch < ft.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
    const double lr = training::lr_at_epoch(ft.schedule, epoch);
    for (std::size_t begin = 0; begin < order.size(); begin += ft.batch_size) {
      const std::size_t count = std::min(ft.batch_size, order.size() - begin);
      std::vector<numerics::ParamSet<float>> grads(count);
      parallel_for(count, ft.threads, [&](std::size_t i) {
        const auto& v = train[order[begin + i]];
        Rng rng = Rng::derive(ft.seed, "finetune-example", epoch, begin + i);
        const std::size_t start = rng.uniform_index(v.num_frames() - ft.window + 1);
        const auto rec = crop_record(v, cfg, &rng);
        const Tensor clip = sampling::apply_augmentation(v.clip(start, start + ft.window), rec);
        Tape<float> tape;
        encoders::BoundParams<float> bound(tape, params, trainable);
        const Var pooled = numerics::global_mean_pool(tape, encoders::encode_context(tape, bound, cfg, clip));
        const Var standardized = numerics::mul(tape, numerics::add(tape, pooled, tape.constant(norm.shift)),
                                               tape.constant(norm.inv_scale));
        const Var logits = numerics::affine(tape, standardized, bound("cls.weight"), bound("cls.bias"));
        tape.backward(numerics::softmax_cross_entropy(tape, logits, *v.motion_class));
        grads[i] = bound.gradients();
      });
      numerics::ParamSet<float> total = params.zeros_like();
      for (const auto& g : grads)
        for (std::size_t p = 0; p < total.size(); ++p) {
          auto& dst = total.entries()[p].tensor;
          const auto& src = g.entries()[p].tensor;
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      const float inv = 1.0f / static_cast<float>(count);
      for (auto& e : total.entries())
        for (auto& v : e.tensor.data()) v *= inv;
      training::adam_step(params, total, adam, lr, ft.schedule.weight_decay, ft.adam, trainable);
    }
  }

  fold_feature_norm(params, norm);

  FinetuneResult result;
  result.report.mode = ft.mode;
  result.report.seed = ft.seed;
  result.report.test_videos = test.size();
  std::vector<std::size_t> predictions(test.size());
  parallel_for(test.size(), ft.threads, [&](std::size_t i) {
    predictions[i] = sliding_window_predict(params, cfg, test[i], ft.window).label;
  });
  std::vector<double> hits(cfg.num_classes, 0.0), seen(cfg.num_classes, 0.0);
  double correct = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::size_t label = *test[i].motion_class;
    seen[label] += 1;
    if (predictions[i] == label) {
      hits[label] += 1;
      correct += 1;
    }
  }
  result.report.top1_accuracy = correct / static_cast<double>(test.size());
  for (std::size_t c = 0; c < cfg.num_classes; ++c)
    result.report.per_class_accuracy.push_back(seen[c] > 0 ? hits[c] / seen[c] : -1.0);
  result.params = std::move(params);
  return result;
}

}  // namespace skipclip::evaluation
