#include "skipclip/encoders/encoders.hpp"

#include <cmath>
#include <sstream>

#include "skipclip/errors.hpp"
#include "skipclip/rng.hpp"

namespace skipclip::encoders {

using numerics::ConvSpec;
using numerics::Shape;

namespace {

std::string conv_name(const char* prefix, std::size_t block, const char* what) {
  return std::string(prefix) + ".conv" + std::to_string(block) + "." + what;
}

std::size_t pad(const EncoderConfig& cfg) { return cfg.kernel / 2; }

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::size_t context_output_frames(const EncoderConfig& cfg) {
  std::size_t d = cfg.context_frames;
  for (const auto& b : cfg.context_blocks) d = numerics::conv_output_extent(d, cfg.kernel, b.temporal_stride, pad(cfg));
  return d;
}

GridShape context_grid(const EncoderConfig& cfg) {
  GridShape g{cfg.input_channels, cfg.frame_height, cfg.frame_width};
  for (const auto& b : cfg.context_blocks) {
    g.channels = b.channels;
    g.height = numerics::conv_output_extent(g.height, cfg.kernel, b.spatial_stride, pad(cfg));
    g.width = numerics::conv_output_extent(g.width, cfg.kernel, b.spatial_stride, pad(cfg));
  }
  return g;
}

GridShape target_grid(const EncoderConfig& cfg) {
  GridShape g{cfg.input_channels, cfg.frame_height, cfg.frame_width};
  for (const auto& b : cfg.target_blocks) {
    g.channels = b.channels;
    g.height = numerics::conv_output_extent(g.height, cfg.kernel, b.spatial_stride, pad(cfg));
    g.width = numerics::conv_output_extent(g.width, cfg.kernel, b.spatial_stride, pad(cfg));
  }
  return g;
}

void validate(const EncoderConfig& cfg) {
  if (cfg.context_blocks.empty() || cfg.target_blocks.empty())
    throw ConfigError("encoder: both encoders need at least one conv block");
  if (cfg.kernel == 0 || cfg.kernel % 2 == 0) throw ConfigError("encoder: kernel must be odd");
  if (cfg.input_channels == 0 || cfg.frame_height == 0 || cfg.frame_width == 0 || cfg.context_frames == 0)
    throw ConfigError("encoder: input dimensions must be positive");
  if (cfg.num_classes < 2) throw ConfigError("encoder: num_classes must be at least 2");
  for (const auto& b : cfg.context_blocks)
    if (b.channels == 0 || b.temporal_stride == 0 || b.spatial_stride == 0)
      throw ConfigError("encoder: context block channels and strides must be positive");
  for (const auto& b : cfg.target_blocks)
    if (b.channels == 0 || b.spatial_stride == 0)
      throw ConfigError("encoder: target block channels and strides must be positive");
  if (context_output_frames(cfg) != 1)
    throw ConfigError("encoder: context temporal strides reduce " + std::to_string(cfg.context_frames) +
                      " frames to " + std::to_string(context_output_frames(cfg)) + ", not 1");
  const GridShape g = context_grid(cfg), f = target_grid(cfg);
  if (!(g == f))
    throw ConfigError("encoder: context grid (" + std::to_string(g.channels) + "," + std::to_string(g.height) + "," +
                      std::to_string(g.width) + ") differs from target grid (" + std::to_string(f.channels) + "," +
                      std::to_string(f.height) + "," + std::to_string(f.width) + ")");
}

std::uint64_t architecture_fingerprint(const EncoderConfig& cfg) {
  std::ostringstream os;
  os << "in=" << cfg.input_channels << "x" << cfg.frame_height << "x" << cfg.frame_width << ";K=" << cfg.context_frames
     << ";k=" << cfg.kernel << ";final_relu=" << cfg.final_relu << ";classes=" << cfg.num_classes << ";g=";
  for (const auto& b : cfg.context_blocks) os << b.channels << "/" << b.temporal_stride << "/" << b.spatial_stride << ",";
  os << ";f=";
  for (const auto& b : cfg.target_blocks) os << b.channels << "/" << b.spatial_stride << ",";
  return fnv1a64(os.str());
}

ParamSet<float> init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  ParamSet<float> params;
  auto add_uniform = [&](const std::string& name, Shape shape, std::size_t fan_in) {
    Rng rng = Rng::derive(seed, "init:" + name);
    const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-a, a));
    params.add(name, std::move(t));
  };
  const std::size_t k = cfg.kernel;
  std::size_t in = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.context_blocks.size(); ++i) {
    const std::size_t out = cfg.context_blocks[i].channels, fan = in * k * k * k;
    add_uniform(conv_name("g", i, "weight"), {out, in, k, k, k}, fan);
    add_uniform(conv_name("g", i, "bias"), {out}, fan);
    in = out;
  }
  in = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.target_blocks.size(); ++i) {
    const std::size_t out = cfg.target_blocks[i].channels, fan = in * k * k;
    add_uniform(conv_name("f", i, "weight"), {out, in, k, k}, fan);
    add_uniform(conv_name("f", i, "bias"), {out}, fan);
    in = out;
  }
  const std::size_t latent = target_grid(cfg).channels;
  add_uniform("rot.weight", {kNumRotations, latent}, latent);
  add_uniform("rot.bias", {kNumRotations}, latent);
  add_uniform("cls.weight", {cfg.num_classes, latent}, latent);
  add_uniform("cls.bias", {cfg.num_classes}, latent);
  return params;
}

bool is_context_param(const std::string& name) { return starts_with(name, "g."); }
bool is_target_param(const std::string& name) { return starts_with(name, "f."); }
bool is_rotation_param(const std::string& name) { return starts_with(name, "rot."); }
bool is_classifier_param(const std::string& name) { return starts_with(name, "cls."); }

template <typename T>
BoundParams<T>::BoundParams(Tape<T>& tape, const ParamSet<T>& params,
                            const std::function<bool(const std::string&)>& trainable)
    : tape_(&tape), params_(&params) {
  for (const auto& e : params.entries())
    vars_.push_back(!trainable || trainable(e.name) ? tape.parameter(e.tensor) : tape.constant(e.tensor));
}

template <typename T>
Var BoundParams<T>::operator()(const std::string& name) const {
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == name) return vars_[i];
  throw ConfigError("missing parameter '" + name + "'");
}

template <typename T>
ParamSet<T> BoundParams<T>::gradients() const {
  ParamSet<T> grads;
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) grads.add(entries[i].name, tape_->grad(vars_[i]));
  return grads;
}

template <typename T>
BasicTensor<T> context_volume(const BasicTensor<T>& clip) {
  if (clip.rank() != 4) throw ShapeError("context clip must be (K, C, h, w), got " + numerics::shape_string(clip.shape()));
  const std::size_t k = clip.dim(0), c = clip.dim(1), plane = clip.dim(2) * clip.dim(3);
  BasicTensor<T> out(Shape{c, k, clip.dim(2), clip.dim(3)});
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) out[(ch * k + f) * plane + i] = clip[(f * c + ch) * plane + i];
  return out;
}

template <typename T>
Var encode_context(Tape<T>& tape, const BoundParams<T>& params, const EncoderConfig& cfg,
                   const BasicTensor<T>& context) {
  const Shape expected{cfg.context_frames, cfg.input_channels, cfg.frame_height, cfg.frame_width};
  if (context.shape() != expected)
    throw ShapeError("encode_context: context " + numerics::shape_string(context.shape()) + " does not match " +
                     numerics::shape_string(expected));
  Var x = tape.constant(context_volume(context));
  const std::size_t p = pad(cfg);
  for (std::size_t i = 0; i < cfg.context_blocks.size(); ++i) {
    const auto& b = cfg.context_blocks[i];
    const ConvSpec spec{3, {b.temporal_stride, b.spatial_stride, b.spatial_stride}, {p, p, p}};
    x = numerics::conv(tape, x, params(conv_name("g", i, "weight")), params(conv_name("g", i, "bias")), spec);
    if (i + 1 < cfg.context_blocks.size() || cfg.final_relu) x = numerics::relu(tape, x);
  }
  const GridShape g = context_grid(cfg);
  return numerics::reshape(tape, x, Shape{g.channels, g.height, g.width});
}

template <typename T>
Var encode_target(Tape<T>& tape, const BoundParams<T>& params, const EncoderConfig& cfg,
                  const BasicTensor<T>& frame) {
  BasicTensor<T> input = frame;
  if (frame.rank() == 4) {
    if (frame.dim(0) != 1) throw ShapeError("target encoder requires single-frame clips");
    input = frame.reshaped({frame.dim(1), frame.dim(2), frame.dim(3)});
  }
  const Shape expected{cfg.input_channels, cfg.frame_height, cfg.frame_width};
  if (input.shape() != expected)
    throw ShapeError("encode_target: frame " + numerics::shape_string(input.shape()) + " does not match " +
                     numerics::shape_string(expected));
  Var x = tape.constant(std::move(input));
  const std::size_t p = pad(cfg);
  for (std::size_t i = 0; i < cfg.target_blocks.size(); ++i) {
    const auto& b = cfg.target_blocks[i];
    const ConvSpec spec{2, {b.spatial_stride, b.spatial_stride}, {p, p}};
    x = numerics::conv(tape, x, params(conv_name("f", i, "weight")), params(conv_name("f", i, "bias")), spec);
    if (i + 1 < cfg.target_blocks.size() || cfg.final_relu) x = numerics::relu(tape, x);
  }
  return x;
}

template <typename T>
Var predict_rotation(Tape<T>& tape, const BoundParams<T>& params, Var z) {
  return numerics::affine(tape, numerics::global_mean_pool(tape, z), params("rot.weight"), params("rot.bias"));
}

template <typename T>
Var classify(Tape<T>& tape, const BoundParams<T>& params, Var h) {
  return numerics::affine(tape, numerics::global_mean_pool(tape, h), params("cls.weight"), params("cls.bias"));
}

Tensor ParamEncoder::encode_context(const Tensor& context) const {
  Tape<float> tape;
  BoundParams<float> bound(tape, *params_, [](const std::string&) { return false; });
  return tape.value(encoders::encode_context(tape, bound, cfg_, context));
}

Tensor ParamEncoder::encode_target(const Tensor& frame) const {
  Tape<float> tape;
  BoundParams<float> bound(tape, *params_, [](const std::string&) { return false; });
  return tape.value(encoders::encode_target(tape, bound, cfg_, frame));
}

#define SKIPCLIP_INSTANTIATE_ENCODERS(T)                                                                        \
  template class BoundParams<T>;                                                                                \
  template BasicTensor<T> context_volume(const BasicTensor<T>&);                                                \
  template Var encode_context(Tape<T>&, const BoundParams<T>&, const EncoderConfig&, const BasicTensor<T>&);    \
  template Var encode_target(Tape<T>&, const BoundParams<T>&, const EncoderConfig&, const BasicTensor<T>&);     \
  template Var predict_rotation(Tape<T>&, const BoundParams<T>&, Var);                                         \
  template Var classify(Tape<T>&, const BoundParams<T>&, Var);

SKIPCLIP_INSTANTIATE_ENCODERS(float)
SKIPCLIP_INSTANTIATE_ENCODERS(double)

}  // namespace skipclip::encoders
