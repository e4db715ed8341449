#pragma once

// Context encoder g (3D conv stack), target encoder f (2D conv stack), and
// the pool + affine heads for rotation and classification.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skipclip/numerics/ops.hpp"
#include "skipclip/numerics/param_set.hpp"
#include "skipclip/numerics/tape.hpp"

namespace skipclip::encoders {

using numerics::BasicTensor;
using numerics::ParamSet;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

struct ContextBlock {
  std::size_t channels = 0;
  std::size_t temporal_stride = 1;
  std::size_t spatial_stride = 1;
};

struct TargetBlock {
  std::size_t channels = 0;
  std::size_t spatial_stride = 1;
};

struct EncoderConfig {
  std::size_t input_channels = 1;
  std::size_t frame_height = 32;  // after cropping
  std::size_t frame_width = 32;
  std::size_t context_frames = 16;
  std::size_t kernel = 3;  // cubic / square kernels, padding kernel / 2
  std::vector<ContextBlock> context_blocks{{8, 2, 2}, {16, 2, 2}, {32, 2, 2}, {32, 2, 1}};
  std::vector<TargetBlock> target_blocks{{8, 2}, {16, 2}, {32, 2}, {32, 1}};
  /// Relu after the last conv block of each encoder.
  bool final_relu = false;
  std::size_t num_classes = 16;
};

inline constexpr std::size_t kNumRotations = 4;

struct GridShape {
  std::size_t channels = 0, height = 0, width = 0;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

GridShape context_grid(const EncoderConfig& cfg);
GridShape target_grid(const EncoderConfig& cfg);
/// Temporal extent of the context encoder output.
std::size_t context_output_frames(const EncoderConfig& cfg);

/// Grids must agree and the context's temporal axis must collapse to 1.
void validate(const EncoderConfig& cfg);

/// Hash of everything that determines parameter layout and forward semantics.
std::uint64_t architecture_fingerprint(const EncoderConfig& cfg);

/// Uniform(-a, a) with a = sqrt(1 / fan_in) for every tensor, reproducible from seed.
ParamSet<float> init_params(const EncoderConfig& cfg, std::uint64_t seed);

bool is_context_param(const std::string& name);
bool is_target_param(const std::string& name);
bool is_rotation_param(const std::string& name);
bool is_classifier_param(const std::string& name);

/// Parameters placed on a tape. Frozen ones become constants.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, const ParamSet<T>& params,
              const std::function<bool(const std::string&)>& trainable = {});

  Var operator()(const std::string& name) const;
  /// Gradients of the last backward() pass, zero for frozen or unreached names.
  ParamSet<T> gradients() const;

 private:
  Tape<T>* tape_;
  const ParamSet<T>* params_;
  std::vector<Var> vars_;
};

/// (K, C, h, w) frames -> (C, K, h, w) volume for the 3D stack.
template <typename T>
BasicTensor<T> context_volume(const BasicTensor<T>& clip);

/// g(c): (K, C, h, w) context -> (C_out, H_out, W_out).
template <typename T>
Var encode_context(Tape<T>& tape, const BoundParams<T>& params, const EncoderConfig& cfg,
                   const BasicTensor<T>& context);

/// f(x): a (C, h, w) frame or a (1, C, h, w) single-frame clip -> latent grid.
template <typename T>
Var encode_target(Tape<T>& tape, const BoundParams<T>& params, const EncoderConfig& cfg,
                  const BasicTensor<T>& frame);

/// Global mean pool then affine to four rotation logits.
template <typename T>
Var predict_rotation(Tape<T>& tape, const BoundParams<T>& params, Var z);

/// Global mean pool then affine to num_classes logits.
template <typename T>
Var classify(Tape<T>& tape, const BoundParams<T>& params, Var h);

/// Forward-only encoders behind one interface, so ranking evaluation can run
/// on learned parameters or on a hand-built oracle.
class LatentEncoder {
 public:
  virtual ~LatentEncoder() = default;
  virtual Tensor encode_context(const Tensor& context) const = 0;
  virtual Tensor encode_target(const Tensor& frame) const = 0;
};

class ParamEncoder final : public LatentEncoder {
 public:
  ParamEncoder(const ParamSet<float>& params, EncoderConfig cfg) : params_(&params), cfg_(std::move(cfg)) {}
  Tensor encode_context(const Tensor& context) const override;
  Tensor encode_target(const Tensor& frame) const override;
  const EncoderConfig& config() const { return cfg_; }

 private:
  const ParamSet<float>* params_;
  EncoderConfig cfg_;
};

}  // namespace skipclip::encoders
