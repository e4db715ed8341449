#pragma once

// Forward kernels and their taped, differentiable counterparts.
//
// Layouts: activations are (channels, [depth,] height, width); conv kernels
// are (out_ch, in_ch, [kd,] kh, kw). Convolution is cross-correlation.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "skipclip/numerics/tape.hpp"
#include "skipclip/numerics/tensor.hpp"

namespace skipclip::numerics {

struct ConvSpec {
  int dims = 2;                     // 2 or 3 spatial axes
  std::vector<std::size_t> stride;  // one entry per spatial axis
  std::vector<std::size_t> padding;
};

enum class PoolKind { kMax, kMean };

std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad);

// ---- plain kernels ---------------------------------------------------------

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                            const BasicTensor<T>& bias, const ConvSpec& spec);

template <typename T>
struct ConvGrads {
  BasicTensor<T> input, kernel, bias;
};

template <typename T>
ConvGrads<T> conv_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                           const BasicTensor<T>& out_grad, const ConvSpec& spec);

/// Pooling over the trailing 1..3 spatial axes of a (C, spatial...) tensor.
template <typename T>
BasicTensor<T> pool_forward(const BasicTensor<T>& input, PoolKind kind,
                            std::span<const std::size_t> window,
                            std::span<const std::size_t> stride);

template <typename T>
BasicTensor<T> affine_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias);

/// Max-subtracted softmax.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// Returns (-log p[label], p).
template <typename T>
std::pair<T, BasicTensor<T>> softmax_cross_entropy_forward(const BasicTensor<T>& logits,
                                                           std::size_t label);

/// Per-cell cosine similarity of two (C, H, W) grids, as an (H, W) grid.
/// Cells where either vector has zero norm get 0 and bump *zero_cells.
template <typename T>
BasicTensor<T> cell_cosines(const BasicTensor<T>& h, const BasicTensor<T>& z,
                            std::size_t* zero_cells = nullptr);

/// Sequential sum over the flat index divided by the element count.
template <typename T>
T grid_mean(const BasicTensor<T>& grid);

// ---- taped operators -------------------------------------------------------

template <typename T>
Var conv(Tape<T>& tape, Var input, Var kernel, Var bias, const ConvSpec& spec);
template <typename T>
Var relu(Tape<T>& tape, Var x);
template <typename T>
Var pool(Tape<T>& tape, Var x, PoolKind kind, std::vector<std::size_t> window,
         std::vector<std::size_t> stride);
/// Mean over every spatial cell: (C, spatial...) -> (C).
template <typename T>
Var global_mean_pool(Tape<T>& tape, Var x);
template <typename T>
Var affine(Tape<T>& tape, Var x, Var weight, Var bias);
template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::size_t label);
/// Average per-cell cosine between two latent grids; a scalar in [-1, 1].
template <typename T>
Var cosine_score(Tape<T>& tape, Var h, Var z);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);
template <typename T>
Var scale(Tape<T>& tape, Var a, T factor);
template <typename T>
Var sum(Tape<T>& tape, Var a);
/// Arithmetic mean of scalar nodes, summed in order.
template <typename T>
Var mean(Tape<T>& tape, std::span<const Var> scalars);
/// Reshape without copying semantics changes.
template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape shape);

}  // namespace skipclip::numerics
