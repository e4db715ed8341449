#pragma once

// Reverse-mode differentiation over a recorded operation tape.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/tensor.hpp"

namespace skipclip::numerics {

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::size_t index = 0;
};

template <typename T>
class Tape {
 public:
  using TensorT = BasicTensor<T>;
  /// Pulls the node's output gradient back into its parents.
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Var constant(TensorT value) { return push(std::move(value), {}, nullptr, false); }
  Var parameter(TensorT value) { return push(std::move(value), {}, nullptr, true); }

  /// Records an operator output. Parents must already be on this tape, so the
  /// graph is acyclic by construction.
  Var record(TensorT value, std::vector<Var> parents, Backprop backprop) {
    bool needs = false;
    for (const Var& p : parents) {
      if (p.index >= nodes_.size()) throw ShapeError("tape: parent is not on this tape");
      needs = needs || nodes_[p.index].requires_grad;
    }
    return push(std::move(value), std::move(parents), needs ? std::move(backprop) : nullptr, needs);
  }

  const TensorT& value(Var v) const { return nodes_.at(v.index).value; }
  const std::vector<Var>& parents(Var v) const { return nodes_.at(v.index).parents; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of the last backward() root w.r.t. v; zeros if v was unreachable.
  TensorT grad(Var v) const {
    const Node& n = nodes_.at(v.index);
    return n.grad ? *n.grad : TensorT(n.value.shape());
  }

  /// Mutable gradient buffer, allocated on first use. Used by Backprop bodies.
  TensorT& grad_buffer(Var v) {
    Node& n = nodes_.at(v.index);
    if (!n.grad) n.grad.emplace(n.value.shape());
    return *n.grad;
  }

  const TensorT& output_grad(std::size_t self) const { return *nodes_[self].grad; }

  void backward(Var root) {
    if (value(root).size() != 1)
      throw ShapeError("backward: root must be a scalar, got shape " +
                       shape_string(value(root).shape()));
    for (Node& n : nodes_) n.grad.reset();
    grad_buffer(root)[0] = T{1};
    for (std::size_t i = root.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad && n.backprop) n.backprop(*this, i);
    }
  }

  /// Smallest distance of any recorded kink argument from its non-smooth point.
  void note_kink(T distance) { min_kink_ = std::min(min_kink_, distance); }
  T min_kink_distance() const noexcept { return min_kink_; }

  void note_zero_norm_cell() { ++zero_norm_cells_; }
  std::size_t zero_norm_cells() const noexcept { return zero_norm_cells_; }

  /// Smallest latent-cell norm fed to a cosine (its singular point is 0).
  void note_cell_norm(T norm) { min_cell_norm_ = std::min(min_cell_norm_, norm); }
  T min_cell_norm() const noexcept { return min_cell_norm_; }

 private:
  struct Node {
    TensorT value;
    std::optional<TensorT> grad;
    std::vector<Var> parents;
    Backprop backprop;
    bool requires_grad = false;
  };

  Var push(TensorT value, std::vector<Var> parents, Backprop backprop, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), std::nullopt, std::move(parents), std::move(backprop),
                          requires_grad});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  T min_kink_ = std::numeric_limits<T>::infinity();
  std::size_t zero_norm_cells_ = 0;
  T min_cell_norm_ = std::numeric_limits<T>::infinity();
};

}  // namespace skipclip::numerics
