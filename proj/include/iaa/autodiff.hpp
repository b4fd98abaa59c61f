#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "iaa/tensor.hpp"

namespace iaa {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  int index() const { return index_; }

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
};

// A gradient query: scalar loss node plus the leaves to differentiate
// against. Leaves that do not feed the loss receive all-zero gradients.
struct GradientRequest {
  Var loss;
  std::vector<Var> wrt;
};

// Single-evaluation reverse-mode tape. Nodes are appended in topological
// order (inputs before outputs); backward replays them in reverse. A tape
// is confined to one thread; concurrent work builds private tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Tensor value);
  // Tracked but never differentiated (frames, targets, fixed parameters).
  Var constant(Tensor value);

  // Reverse sweep from a scalar loss; one gradient per requested leaf,
  // each shaped like its leaf.
  std::vector<Tensor> gradients(Var loss, const std::vector<Var>& wrt);

  const Tensor& value(int index) const { return nodes_[index].value; }
  bool requires_grad(int index) const { return nodes_[index].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // --- used by op implementations ---
  using Backprop = std::function<void(Tape&, const Tensor& gout)>;
  Var emit(Tensor value, bool requires_grad, Backprop backprop);
  // Zero-initialized gradient accumulation buffer for a node.
  Tensor& grad_buffer(int index);

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    Backprop backprop;  // empty for leaves/constants
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> has_grad_;
};

std::vector<Tensor> backward(const GradientRequest& request);

// ---- differentiable operations ----
// Elementwise ops require identical shapes and throw ShapeError otherwise.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var neg(Var a);
Var relu(Var a);

// Reductions produce one-element tensors of shape [1].
Var sum(Var a);
Var mean(Var a);
// sqrt(sum of squares); the subgradient at the all-zero tensor is zero.
Var l2_norm(Var a);

// Cross-correlation with zero padding: input [C,H,W] * kernel [K,C,kh,kw]
// -> [K,H',W'] with H' = H + 2*pad_h - kh + 1. Odd kernel extents only.
Var conv2d(Var input, Var kernel, std::size_t pad_h, std::size_t pad_w);

// x [K,H,W] + b [K], bias broadcast over every position of channel k.
Var add_channel_bias(Var x, Var b);

// Samples image [C,H,W] at (x+dx, y+dy) with bilinear weights and border
// clamping. The shift is a fixed parameter, not differentiated.
Var bilinear_sample(Var image, double dx, double dy);

// out = x[i, ...]; drops the leading axis.
Var select0(Var x, std::size_t i);
// Concatenation along the leading axis; trailing extents must match.
Var concat0(Var a, Var b);
// out[d, ...] = x[d, ...] * s[...]; s shaped like one leading-axis slice.
Var mul_broadcast0(Var x, Var s);
// Mean over all trailing axes: [D, ...] -> [D].
Var mean_per_slice0(Var x);
// Softmax across the leading axis at every trailing position.
Var softmax0(Var x);
// w [M,K] * x [K] -> [M].
Var matvec(Var w, Var x);
// logsumexp(scores) - scores[label], scores rank-1.
Var cross_entropy(Var scores, std::size_t label);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace iaa
