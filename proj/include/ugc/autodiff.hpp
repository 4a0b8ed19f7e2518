// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ugc/graph_conv.hpp"
#include "ugc/random.hpp"
#include "ugc/tensor.hpp"

namespace ugc::ad {

/// Named learnable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  void zero_grad();
};

enum class OpKind {
  Leaf,
  Constant,
  Matmul,
  Contract,
  Reshape,
  Add,
  ElemwiseMul,
  ScalarScale,
  Sum,
  MeanOverAxes,
  LayerNorm,
  Affine,
  Relu,
  Softmax,
  GumbelSoftmaxST,
  WeightedSum,
  SliceRows,
  GraphConv,
  MseLoss,
  MpjpeLoss,
};

std::string_view op_name(OpKind kind) noexcept;
/// Throws UnsupportedOperation for names outside the registered set.
OpKind op_kind_from_name(std::string_view name);

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of executed operations. backward() walks it in strict reverse
/// order; gradients of values with several consumers add up.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient.
  Var constant(Tensor value);
  /// Differentiable input whose gradient is kept on the tape.
  Var leaf(Tensor value);
  /// Bound parameter: backward() adds the gradient into p.grad. Frozen
  /// parameters are recorded as constants.
  Var param(Parameter& p);

  /// Append an operation. `backward` is only kept when an input needs a gradient.
  Var push(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Seed d(loss)/d(loss) = 1 and propagate. Throws if loss is not a scalar.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of a node (empty tensor if nothing flowed into it).
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Add `g` into the gradient of node `id` (no-op when it needs none).
  void accumulate(std::size_t id, std::span<const double> g);
  /// Mutable gradient buffer of node `id`, zero-allocated on first use.
  std::span<double> grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var make(Node node);

  std::deque<Node> nodes_;  // stable references across push
};

// -- recorded operations ------------------------------------------------------

Var matmul(Var a, Var b);
Var contract(Var a, Var b, const AxisPairs& pairs);
Var reshape(Var x, Shape shape);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double s);
Var sum(Var x);
/// Mean over the listed axes; those axes are removed from the output.
Var mean_over_axes(Var x, std::vector<std::size_t> axes);
/// Normalizes each row of the rank-2 view (rows, cols) where cols is the last extent.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// y = x wᵀ + b for x of shape (rows, in), w (out, in), b (out).
Var affine(Var x, Var w, Var b);
Var relu(Var x);
/// Softmax over a rank-1 input.
Var softmax(Var logits);
/// soft = softmax((logits + noise) / tau). In hard mode the forward value is the
/// one-hot argmax of `soft` while the backward pass uses the soft Jacobian.
Var gumbel_softmax_st(Var logits, double tau, std::span<const double> noise, bool hard);
Var gumbel_softmax_st(Var logits, double tau, Rng& rng, bool hard);
/// Σ_i v[i] * ys[i].
Var weighted_sum(Var v, std::span<const Var> ys);
/// Rows [begin, begin + count) along axis 0.
Var slice_rows(Var x, std::size_t begin, std::size_t count);
/// Factored graph convolution; `blocks` has shape (block_count, g, g).
Var graph_conv(Var x, Var blocks, const GraphConvSpec& spec, const NodeLayout& layout);
Var mse_loss(Var pred, Var target);
/// Mean over all (frame, joint) of the Euclidean norm along the last axis.
Var mpjpe_loss(Var pred, Var target);

/// Attributes for the generic record() entry point.
struct OpAttrs {
  Shape shape;
  AxisPairs pairs;
  std::vector<std::size_t> axes;
  double scalar = 1.0;
  double eps = 1e-5;
  double tau = 1.0;
  bool hard = false;
  std::vector<double> noise;
  std::size_t begin = 0;
  std::size_t count = 0;
  const GraphConvSpec* spec = nullptr;
};

/// Dispatch by kind. WeightedSum takes v first, then the branch outputs.
Var record(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});

// -- optimization ---------------------------------------------------------------

/// Piecewise-constant rate: `start` before `drop_at`, `drop_to` from then on.
struct LrSchedule {
  double start = 6e-4;
  double drop_to = 5e-6;
  std::size_t drop_at = 75000;

  double rate(std::size_t iteration) const noexcept { return iteration < drop_at ? start : drop_to; }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global-norm clipping; 0 disables
};

class Adam {
 public:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  Adam() = default;
  Adam(AdamConfig cfg, LrSchedule schedule) : cfg_(cfg), schedule_(schedule) {}

  /// One update using the scheduled rate at `iteration`. Frozen parameters are skipped.
  void step(std::span<Parameter* const> params, std::size_t iteration);

  const AdamConfig& config() const noexcept { return cfg_; }
  const LrSchedule& schedule() const noexcept { return schedule_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  void set_steps_taken(std::size_t n) noexcept { steps_ = n; }
  std::map<std::string, Moments>& state() noexcept { return state_; }
  const std::map<std::string, Moments>& state() const noexcept { return state_; }

 private:
  AdamConfig cfg_;
  LrSchedule schedule_;
  std::size_t steps_ = 0;
  std::map<std::string, Moments> state_;
};

double global_grad_norm(std::span<Parameter* const> params);

/// Compares backward() against central differences of `build_loss` for every
/// entry of every listed parameter. Returns max |analytic - numeric| / max(1, |analytic|).
/// `build_loss` must be deterministic (stochastic nodes replay frozen noise).
double finite_diff_check(const std::function<Var(Tape&)>& build_loss, std::span<Parameter* const> params,
                         double h = 1e-6);

}  // namespace ugc::ad
