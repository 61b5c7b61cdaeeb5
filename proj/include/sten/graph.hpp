#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sten/params.hpp"
#include "sten/tensor.hpp"

namespace sten {

/// Handle to a node on a Graph's tape.
using Var = std::int32_t;
constexpr Var kNoVar = -1;

enum class Pointwise { Sigmoid, LeakyRelu, ExpNeg };
enum class BnMode { Train, Infer };

/// What softmax_masked does with a row whose mask is entirely false.
enum class MaskedRows {
  Error,   ///< throw NumericError (the library-level contract)
  ZeroRow  ///< emit an all-zero row (the model-level convention)
};

/// Running statistics for one batch-norm layer. Owned outside the graph;
/// train-mode forward updates them, infer-mode forward reads them.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t width)
      : running_mean(Shape{width}), running_var(Tensor::full({width}, 1.0)) {}
};

/// Define-by-run reverse-mode tape over dense tensors.
///
/// Nodes are appended in execution order, which is therefore a valid
/// topological order; backward() walks the tape in reverse. Every operation
/// is sequential and deterministic: identical inputs give bitwise-identical
/// outputs and gradients.
class Graph {
 public:
  /// Constant leaf; no gradient is tracked.
  Var input(Tensor t);

  /// Differentiable leaf owned by the graph (used by tests and probes).
  Var leaf(Tensor t);

  /// Differentiable leaf bound to a Parameter. The node reads the parameter's
  /// current value; backward() accumulates into Parameter::gradient.
  Var param(Parameter& p);

  const Tensor& val(Var x) const { return value_of(x); }
  const Tensor& grad(Var x) const;
  bool wants_grad(Var x) const { return nodes_[static_cast<std::size_t>(x)].needs_grad; }

  // --- arithmetic ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale_const(Var x, double c);
  /// Per-sample scalar broadcast: x[N, ...] scaled by s[N] (or [N,1]).
  Var scale_rows(Var x, Var s);
  /// Trainable scalar broadcast: x scaled by s of shape [1].
  Var scale_scalar(Var x, Var s);

  // --- dense layers ---
  /// x[.., d_in] * w[d_in, d_out] + b[d_out].
  Var affine(Var x, Var w, Var b);
  /// Per-sample weights: x[N, L, d_in] * w[N, d_in, d_out] + b[N, d_out].
  Var batched_affine(Var x, Var w, Var b);

  // --- pointwise ---
  Var pointwise(Var x, Pointwise kind, double alpha = 0.01);
  Var sigmoid(Var x) { return pointwise(x, Pointwise::Sigmoid); }
  Var leaky_relu(Var x, double alpha = 0.01) { return pointwise(x, Pointwise::LeakyRelu, alpha); }
  Var exp_neg(Var x) { return pointwise(x, Pointwise::ExpNeg); }

  // --- normalization / reductions ---
  /// Row-wise softmax over the last axis restricted to mask==1 positions.
  /// Masked outputs are exactly zero; valid positions are exp-normalized
  /// after max subtraction.
  Var softmax_masked(Var logits, const Tensor& mask, MaskedRows policy = MaskedRows::Error);

  /// Batch normalization over axis 0 of x[N, d] with learnable gamma/beta.
  /// Train mode uses batch statistics (N >= 2) and folds them into `state`
  /// with `momentum`; infer mode reads `state`.
  Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, BnMode mode,
                 double eps = 1e-5, double momentum = 0.99);

  /// Mean of x[.., L, d] over valid positions of mask[.., L]; an all-masked
  /// row pools to the zero vector.
  Var masked_mean_pool(Var x, const Tensor& mask);

  /// sum_l w[N, L] * x[N, L, d] -> [N, d].
  Var weighted_pool(Var x, Var w);

  /// Row-wise dot products k[N, L, d] . q[N, d] -> [N, L].
  Var rowdot(Var k, Var q);

  /// Per-row dot product a[N, d] . b[N, d] -> [N].
  Var dot_rows(Var a, Var b);

  // --- structure ---
  Var concat_last(std::span<const Var> parts);
  Var concat_last(std::initializer_list<Var> parts);
  Var slice_last(Var x, std::size_t begin, std::size_t len);
  Var reshape(Var x, Shape shape);

  /// Gather rows of table[V, E] at `ids`; output shape is leading + [E].
  /// Backward scatter-adds into the table rows.
  Var embedding(Var table, const std::vector<std::int64_t>& ids, Shape leading);

  // --- losses / reductions to scalar ---
  /// Mean binary cross-entropy computed from logits (numerically stable).
  Var bce_with_logits(Var logits, const Tensor& labels);
  Var sum(Var x);

  /// Reverse sweep from scalar `root`; accumulates bound parameter gradients.
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor store;               // value storage unless bound
    Parameter* bound = nullptr; // value/gradient live on the parameter store
    Tensor grad;                // allocated lazily by backward()
    bool needs_grad = false;
    std::function<void(Graph&)> back;
  };

  const Tensor& value_of(Var x) const {
    const Node& n = nodes_[static_cast<std::size_t>(x)];
    return n.bound ? n.bound->value : n.store;
  }
  Tensor& grad_of(Var x) { return nodes_[static_cast<std::size_t>(x)].grad; }

  Var push(Tensor value, bool needs_grad, std::function<void(Graph&)> back);
  void add_grad_range(Var x, const double* src, std::size_t offset, std::size_t n);

  std::vector<Node> nodes_;

  friend struct GraphTestAccess;
};

}  // namespace sten
