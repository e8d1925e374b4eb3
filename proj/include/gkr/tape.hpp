#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "gkr/matrix.hpp"

namespace gkr {

enum class PoolMode { Max, Mean };

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t index = 0;
  std::uint32_t tape_id = 0;
};

/// Reverse-mode recorder over small dense blocks.
///
/// Every value is a Matrix; a row vector is 1×n. Row-batched ops treat each
/// row as an independent sample of the same transform, which is how the D
/// peripheral nodes of a graph are pushed through one layer at once.
///
/// Trainable matrices are identified by address. The first op that touches a
/// parameter registers it; backward() fills one gradient accumulator per
/// registered parameter. Parameters are read, never written, so several tapes
/// on different threads may share one frozen parameter set.
class Tape {
 public:
  Tape();

  // Leaves.
  Var constant(Matrix value);
  Var constant_row(std::span<const double> values);
  /// Trainable leaf whose value is a copy of `p`; gradients flow back to `p`.
  Var param(const Matrix& p);

  /// Row-wise Wᵀx: x is n×p, W is p×q, result n×q.
  Var linear(const Matrix& W, Var x);
  /// x + b with b (1×q) broadcast over the rows of x.
  Var add_bias(Var x, const Matrix& b);
  Var relu(Var x);
  /// Column concatenation. `b` must have the rows of `a`, or exactly one row
  /// (broadcast to every row of `a`).
  Var concat(Var a, Var b);
  /// Joins row vectors end to end.
  Var concat(std::span<const Var> parts);
  /// n×c to 1×(n·c), row-major.
  Var flatten(Var x);
  /// Elementwise pooling over equally shaped values. Max routes each
  /// coordinate's gradient to the lowest-index input attaining the maximum.
  Var pool(std::span<const Var> xs, PoolMode mode);
  /// Pools the rows of an n×c value into 1×c.
  Var pool_rows(Var x, PoolMode mode);
  /// Two 1×D rows to a D×2 block with row d = (a[d], b[d]).
  Var interleave(Var a, Var b);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var x, double s);
  Var sum(Var x);
  Var sqrt(Var x);
  Var exp(Var x);
  /// Numerically stable binary cross-entropy of a 1×1 logit against a {0,1} label.
  Var bce_with_logit(Var logit, int label);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;

  /// Reverse sweep from a 1×1 loss. Gradient accumulators are zeroed first.
  void backward(Var loss);
  /// Gradient of the last backward() w.r.t. `p`; zeros if `p` never reached the tape.
  Matrix grad(const Matrix& p) const;
  bool has_param(const Matrix& p) const;
  std::span<const Matrix* const> params() const noexcept { return params_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  /// Which side of every ReLU each input fell on, followed by every max-pool
  /// winner. Two evaluations with equal patterns lie on the same smooth piece.
  std::vector<std::uint32_t> activation_pattern() const;

 private:
  enum class Op : std::uint8_t {
    Constant, Param, Linear, AddBias, Relu, Concat, ConcatList, Flatten, Pool, PoolRows,
    Interleave, Add, Sub, Mul, Div, Scale, Sum, Sqrt, Exp, Bce,
  };

  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct Node {
    Op op;
    std::uint32_t a = kNone;
    std::uint32_t b = kNone;
    std::int32_t param = -1;
    bool broadcast = false;
    PoolMode pool = PoolMode::Mean;
    double aux = 0.0;
    std::vector<std::uint32_t> inputs;
    std::vector<std::uint32_t> winners;
    Matrix value;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  std::int32_t register_param(const Matrix& p);
  void backprop(std::size_t i, std::vector<Matrix>& adj);

  std::uint32_t id_;
  std::vector<Node> nodes_;
  std::vector<const Matrix*> params_;
  std::unordered_map<const Matrix*, std::int32_t> param_index_;
  std::vector<Matrix> grads_;
};

/// Stable -[y·log σ(z) + (1-y)·log(1-σ(z))].
double bce_with_logit(double logit, int label);
double sigmoid(double z);

}  // namespace gkr
