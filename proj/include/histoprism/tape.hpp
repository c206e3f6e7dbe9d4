#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "histoprism/matrix.hpp"

namespace histoprism {

/// Handle to a node on a Tape. Valid only for the tape that produced it.
struct NodeId {
  std::int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Reverse-mode automatic differentiation over a closed set of matrix
/// primitives: matmul, add (incl. row broadcast), scale, softmax_rows,
/// layer_norm, gelu, transpose, slice, mean, square. Nodes are appended in
/// forward order, which is a topological order by construction; backward()
/// walks them strictly in reverse, accumulating adjoints additively, so a
/// replay over the same tape is bit-identical.
class Tape {
 public:
  /// Differentiable input (parameter). Gradient is available after backward().
  NodeId leaf(Matrix v);
  /// Non-differentiable input (data, targets, positional tables).
  NodeId constant(Matrix v);

  NodeId matmul(NodeId a, NodeId b);
  /// Elementwise sum; also accepts b of shape 1 x cols(a), broadcast over rows.
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  /// Row-wise softmax with max subtraction; rows sum to 1 within 1e-12.
  NodeId softmax_rows(NodeId a);
  /// Row-wise normalization with learnable gain/bias (each 1 x cols).
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps);
  /// tanh-form GELU: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
  /// This exact form is pinned so runs replay bit-for-bit.
  NodeId gelu(NodeId a);
  NodeId transpose(NodeId a);
  /// Sub-block [r0,r1) x [c0,c1).
  NodeId slice(NodeId a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);
  /// Mean over all entries -> 1x1.
  NodeId mean_all(NodeId a);
  NodeId square(NodeId a);

  /// Accumulate adjoints of every node w.r.t. the given scalar (1x1) root.
  /// Clears previous adjoints first, so repeated calls replay identically.
  void backward(NodeId root);

  const Matrix& value(NodeId id) const { return nodes_[id.idx].value; }
  const Matrix& grad(NodeId id) const { return nodes_[id.idx].grad; }

  std::size_t node_count() const { return nodes_.size(); }
  /// Multiply-accumulate operations performed by matmul nodes so far.
  std::uint64_t mac_count() const { return macs_; }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Constant,
    MatMul,
    Add,
    AddRowBroadcast,
    Scale,
    SoftmaxRows,
    LayerNorm,
    Gelu,
    Transpose,
    Slice,
    Mean,
    Square,
  };

  struct Node {
    Op op;
    std::int32_t a = -1, b = -1, c = -1;
    double scalar = 0.0;  // Scale factor or LayerNorm eps
    std::size_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;
    Matrix value;
    Matrix grad;
  };

  NodeId push(Node n);
  const Matrix& val(std::int32_t i) const { return nodes_[i].value; }

  // deque: appending never invalidates references handed out by value()/grad()
  std::deque<Node> nodes_;
  std::uint64_t macs_ = 0;
};

}  // namespace histoprism
