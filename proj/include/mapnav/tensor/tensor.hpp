#pragma once

// Row-major fp64 matrices and a tape-based reverse-mode autodiff graph.
// Every value in the transformer is two-dimensional (activations are
// [tokens x features], weights [in x out], biases [1 x out]), so the engine
// only knows matrices; scalars are 1x1.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mapnav::tensor {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  std::size_t size() const { return data.size(); }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
  /// Value of a 1x1 node.
  double item() const;
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  /// Called with the graph and the id of the node being differentiated.
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var scalar(double v);
  /// Leaf bound to a parameter. Gradients flow straight into `p.grad`.
  /// Binding the same parameter twice returns the same node.
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. Parameter
  /// gradients accumulate (they are not zeroed). A graph can be
  /// differentiated once; a second call throws GraphConsumed.
  void backward(Var loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var make(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var make(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Gradient buffer of node `id`, zero-initialised on first touch.
  Matrix& grad(int id);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    bool requires_grad = false;
    bool grad_live = false;
    BackwardFn backward;
  };

  Graph* check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x[m x n] + bias[1 x n] broadcast over rows.
Var add_row(Var x, Var bias);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var exp(Var a);
/// Elementwise clamp; the gradient passes where lo <= x <= hi.
Var clamp(Var a, double lo, double hi);
/// Elementwise min; ties route the gradient to `a`.
Var minimum(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
/// Sum of equally shaped nodes.
Var add_n(std::span<const Var> xs);
/// Stacks 1x1 nodes into a column.
Var stack_scalars(std::span<const Var> xs);

Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// tanh-approximated GELU.
Var gelu(Var x);
/// Rows of `table` selected by `ids`.
Var embedding(Var table, std::span<const int> ids);
Var gather_rows(Var x, std::span<const int> rows);
/// Causal multi-head self-attention over a fused [T x 3d] (q | k | v) input.
Var causal_attention(Var qkv, int n_heads);
/// For each row r, log softmax(logits[r, lo:hi])[targets[r] - lo]; the
/// result is [rows x 1]. Columns outside [lo, hi) are masked out.
Var log_softmax_pick(Var logits, std::span<const int> targets, int lo, int hi);

// Plain (non-graph) helpers shared with the inference path.
void layer_norm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                     Matrix& out);
double gelu_scalar(double x);

}  // namespace mapnav::tensor
