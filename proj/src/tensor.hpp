#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "util.hpp"

namespace ebert {

/// Dense row-major tensor of 64-bit floats. Rank 0 (scalar stored as one
/// element), 1 and 2 are the shapes the model needs; nothing fancier.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape);
  Tensor(std::vector<size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  size_t rows() const;
  size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }
  double& at(size_t r, size_t c) { return data_[r * cols() + c]; }
  double at(size_t r, size_t c) const { return data_[r * cols() + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;
  bool all_finite() const;
  void fill(double v);

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

enum class OpKind {
  Input,
  Param,
  MatMul,
  Add,
  Multiply,
  Scale,
  Softmax,
  LayerNorm,
  Relu,
  Tanh,
  EmbeddingLookup,
  Transpose,
  Sum,
  Mean,
  SquaredEuclidean,
  CrossEntropyFromLogits,
  Hinge,
  Concat,
};

const char* op_name(OpKind kind);

using NodeId = int;

/// Named model parameters with their gradient accumulators and Adam moments.
/// Gradients accumulate across backward passes until zero_grads(); the word
/// and phrase losses (and AHM + NPR in the joint phase) share parameters, so
/// the trainer relies on that.
class ParameterSet {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  /// Registers a parameter. Duplicate names are an error.
  void add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const;
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }

  void zero_grads();
  void scale_grads(double factor);
  /// Global L2 norm over all gradient accumulators.
  double grad_norm() const;

 private:
  std::unordered_map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

/// Eagerly evaluated computation tape. Recording an op computes its output
/// immediately and appends a node; backward() walks nodes in exact reverse
/// insertion order and accumulates parameter gradients into the ParameterSet.
/// A graph is confined to a single thread between record and backward.
class ValueGraph {
 public:
  explicit ValueGraph(ParameterSet* params = nullptr) : params_(params) {}

  NodeId input(Tensor value);
  NodeId param(const std::string& name);

  NodeId matmul(NodeId a, NodeId b);
  /// Elementwise add; also accepts a rank-1 right operand matching the left
  /// operand's column count (row broadcast, used for biases).
  NodeId add(NodeId a, NodeId b);
  /// Elementwise product with the same broadcast rule as add.
  NodeId multiply(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  /// Row-wise softmax (max-subtracted). Rank-1 input is one row.
  NodeId softmax(NodeId a);
  /// Row-wise normalization to zero mean / unit variance. No affine part;
  /// compose with multiply/add for learned gain and bias.
  NodeId layer_norm(NodeId a);
  NodeId relu(NodeId a);
  NodeId tanh_(NodeId a);
  /// Gathers rows of a rank-2 table. Also serves as the row-gather for
  /// masked positions and content tokens.
  NodeId embedding_lookup(NodeId table, std::vector<int64_t> indices);
  NodeId transpose(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  /// sum((a-b)^2) over all elements; scalar output.
  NodeId squared_euclidean(NodeId a, NodeId b);
  /// Mean over rows of -log softmax(row)[target]. One target per row.
  NodeId cross_entropy_from_logits(NodeId logits, std::vector<int64_t> targets);
  /// Elementwise max(0, x).
  NodeId hinge(NodeId a);
  /// axis 0 stacks rows, axis 1 joins columns.
  NodeId concat(NodeId a, NodeId b, int axis);

  /// Stable for the lifetime of the graph (node storage never reallocates).
  const Tensor& value(NodeId id) const;
  size_t node_count() const { return nodes_.size(); }

  /// Smallest |x| fed into any relu/hinge node; +inf when none recorded.
  /// Finite-difference checks are only valid when this clears the step size.
  double min_kink_distance() const;

  /// Reverse-mode pass from a scalar loss. Parameter gradients are added to
  /// the ParameterSet accumulators; intermediate gradients are released.
  void backward(NodeId loss);

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    double factor = 0.0;                // Scale
    int axis = 0;                       // Concat
    std::vector<int64_t> indices;       // EmbeddingLookup / CrossEntropy targets
    std::string param_name;             // Param
  };

  NodeId push(Node node);
  const Tensor& in(const Node& node, size_t i) const { return nodes_[size_t(node.inputs[i])].value; }
  void check_id(NodeId id) const;
  void backward_node(size_t idx, std::vector<Tensor>& grads);

  std::deque<Node> nodes_;
  ParameterSet* params_;
};

/// Builds the recipe's scalar loss, backpropagates, and compares every
/// parameter gradient against central finite differences. Returns the max
/// relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<NodeId(ValueGraph&)>& recipe, ParameterSet& params, double fd_step = 1e-5);

}  // namespace ebert
