#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ebert {

namespace {
// Sigma floor, not an additive epsilon: normalized rows keep exactly unit
// variance instead of var/(var+eps).
constexpr double kLayerNormSigmaFloor = 1e-12;

double layer_norm_inv_sigma(const double* row, size_t cols, double& mean_out) {
  double mean = 0.0;
  for (size_t j = 0; j < cols; ++j) mean += row[j];
  mean /= double(cols);
  double var = 0.0;
  for (size_t j = 0; j < cols; ++j) {
    double d = row[j] - mean;
    var += d * d;
  }
  var /= double(cols);
  mean_out = mean;
  return 1.0 / std::max(std::sqrt(var), kLayerNormSigmaFloor);
}
}  // namespace

Tensor::Tensor(std::vector<size_t> shape) : shape_(std::move(shape)) {
  size_t n = 1;
  for (size_t d : shape_) n *= d;
  data_.assign(n, 0.0);
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  size_t n = 1;
  for (size_t d : shape_) n *= d;
  if (n != data_.size())
    throw_invalid("tensor: shape " + shape_str() + " implies " + std::to_string(n) + " elements, got " +
                  std::to_string(data_.size()));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw_invalid("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
}

size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw_invalid("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Multiply: return "multiply";
    case OpKind::Scale: return "scale";
    case OpKind::Softmax: return "softmax";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::EmbeddingLookup: return "embedding_lookup";
    case OpKind::Transpose: return "transpose";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SquaredEuclidean: return "squared_euclidean";
    case OpKind::CrossEntropyFromLogits: return "cross_entropy_from_logits";
    case OpKind::Hinge: return "hinge";
    case OpKind::Concat: return "concat";
  }
  return "?";
}

// ---- ParameterSet ----

void ParameterSet::add(const std::string& name, Tensor init) {
  if (entries_.count(name)) throw_invalid("parameter already registered: " + name);
  Entry e;
  e.grad = Tensor::zeros_like(init);
  e.m = Tensor::zeros_like(init);
  e.v = Tensor::zeros_like(init);
  e.value = std::move(init);
  entries_.emplace(name, std::move(e));
  order_.push_back(name);
}

bool ParameterSet::contains(const std::string& name) const { return entries_.count(name) != 0; }

ParameterSet::Entry& ParameterSet::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw_invalid("unknown parameter: " + name);
  return it->second;
}

const ParameterSet::Entry& ParameterSet::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw_invalid("unknown parameter: " + name);
  return it->second;
}

void ParameterSet::zero_grads() {
  for (auto& name : order_) entries_[name].grad.fill(0.0);
}

void ParameterSet::scale_grads(double factor) {
  for (auto& name : order_) {
    Tensor& g = entries_[name].grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] *= factor;
  }
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (auto& name : order_) {
    const Tensor& g = entries_.at(name).grad;
    for (size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  }
  return std::sqrt(sq);
}

// ---- ValueGraph forward ----

void ValueGraph::check_id(NodeId id) const {
  if (id < 0 || size_t(id) >= nodes_.size()) throw_invalid("invalid node id " + std::to_string(id));
}

NodeId ValueGraph::push(Node node) {
  if (!node.value.all_finite())
    throw_numeric(std::string(op_name(node.kind)) + ": non-finite value in output");
  nodes_.push_back(std::move(node));
  return NodeId(nodes_.size() - 1);
}

const Tensor& ValueGraph::value(NodeId id) const {
  check_id(id);
  return nodes_[size_t(id)].value;
}

NodeId ValueGraph::input(Tensor value) {
  Node n;
  n.kind = OpKind::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId ValueGraph::param(const std::string& name) {
  if (!params_) throw_invalid("graph has no parameter set; cannot reference " + name);
  Node n;
  n.kind = OpKind::Param;
  n.param_name = name;
  n.value = params_->entry(name).value;
  return push(std::move(n));
}

NodeId ValueGraph::matmul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Tensor& A = nodes_[size_t(a)].value;
  const Tensor& B = nodes_[size_t(b)].value;
  if (A.rank() != 2 || B.rank() != 2 || A.shape()[1] != B.shape()[0])
    throw_invalid("matmul: incompatible shapes " + A.shape_str() + " x " + B.shape_str());
  size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
  Tensor out({m, n});
  for (size_t i = 0; i < m; ++i) {
    const double* arow = A.data() + i * k;
    double* orow = out.data() + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      const double* brow = B.data() + kk * n;
      for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  Node node;
  node.kind = OpKind::MatMul;
  node.inputs = {a, b};
  node.value = std::move(out);
  return push(std::move(node));
}

namespace {

// Broadcast rule shared by add/multiply: same shape, or rank-1 b applied to
// every row of rank-2 a.
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1];
}

}  // namespace

NodeId ValueGraph::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Tensor& A = nodes_[size_t(a)].value;
  const Tensor& B = nodes_[size_t(b)].value;
  Tensor out;
  if (A.same_shape(B)) {
    out = A;
    for (size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  } else if (row_broadcast(A, B)) {
    out = A;
    size_t n = A.shape()[1];
    for (size_t r = 0; r < A.shape()[0]; ++r)
      for (size_t j = 0; j < n; ++j) out[r * n + j] += B[j];
  } else {
    throw_invalid("add: incompatible shapes " + A.shape_str() + " and " + B.shape_str());
  }
  Node node;
  node.kind = OpKind::Add;
  node.inputs = {a, b};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::multiply(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Tensor& A = nodes_[size_t(a)].value;
  const Tensor& B = nodes_[size_t(b)].value;
  Tensor out;
  if (A.same_shape(B)) {
    out = A;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  } else if (row_broadcast(A, B)) {
    out = A;
    size_t n = A.shape()[1];
    for (size_t r = 0; r < A.shape()[0]; ++r)
      for (size_t j = 0; j < n; ++j) out[r * n + j] *= B[j];
  } else {
    throw_invalid("multiply: incompatible shapes " + A.shape_str() + " and " + B.shape_str());
  }
  Node node;
  node.kind = OpKind::Multiply;
  node.inputs = {a, b};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::scale(NodeId a, double factor) {
  check_id(a);
  Tensor out = nodes_[size_t(a)].value;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  Node node;
  node.kind = OpKind::Scale;
  node.inputs = {a};
  node.factor = factor;
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::softmax(NodeId a) {
  check_id(a);
  const Tensor& A = nodes_[size_t(a)].value;
  if (A.rank() != 1 && A.rank() != 2)
    throw_invalid("softmax: expected rank 1 or 2, got " + A.shape_str());
  Tensor out = A;
  size_t rows = A.rows(), cols = A.cols();
  for (size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    double mx = row[0];
    for (size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      denom += row[j];
    }
    for (size_t j = 0; j < cols; ++j) row[j] /= denom;
  }
  Node node;
  node.kind = OpKind::Softmax;
  node.inputs = {a};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::layer_norm(NodeId a) {
  check_id(a);
  const Tensor& A = nodes_[size_t(a)].value;
  if (A.rank() != 1 && A.rank() != 2)
    throw_invalid("layer_norm: expected rank 1 or 2, got " + A.shape_str());
  Tensor out = A;
  size_t rows = A.rows(), cols = A.cols();
  for (size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    double mean = 0.0;
    double inv = layer_norm_inv_sigma(row, cols, mean);
    for (size_t j = 0; j < cols; ++j) row[j] = (row[j] - mean) * inv;
  }
  Node node;
  node.kind = OpKind::LayerNorm;
  node.inputs = {a};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::relu(NodeId a) {
  check_id(a);
  Tensor out = nodes_[size_t(a)].value;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  Node node;
  node.kind = OpKind::Relu;
  node.inputs = {a};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::tanh_(NodeId a) {
  check_id(a);
  Tensor out = nodes_[size_t(a)].value;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  Node node;
  node.kind = OpKind::Tanh;
  node.inputs = {a};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::embedding_lookup(NodeId table, std::vector<int64_t> indices) {
  check_id(table);
  const Tensor& T = nodes_[size_t(table)].value;
  if (T.rank() != 2) throw_invalid("embedding_lookup: table must be rank 2, got " + T.shape_str());
  size_t rows = T.shape()[0], d = T.shape()[1];
  Tensor out({indices.size(), d});
  for (size_t i = 0; i < indices.size(); ++i) {
    int64_t idx = indices[i];
    if (idx < 0 || size_t(idx) >= rows)
      throw_invalid("embedding_lookup: index " + std::to_string(idx) + " out of range for table " + T.shape_str());
    const double* src = T.data() + size_t(idx) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  Node node;
  node.kind = OpKind::EmbeddingLookup;
  node.inputs = {table};
  node.indices = std::move(indices);
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::transpose(NodeId a) {
  check_id(a);
  const Tensor& A = nodes_[size_t(a)].value;
  if (A.rank() != 2) throw_invalid("transpose: expected rank 2, got " + A.shape_str());
  size_t m = A.shape()[0], n = A.shape()[1];
  Tensor out({n, m});
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  Node node;
  node.kind = OpKind::Transpose;
  node.inputs = {a};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::sum(NodeId a) {
  check_id(a);
  const Tensor& A = nodes_[size_t(a)].value;
  double s = 0.0;
  for (size_t i = 0; i < A.size(); ++i) s += A[i];
  Node node;
  node.kind = OpKind::Sum;
  node.inputs = {a};
  node.value = Tensor::scalar(s);
  return push(std::move(node));
}

NodeId ValueGraph::mean(NodeId a) {
  check_id(a);
  const Tensor& A = nodes_[size_t(a)].value;
  if (A.size() == 0) throw_invalid("mean: empty tensor");
  double s = 0.0;
  for (size_t i = 0; i < A.size(); ++i) s += A[i];
  Node node;
  node.kind = OpKind::Mean;
  node.inputs = {a};
  node.value = Tensor::scalar(s / double(A.size()));
  return push(std::move(node));
}

NodeId ValueGraph::squared_euclidean(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Tensor& A = nodes_[size_t(a)].value;
  const Tensor& B = nodes_[size_t(b)].value;
  if (!A.same_shape(B))
    throw_invalid("squared_euclidean: shapes differ, " + A.shape_str() + " vs " + B.shape_str());
  double s = 0.0;
  for (size_t i = 0; i < A.size(); ++i) {
    double d = A[i] - B[i];
    s += d * d;
  }
  Node node;
  node.kind = OpKind::SquaredEuclidean;
  node.inputs = {a, b};
  node.value = Tensor::scalar(s);
  return push(std::move(node));
}

NodeId ValueGraph::cross_entropy_from_logits(NodeId logits, std::vector<int64_t> targets) {
  check_id(logits);
  const Tensor& Z = nodes_[size_t(logits)].value;
  if (Z.rank() != 2) throw_invalid("cross_entropy_from_logits: logits must be rank 2, got " + Z.shape_str());
  if (targets.size() != Z.shape()[0])
    throw_invalid("cross_entropy_from_logits: " + std::to_string(targets.size()) + " targets for " +
                  std::to_string(Z.shape()[0]) + " rows");
  size_t n = Z.shape()[0], v = Z.shape()[1];
  double total = 0.0;
  for (size_t r = 0; r < n; ++r) {
    int64_t t = targets[r];
    if (t < 0 || size_t(t) >= v)
      throw_invalid("cross_entropy_from_logits: target " + std::to_string(t) + " out of range for " +
                    std::to_string(v) + " classes");
    const double* row = Z.data() + r * v;
    double mx = row[0];
    for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (size_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
    total += std::log(denom) + mx - row[size_t(t)];
  }
  Node node;
  node.kind = OpKind::CrossEntropyFromLogits;
  node.inputs = {logits};
  node.indices = std::move(targets);
  node.value = Tensor::scalar(total / double(n));
  return push(std::move(node));
}

NodeId ValueGraph::hinge(NodeId a) {
  check_id(a);
  Tensor out = nodes_[size_t(a)].value;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  Node node;
  node.kind = OpKind::Hinge;
  node.inputs = {a};
  node.value = std::move(out);
  return push(std::move(node));
}

NodeId ValueGraph::concat(NodeId a, NodeId b, int axis) {
  check_id(a);
  check_id(b);
  const Tensor& A = nodes_[size_t(a)].value;
  const Tensor& B = nodes_[size_t(b)].value;
  Tensor out;
  if (A.rank() == 1 && B.rank() == 1 && axis == 0) {
    out = Tensor({A.size() + B.size()});
    std::copy(A.data(), A.data() + A.size(), out.data());
    std::copy(B.data(), B.data() + B.size(), out.data() + A.size());
  } else if (A.rank() == 2 && B.rank() == 2 && axis == 0 && A.shape()[1] == B.shape()[1]) {
    out = Tensor({A.shape()[0] + B.shape()[0], A.shape()[1]});
    std::copy(A.data(), A.data() + A.size(), out.data());
    std::copy(B.data(), B.data() + B.size(), out.data() + A.size());
  } else if (A.rank() == 2 && B.rank() == 2 && axis == 1 && A.shape()[0] == B.shape()[0]) {
    size_t m = A.shape()[0], na = A.shape()[1], nb = B.shape()[1];
    out = Tensor({m, na + nb});
    for (size_t r = 0; r < m; ++r) {
      std::copy(A.data() + r * na, A.data() + (r + 1) * na, out.data() + r * (na + nb));
      std::copy(B.data() + r * nb, B.data() + (r + 1) * nb, out.data() + r * (na + nb) + na);
    }
  } else {
    throw_invalid("concat: incompatible shapes " + A.shape_str() + " and " + B.shape_str() + " on axis " +
                  std::to_string(axis));
  }
  Node node;
  node.kind = OpKind::Concat;
  node.inputs = {a, b};
  node.axis = axis;
  node.value = std::move(out);
  return push(std::move(node));
}

// ---- backward ----

namespace {

Tensor& ensure_grad(std::vector<Tensor>& grads, size_t idx, const Tensor& like) {
  if (grads[idx].size() == 0) grads[idx] = Tensor::zeros_like(like);
  return grads[idx];
}

}  // namespace

void ValueGraph::backward_node(size_t idx, std::vector<Tensor>& grads) {
  Node& node = nodes_[idx];
  if (grads[idx].size() == 0) return;  // node did not contribute to the loss
  const Tensor& g = grads[idx];

  switch (node.kind) {
    case OpKind::Input:
      break;
    case OpKind::Param: {
      Tensor& acc = params_->entry(node.param_name).grad;
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
      break;
    }
    case OpKind::MatMul: {
      const Tensor& A = in(node, 0);
      const Tensor& B = in(node, 1);
      size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), A);
      Tensor& gb = ensure_grad(grads, size_t(node.inputs[1]), B);
      // dA = G * B^T
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
          double gv = g[i * n + j];
          if (gv == 0.0) continue;
          const double* brow = B.data() + 0;
          for (size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += gv * brow[kk * n + j];
        }
      // dB = A^T * G
      for (size_t kk = 0; kk < k; ++kk)
        for (size_t i = 0; i < m; ++i) {
          double av = A[i * k + kk];
          if (av == 0.0) continue;
          for (size_t j = 0; j < n; ++j) gb[kk * n + j] += av * g[i * n + j];
        }
      break;
    }
    case OpKind::Add: {
      const Tensor& A = in(node, 0);
      const Tensor& B = in(node, 1);
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), A);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      Tensor& gb = ensure_grad(grads, size_t(node.inputs[1]), B);
      if (A.same_shape(B)) {
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
      } else {
        size_t n = A.shape()[1];
        for (size_t r = 0; r < A.shape()[0]; ++r)
          for (size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
      }
      break;
    }
    case OpKind::Multiply: {
      const Tensor& A = in(node, 0);
      const Tensor& B = in(node, 1);
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), A);
      Tensor& gb = ensure_grad(grads, size_t(node.inputs[1]), B);
      if (A.same_shape(B)) {
        for (size_t i = 0; i < A.size(); ++i) {
          ga[i] += g[i] * B[i];
          gb[i] += g[i] * A[i];
        }
      } else {
        size_t n = A.shape()[1];
        for (size_t r = 0; r < A.shape()[0]; ++r)
          for (size_t j = 0; j < n; ++j) {
            ga[r * n + j] += g[r * n + j] * B[j];
            gb[j] += g[r * n + j] * A[r * n + j];
          }
      }
      break;
    }
    case OpKind::Scale: {
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), in(node, 0));
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * node.factor;
      break;
    }
    case OpKind::Softmax: {
      const Tensor& Y = node.value;
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), in(node, 0));
      size_t rows = Y.rows(), cols = Y.cols();
      for (size_t r = 0; r < rows; ++r) {
        const double* y = Y.data() + r * cols;
        const double* gr = g.data() + r * cols;
        double dot = 0.0;
        for (size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
        for (size_t j = 0; j < cols; ++j) ga[r * cols + j] += y[j] * (gr[j] - dot);
      }
      break;
    }
    case OpKind::LayerNorm: {
      const Tensor& X = in(node, 0);
      const Tensor& Y = node.value;  // normalized rows
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), X);
      size_t rows = X.rows(), cols = X.cols();
      for (size_t r = 0; r < rows; ++r) {
        const double* x = X.data() + r * cols;
        const double* y = Y.data() + r * cols;
        const double* gr = g.data() + r * cols;
        double mean = 0.0;
        double inv = layer_norm_inv_sigma(x, cols, mean);
        double g_mean = 0.0, gy_mean = 0.0;
        for (size_t j = 0; j < cols; ++j) {
          g_mean += gr[j];
          gy_mean += gr[j] * y[j];
        }
        g_mean /= double(cols);
        gy_mean /= double(cols);
        for (size_t j = 0; j < cols; ++j) ga[r * cols + j] += inv * (gr[j] - g_mean - y[j] * gy_mean);
      }
      break;
    }
    case OpKind::Relu:
    case OpKind::Hinge: {
      const Tensor& X = in(node, 0);
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), X);
      for (size_t i = 0; i < X.size(); ++i)
        if (X[i] > 0.0) ga[i] += g[i];
      break;
    }
    case OpKind::Tanh: {
      const Tensor& Y = node.value;
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), in(node, 0));
      for (size_t i = 0; i < Y.size(); ++i) ga[i] += g[i] * (1.0 - Y[i] * Y[i]);
      break;
    }
    case OpKind::EmbeddingLookup: {
      const Tensor& T = in(node, 0);
      Tensor& gt = ensure_grad(grads, size_t(node.inputs[0]), T);
      size_t d = T.shape()[1];
      for (size_t i = 0; i < node.indices.size(); ++i) {
        size_t row = size_t(node.indices[i]);
        for (size_t j = 0; j < d; ++j) gt[row * d + j] += g[i * d + j];
      }
      break;
    }
    case OpKind::Transpose: {
      const Tensor& A = in(node, 0);
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), A);
      size_t m = A.shape()[0], n = A.shape()[1];
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
      break;
    }
    case OpKind::Sum: {
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), in(node, 0));
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
      break;
    }
    case OpKind::Mean: {
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), in(node, 0));
      double f = g[0] / double(ga.size());
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += f;
      break;
    }
    case OpKind::SquaredEuclidean: {
      const Tensor& A = in(node, 0);
      const Tensor& B = in(node, 1);
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), A);
      Tensor& gb = ensure_grad(grads, size_t(node.inputs[1]), B);
      for (size_t i = 0; i < A.size(); ++i) {
        double d = 2.0 * (A[i] - B[i]) * g[0];
        ga[i] += d;
        gb[i] -= d;
      }
      break;
    }
    case OpKind::CrossEntropyFromLogits: {
      const Tensor& Z = in(node, 0);
      Tensor& gz = ensure_grad(grads, size_t(node.inputs[0]), Z);
      size_t n = Z.shape()[0], v = Z.shape()[1];
      double f = g[0] / double(n);
      for (size_t r = 0; r < n; ++r) {
        const double* row = Z.data() + r * v;
        double mx = row[0];
        for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (size_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
        for (size_t j = 0; j < v; ++j) {
          double p = std::exp(row[j] - mx) / denom;
          gz[r * v + j] += f * (p - (int64_t(j) == node.indices[r] ? 1.0 : 0.0));
        }
      }
      break;
    }
    case OpKind::Concat: {
      const Tensor& A = in(node, 0);
      const Tensor& B = in(node, 1);
      Tensor& ga = ensure_grad(grads, size_t(node.inputs[0]), A);
      Tensor& gb = ensure_grad(grads, size_t(node.inputs[1]), B);
      if (node.axis == 0 || A.rank() == 1) {
        for (size_t i = 0; i < A.size(); ++i) ga[i] += g[i];
        for (size_t i = 0; i < B.size(); ++i) gb[i] += g[A.size() + i];
      } else {
        size_t m = A.shape()[0], na = A.shape()[1], nb = B.shape()[1];
        for (size_t r = 0; r < m; ++r) {
          for (size_t j = 0; j < na; ++j) ga[r * na + j] += g[r * (na + nb) + j];
          for (size_t j = 0; j < nb; ++j) gb[r * nb + j] += g[r * (na + nb) + na + j];
        }
      }
      break;
    }
  }
}

double ValueGraph::min_kink_distance() const {
  double min_abs = std::numeric_limits<double>::infinity();
  for (const Node& node : nodes_) {
    if (node.kind != OpKind::Relu && node.kind != OpKind::Hinge) continue;
    const Tensor& x = nodes_[size_t(node.inputs[0])].value;
    for (size_t i = 0; i < x.size(); ++i) min_abs = std::min(min_abs, std::abs(x[i]));
  }
  return min_abs;
}

void ValueGraph::backward(NodeId loss) {
  check_id(loss);
  const Tensor& L = nodes_[size_t(loss)].value;
  if (L.size() != 1) throw_invalid("backward: loss must be scalar, got " + L.shape_str());

  std::vector<Tensor> grads(nodes_.size());
  grads[size_t(loss)] = Tensor::scalar(1.0);
  for (size_t i = nodes_.size(); i-- > 0;) backward_node(i, grads);
  // grads vector goes out of scope here; intermediates hold no gradient state
}

double grad_check(const std::function<NodeId(ValueGraph&)>& recipe, ParameterSet& params, double fd_step) {
  params.zero_grads();
  {
    ValueGraph g(&params);
    NodeId loss = recipe(g);
    if (g.value(loss).size() != 1) throw_invalid("grad_check: recipe must produce a scalar loss");
    g.backward(loss);
  }
  std::unordered_map<std::string, Tensor> analytic;
  for (const auto& name : params.names()) analytic.emplace(name, params.entry(name).grad);

  auto eval_loss = [&]() {
    ValueGraph g(&params);
    return g.value(recipe(g))[0];
  };

  double max_rel = 0.0;
  for (const auto& name : params.names()) {
    Tensor& value = params.entry(name).value;
    const Tensor& a = analytic.at(name);
    for (size_t i = 0; i < value.size(); ++i) {
      double orig = value[i];
      auto at = [&](double offset) {
        value[i] = orig + offset;
        return eval_loss();
      };
      // fourth-order central stencil, grouped as differences so coordinates
      // the loss does not depend on come out exactly zero
      double inner = at(fd_step) - at(-fd_step);
      double outer = at(2.0 * fd_step) - at(-2.0 * fd_step);
      double numeric = (8.0 * inner - outer) / (12.0 * fd_step);
      value[i] = orig;
      double rel = std::abs(a[i] - numeric) / std::max({std::abs(a[i]), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  params.zero_grads();
  return max_rel;
}

}  // namespace ebert
