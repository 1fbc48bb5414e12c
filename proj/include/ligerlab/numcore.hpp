#ifndef LIGERLAB_NUMCORE_HPP
#define LIGERLAB_NUMCORE_HPP

// Dense float64 tensors, a tape-based reverse-mode autodiff graph, Adam,
// global-norm clipping and a flat binary checkpoint format.
//
// Every tensor in the graph is treated as a row-major matrix: shape {n} is a
// 1 x n row, shape {} a 1 x 1 scalar.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "ligerlab/util.hpp"

namespace ligerlab::num {

/// Buffers aligned to Eigen's widest packet so vectorized kernels take the
/// same code path, and produce the same bits, on every run.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor {
  std::vector<std::size_t> shape;
  Storage data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shp, double fill = 0.0)
      : shape(std::move(shp)), data(element_count(shape), fill) {}
  Tensor(std::vector<std::size_t> shp, const std::vector<double>& values)
      : shape(std::move(shp)), data(values.begin(), values.end()) {
    if (data.size() != element_count(shape)) throw Error("tensor data does not match shape");
  }
  static Tensor matrix(std::size_t r, std::size_t c, double fill = 0.0) { return Tensor({r, c}, fill); }
  static Tensor row(const std::vector<double>& values) { return Tensor({1, values.size()}, values); }
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  std::size_t cols() const {
    if (shape.empty()) return 1;
    if (shape.size() == 1) return shape[0];
    return data.size() / shape[0];
  }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  std::vector<double> values() const { return {data.begin(), data.end()}; }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

inline MatMap as_matrix(Tensor& t) {
  return MatMap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

/// Named parameter tensors in registration order.
class ParameterStore {
 public:
  std::size_t add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) throw Error("duplicate parameter '" + name + "'");
    index_[name] = values_.size();
    names_.push_back(name);
    values_.emplace_back(std::move(shape));
    return values_.size() - 1;
  }
  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  /// Zero-filled tensors matching every parameter's shape.
  std::vector<Tensor> zeros_like() const {
    std::vector<Tensor> out;
    out.reserve(values_.size());
    for (const auto& v : values_) out.emplace_back(v.shape);
    return out;
  }

  void init_uniform(double limit, std::uint64_t seed) {
    Rng rng = make_rng(seed, "init");
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : values_)
      for (auto& x : v.data) x = dist(rng);
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Gradients = std::vector<Tensor>;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph {
 public:
  explicit Graph(const ParameterStore* params = nullptr) : params_(params) {}

  // Leaves ------------------------------------------------------------------

  Var param(std::size_t index) {
    if (!params_) throw Error("graph has no parameter store");
    auto it = param_nodes_.find(index);
    if (it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.external = &params_->value(index);
    n.param = static_cast<int>(index);
    n.needs_grad = true;
    Var v = push(std::move(n));
    param_nodes_[index] = v.id;
    return v;
  }
  Var param(const std::string& name) { return param(params_->index(name)); }

  Var constant(Tensor t) {
    Node n;
    n.value = std::move(t);
    return push(std::move(n));
  }

  /// Leaf whose gradient is kept on the graph (used by gradient checks).
  Var variable(Tensor t) {
    Node n;
    n.value = std::move(t);
    n.needs_grad = true;
    return push(std::move(n));
  }

  const Tensor& value(Var v) const { return node(v).val(); }
  const Tensor& grad(Var v) const { return node(v).grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Ops ---------------------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.cols() != B.rows()) throw shape_error("matmul", A, B);
    Tensor out = Tensor::matrix(A.rows(), B.cols());
    as_matrix(out).noalias() = as_matrix(A) * as_matrix(B);
    return push_op(std::move(out), {a, b}, [](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      if (g.wants(in[0]))
        as_matrix(g.grad_of(in[0])).noalias() += as_matrix(G) * as_matrix(g.val_of(in[1])).transpose();
      if (g.wants(in[1]))
        as_matrix(g.grad_of(in[1])).noalias() += as_matrix(g.val_of(in[0])).transpose() * as_matrix(G);
    });
  }

  /// a * b^T
  Var matmul_t(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.cols() != B.cols()) throw shape_error("matmul_t", A, B);
    Tensor out = Tensor::matrix(A.rows(), B.rows());
    as_matrix(out).noalias() = as_matrix(A) * as_matrix(B).transpose();
    return push_op(std::move(out), {a, b}, [](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      if (g.wants(in[0]))
        as_matrix(g.grad_of(in[0])).noalias() += as_matrix(G) * as_matrix(g.val_of(in[1]));
      if (g.wants(in[1]))
        as_matrix(g.grad_of(in[1])).noalias() += as_matrix(G).transpose() * as_matrix(g.val_of(in[0]));
    });
  }

  Var add(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (!A.same_shape(B)) throw shape_error("add", A, B);
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
    return push_op(std::move(out), {a, b}, [](Graph& g, int self, const std::vector<int>& in) {
      for (int k : in)
        if (g.wants(k)) accumulate(g.grad_of(k), g.nodes_[self].grad);
    });
  }

  /// Adds row vector `b` (1 x n) to every row of `a` (m x n).
  Var add_row(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (B.rows() != 1 || B.cols() != A.cols()) throw shape_error("add_row", A, B);
    Tensor out = A;
    as_matrix(out).rowwise() += as_matrix(B).row(0);
    return push_op(std::move(out), {a, b}, [](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      if (g.wants(in[0])) accumulate(g.grad_of(in[0]), G);
      if (g.wants(in[1])) as_matrix(g.grad_of(in[1])).row(0) += as_matrix(G).colwise().sum();
    });
  }

  Var mul(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (!A.same_shape(B)) throw shape_error("mul", A, B);
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
    return push_op(std::move(out), {a, b}, [](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      for (int k = 0; k < 2; ++k) {
        if (!g.wants(in[k])) continue;
        const Tensor& other = g.val_of(in[1 - k]);
        Tensor& dst = g.grad_of(in[k]);
        for (std::size_t i = 0; i < G.size(); ++i) dst.data[i] += G.data[i] * other.data[i];
      }
    });
  }

  Var scale(Var a, double s) {
    Tensor out = value(a);
    for (auto& x : out.data) x *= s;
    return push_op(std::move(out), {a}, [s](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      const Tensor& G = g.nodes_[self].grad;
      Tensor& dst = g.grad_of(in[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dst.data[i] += s * G.data[i];
    });
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (auto& x : out.data) x = std::tanh(x);
    return push_op(std::move(out), {a}, [](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      const Tensor& G = g.nodes_[self].grad;
      const Tensor& Y = g.nodes_[self].value;
      Tensor& dst = g.grad_of(in[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dst.data[i] += G.data[i] * (1.0 - Y.data[i] * Y.data[i]);
    });
  }

  Var sigmoid(Var a) {
    Tensor out = value(a);
    for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
    return push_op(std::move(out), {a}, [](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      const Tensor& G = g.nodes_[self].grad;
      const Tensor& Y = g.nodes_[self].value;
      Tensor& dst = g.grad_of(in[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dst.data[i] += G.data[i] * Y.data[i] * (1.0 - Y.data[i]);
    });
  }

  /// Row-wise softmax.
  Var softmax(Var a) {
    Tensor out = value(a);
    softmax_rows_in_place(out);
    return push_op(std::move(out), {a}, [](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      const Tensor& G = g.nodes_[self].grad;
      const Tensor& Y = g.nodes_[self].value;
      Tensor& dst = g.grad_of(in[0]);
      std::size_t c = Y.cols();
      for (std::size_t r = 0; r < Y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += G.data[r * c + j] * Y.data[r * c + j];
        for (std::size_t j = 0; j < c; ++j)
          dst.data[r * c + j] += Y.data[r * c + j] * (G.data[r * c + j] - dot);
      }
    });
  }

  Var concat_cols(Var a, Var b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.rows() != B.rows()) throw shape_error("concat_cols", A, B);
    std::size_t ca = A.cols(), cb = B.cols();
    Tensor out = Tensor::matrix(A.rows(), ca + cb);
    for (std::size_t r = 0; r < A.rows(); ++r) {
      std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(r * ca), ca,
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * (ca + cb)));
      std::copy_n(B.data.begin() + static_cast<std::ptrdiff_t>(r * cb), cb,
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * (ca + cb) + ca));
    }
    return push_op(std::move(out), {a, b}, [ca, cb](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      std::size_t rows = G.rows();
      if (g.wants(in[0])) {
        Tensor& d = g.grad_of(in[0]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < ca; ++j) d.data[r * ca + j] += G.data[r * (ca + cb) + j];
      }
      if (g.wants(in[1])) {
        Tensor& d = g.grad_of(in[1]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cb; ++j) d.data[r * cb + j] += G.data[r * (ca + cb) + ca + j];
      }
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("concat_rows: no inputs");
    std::size_t c = value(parts[0]).cols(), rows = 0;
    for (auto p : parts) {
      if (value(p).cols() != c) throw shape_error("concat_rows", value(parts[0]), value(p));
      rows += value(p).rows();
    }
    Tensor out = Tensor::matrix(rows, c);
    std::size_t off = 0;
    std::vector<int> ids;
    for (auto p : parts) {
      const Tensor& P = value(p);
      std::copy(P.data.begin(), P.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
      off += P.size();
      ids.push_back(p.id);
    }
    return push_op_ids(std::move(out), std::move(ids), [](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      std::size_t off = 0;
      for (int k : in) {
        std::size_t n = g.val_of(k).size();
        if (g.wants(k)) {
          Tensor& d = g.grad_of(k);
          for (std::size_t i = 0; i < n; ++i) d.data[i] += G.data[off + i];
        }
        off += n;
      }
    });
  }

  Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Tensor& A = value(a);
    if (begin > end || end > A.rows()) throw Error("slice_rows: range out of bounds");
    std::size_t c = A.cols();
    Tensor out = Tensor::matrix(end - begin, c);
    std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(begin * c), (end - begin) * c, out.data.begin());
    return push_op(std::move(out), {a}, [begin, c](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      const Tensor& G = g.nodes_[self].grad;
      Tensor& d = g.grad_of(in[0]);
      for (std::size_t i = 0; i < G.size(); ++i) d.data[begin * c + i] += G.data[i];
    });
  }

  /// Rows of `a` selected by `idx` (repeats allowed); backward scatter-adds.
  Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const Tensor& A = value(a);
    std::size_t c = A.cols();
    Tensor out = Tensor::matrix(idx.size(), c);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= A.rows()) throw Error("gather_rows: index out of range");
      std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(idx[r] * c), c,
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * c));
    }
    return push_op(std::move(out), {a}, [idx = std::move(idx), c](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      const Tensor& G = g.nodes_[self].grad;
      Tensor& d = g.grad_of(in[0]);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < c; ++j) d.data[idx[r] * c + j] += G.data[r * c + j];
    });
  }

  /// Element-wise maximum over same-shape inputs. Gradient flows to the
  /// first input attaining the maximum.
  Var max_elementwise(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("max_elementwise: no inputs");
    const Tensor& first = value(parts[0]);
    Tensor out = first;
    std::vector<std::uint32_t> arg(first.size(), 0);
    std::vector<int> ids{parts[0].id};
    for (std::size_t k = 1; k < parts.size(); ++k) {
      const Tensor& P = value(parts[k]);
      if (!P.same_shape(first)) throw shape_error("max_elementwise", first, P);
      for (std::size_t i = 0; i < P.size(); ++i)
        if (P.data[i] > out.data[i]) {
          out.data[i] = P.data[i];
          arg[i] = static_cast<std::uint32_t>(k);
        }
      ids.push_back(parts[k].id);
    }
    return push_op_ids(std::move(out), std::move(ids), [arg = std::move(arg)](Graph& g, int self, const std::vector<int>& in) {
      const Tensor& G = g.nodes_[self].grad;
      for (std::size_t i = 0; i < G.size(); ++i) {
        int k = in[arg[i]];
        if (g.wants(k)) g.grad_of(k).data[i] += G.data[i];
      }
    });
  }

  Var sum(Var a) {
    double s = 0.0;
    for (double x : value(a).data) s += x;
    return push_op(Tensor::scalar(s), {a}, [](Graph& g, int self, const std::vector<int>& in) {
      if (!g.wants(in[0])) return;
      double G = g.nodes_[self].grad.data[0];
      for (auto& x : g.grad_of(in[0]).data) x += G;
    });
  }

  /// Mean over rows of -log softmax(logits)[label]; returns a scalar.
  Var cross_entropy(Var logits, std::vector<std::size_t> labels) {
    const Tensor& L = value(logits);
    if (labels.size() != L.rows()) throw Error("cross_entropy: one label per row required");
    Tensor probs = L;
    softmax_rows_in_place(probs);
    std::size_t c = L.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] >= c) throw Error("cross_entropy: label out of range");
      // log-sum-exp form for stability
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, L.data[r * c + j]);
      double se = 0.0;
      for (std::size_t j = 0; j < c; ++j) se += std::exp(L.data[r * c + j] - mx);
      loss += (mx + std::log(se)) - L.data[r * c + labels[r]];
    }
    double inv = 1.0 / static_cast<double>(labels.size());
    return push_op(Tensor::scalar(loss * inv), {logits},
                   [probs = std::move(probs), labels = std::move(labels), inv, c](Graph& g, int self, const std::vector<int>& in) {
                     if (!g.wants(in[0])) return;
                     double G = g.nodes_[self].grad.data[0] * inv;
                     Tensor& d = g.grad_of(in[0]);
                     for (std::size_t r = 0; r < labels.size(); ++r)
                       for (std::size_t j = 0; j < c; ++j)
                         d.data[r * c + j] += G * (probs.data[r * c + j] - (j == labels[r] ? 1.0 : 0.0));
                   });
  }

  // Backward ----------------------------------------------------------------

  /// Back-propagates from scalar `loss`; parameter gradients are added into
  /// `param_grads` (indexed like the store). Repeated calls accumulate.
  void backward(Var loss, Gradients* param_grads = nullptr) {
    const Tensor& L = value(loss);
    if (L.size() != 1) throw Error("backward: loss must be a scalar");
    for (auto& n : nodes_) n.grad = Tensor();
    grad_of(loss.id).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.data.empty() || !n.needs_grad) continue;
      if (n.backward) n.backward(*this, i, n.inputs);
      if (n.param >= 0 && param_grads) {
        Tensor& dst = (*param_grads)[static_cast<std::size_t>(n.param)];
        accumulate(dst, n.grad);
      }
    }
  }

 private:
  using BackwardFn = std::function<void(Graph&, int, const std::vector<int>&)>;

  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    int param = -1;
    bool needs_grad = false;
    const Tensor& val() const { return external ? *external : value; }
  };

  const Node& node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw Error("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Tensor& val_of(int id) const { return nodes_[static_cast<std::size_t>(id)].val(); }
  bool wants(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  Tensor& grad_of(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) {
      const Tensor& v = n.val();
      n.grad = Tensor::matrix(v.rows(), v.cols());
    }
    return n.grad;
  }

  static void accumulate(Tensor& dst, const Tensor& src) {
    if (dst.size() != src.size()) throw Error("gradient shape mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) dst.data[i] += src.data[i];
  }

  static void softmax_rows_in_place(Tensor& t) {
    std::size_t c = t.cols();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double* row = t.data.data() + r * c;
      double mx = *std::max_element(row, row + c);
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += (row[j] = std::exp(row[j] - mx));
      for (std::size_t j = 0; j < c; ++j) row[j] /= s;
    }
  }

  static Error shape_error(const char* op, const Tensor& a, const Tensor& b) {
    return Error(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                 std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                 std::to_string(b.cols()) + ")");
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  Var push_op(Tensor out, std::initializer_list<Var> in, BackwardFn fn) {
    std::vector<int> ids;
    for (auto v : in) ids.push_back(v.id);
    return push_op_ids(std::move(out), std::move(ids), std::move(fn));
  }

  Var push_op_ids(Tensor out, std::vector<int> ids, BackwardFn fn) {
    Node n;
    n.value = std::move(out);
    for (int id : ids) n.needs_grad = n.needs_grad || wants(id);
    n.inputs = std::move(ids);
    if (n.needs_grad) n.backward = std::move(fn);
    return push(std::move(n));
  }

  const ParameterStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, int> param_nodes_;
};

// ---------------------------------------------------------------------------
// Optimization

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> m, v;
  std::int64_t t = 0;
};

inline void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state) {
  if (grads.size() != params.size()) throw Error("adam_step: gradient count mismatch");
  if (state.m.empty()) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  if (state.m.size() != params.size()) throw Error("adam_step: state does not match parameters");
  ++state.t;
  const auto& h = state.hyper;
  double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params.value(p);
    const Tensor& g = grads[p];
    if (g.size() != w.size() || state.m[p].size() != w.size())
      throw Error("adam_step: shape mismatch for '" + params.name(p) + "'");
    auto& m = state.m[p].data;
    auto& v = state.v[p].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g.data[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g.data[i] * g.data[i];
      w.data[i] -= h.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
    }
  }
}

/// Scales gradients in place so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
inline double clip_global_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g.data) sq += x * x;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (auto& g : grads)
      for (auto& x : g.data) x *= s;
  }
  return norm;
}

inline void zero(Gradients& grads) {
  for (auto& g : grads) g.fill(0.0);
}

/// Runs fn(i, worker) for i in [0, n) on up to `threads` workers. Item i
/// always goes to worker i % threads so per-worker results are reproducible.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i, w);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Checkpoints: "LIGERCK1", config hash, seed, then named tensors with raw
// little-endian float64 payloads.

struct CheckpointHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

namespace detail {
inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParameterStore& params,
                            const CheckpointHeader& header) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint '" + path + "'");
  os.write("LIGERCK1", 8);
  detail::put_u64(os, header.config_hash);
  detail::put_u64(os, header.seed);
  detail::put_u64(os, params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& name = params.name(p);
    const auto& t = params.value(p);
    detail::put_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(os, t.shape.size());
    for (auto d : t.shape) detail::put_u64(os, d);
    for (double x : t.data) detail::put_u64(os, std::bit_cast<std::uint64_t>(x));
  }
  if (!os) throw Error("failed writing checkpoint '" + path + "'");
}

/// Loads tensors into an already-shaped store; names and shapes must match.
inline CheckpointHeader load_checkpoint(const std::string& path, ParameterStore& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read checkpoint '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != "LIGERCK1") throw Error("not a checkpoint: '" + path + "'");
  CheckpointHeader h;
  h.config_hash = detail::get_u64(is);
  h.seed = detail::get_u64(is);
  std::uint64_t n = detail::get_u64(is);
  if (n != params.size()) throw Error("checkpoint has " + std::to_string(n) + " tensors, model expects " +
                                      std::to_string(params.size()));
  for (std::uint64_t k = 0; k < n; ++k) {
    std::uint64_t len = detail::get_u64(is);
    if (len > 4096) throw Error("checkpoint corrupt (name length)");
    std::string name(len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(len));
    std::uint64_t nd = detail::get_u64(is);
    if (nd > 8) throw Error("checkpoint corrupt (rank)");
    std::vector<std::size_t> shape(nd);
    for (auto& d : shape) d = detail::get_u64(is);
    Tensor& t = params.value(params.index(name));
    if (shape != t.shape) throw Error("checkpoint shape mismatch for '" + name + "'");
    for (auto& x : t.data) x = std::bit_cast<double>(detail::get_u64(is));
  }
  return h;
}

}  // namespace ligerlab::num

#endif  // LIGERLAB_NUMCORE_HPP
