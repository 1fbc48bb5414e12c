#ifndef LIGERLAB_TESTS_GRADCHECK_HPP
#define LIGERLAB_TESTS_GRADCHECK_HPP

// Central finite-difference oracle for graph gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ligerlab/numcore.hpp"

namespace gradcheck {

using ligerlab::num::Graph;
using ligerlab::num::ParameterStore;
using ligerlab::num::Tensor;
using ligerlab::num::Var;

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

inline double loss_value(const std::vector<Tensor>& inputs, const Builder& build,
                         const ParameterStore* store = nullptr) {
  Graph g(store);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return g.value(build(g, vars)).data[0];
}

/// Worst relative error between autodiff and central differences over the
/// gradients of every input tensor.
inline double check_inputs(std::vector<Tensor> inputs, const Builder& build, double h = 1e-5) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.variable(t));
  Var loss = build(g, vars);
  g.backward(loss);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> analytic = g.grad(vars[k]).values();
    if (analytic.empty()) analytic.assign(inputs[k].size(), 0.0);
    std::vector<double> numeric(inputs[k].size());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      double keep = inputs[k].data[i];
      inputs[k].data[i] = keep + h;
      double up = loss_value(inputs, build);
      inputs[k].data[i] = keep - h;
      double down = loss_value(inputs, build);
      inputs[k].data[i] = keep;
      numeric[i] = (up - down) / (2 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

/// Same check over the tensors of a parameter store.
inline double check_params(ParameterStore& store, const std::function<Var(Graph&)>& build, double h = 1e-5) {
  Graph g(&store);
  Var loss = build(g);
  auto grads = store.zeros_like();
  g.backward(loss, &grads);
  std::vector<double> analytic, numeric;
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& t = store.value(p);
    for (std::size_t i = 0; i < t.size(); ++i) {
      double keep = t.data[i];
      t.data[i] = keep + h;
      double up;
      {
        Graph gu(&store);
        up = gu.value(build(gu)).data[0];
      }
      t.data[i] = keep - h;
      double down;
      {
        Graph gd(&store);
        down = gd.value(build(gd)).data[0];
      }
      t.data[i] = keep;
      analytic.push_back(grads[p].data[i]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  return relative_error(analytic, numeric);
}

inline Tensor random_tensor(ligerlab::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Tensor t = Tensor::matrix(r, c);
  for (auto& x : t.data) x = d(rng);
  return t;
}

/// Scalar projection sum(a ∘ R) with a fixed random R so every output
/// element gets a distinct weight.
inline Var project(Graph& g, Var a, std::uint64_t seed) {
  ligerlab::Rng rng(seed);
  const Tensor& v = g.value(a);
  return g.sum(g.mul(a, g.constant(random_tensor(rng, v.rows(), v.cols()))));
}

}  // namespace gradcheck

#endif  // LIGERLAB_TESTS_GRADCHECK_HPP
