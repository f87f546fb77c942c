// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/model/layers.hpp"

#include <cmath>
#include <random>

namespace xmodal::model {

std::uint64_t parameter_seed(std::string_view name, std::uint64_t seed) {
  // FNV-1a, then a splitmix64 finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void init_dense(ParameterStore& store, const std::string& name, std::size_t in,
                std::size_t out, std::uint64_t seed) {
  const std::string weight = name + ".weight";
  std::mt19937_64 rng(parameter_seed(weight, seed));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> w(in * out);
  for (double& x : w) x = u(rng);
  store.add(weight, Tensor({in, out}, std::move(w)));
  store.add(name + ".bias", Tensor::zeros({out}));
}

Var dense(ParamBinder& params, const std::string& name, Var x) {
  return matmul(x, params.get(name + ".weight")) + params.get(name + ".bias");
}

Var dense_conditioned(ParamBinder& params, const std::string& name, Var x, Var cond) {
  const Var w = params.get(name + ".weight");
  const std::size_t in = x.shape().back();
  const std::size_t total = w.shape()[0];
  if (cond.shape().size() != 1 || in + cond.shape()[0] != total) {
    throw diff::ShapeError(name + ": input " + diff::shape_to_string(x.shape()) +
                           " and condition " + diff::shape_to_string(cond.shape()) +
                           " do not match weight " + diff::shape_to_string(w.shape()));
  }
  const Var from_x = matmul(x, slice(w, 0, 0, in));
  const Var from_cond = matmul(cond, slice(w, 0, in, total));
  return from_x + (from_cond + params.get(name + ".bias"));
}

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::kRelu: return relu(x);
    case Activation::kLeakyRelu: return leaky_relu(x);
    case Activation::kNone: return x;
  }
  return x;
}

void init_mlp(ParameterStore& store, const std::string& name,
              std::span<const std::size_t> dims, std::uint64_t seed) {
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    init_dense(store, name + ".l" + std::to_string(i), dims[i], dims[i + 1], seed);
  }
}

Var mlp(ParamBinder& params, const std::string& name, Var x, std::size_t layers,
        Activation act) {
  for (std::size_t i = 0; i < layers; ++i) {
    x = dense(params, name + ".l" + std::to_string(i), x);
    if (i + 1 < layers) x = activate(x, act);
  }
  return x;
}

void init_lstm(ParameterStore& store, const std::string& name, std::size_t in,
               std::size_t hidden, std::uint64_t seed) {
  init_dense(store, name, in + hidden, 4 * hidden, seed);
}

Var lstm(ParamBinder& params, const std::string& name, std::span<const Var> steps) {
  if (steps.empty()) throw std::invalid_argument(name + ": empty sequence");
  const Var w = params.get(name + ".weight");
  const Var b = params.get(name + ".bias");
  const std::size_t hidden = w.shape()[1] / 4;
  diff::Graph& g = params.graph();
  const bool batched = steps[0].shape().size() == 2;
  const diff::Shape state_shape =
      batched ? diff::Shape{steps[0].shape()[0], hidden} : diff::Shape{hidden};
  const std::size_t axis = batched ? 1 : 0;
  Var h = g.constant(Tensor::zeros(state_shape));
  Var c = h;
  for (const Var& x : steps) {
    const Var gates = matmul(diff::concat({x, h}, axis), w) + b;
    const Var in_gate = sigmoid(slice(gates, axis, 0, hidden));
    const Var forget = sigmoid(slice(gates, axis, hidden, 2 * hidden));
    const Var candidate = tanh(slice(gates, axis, 2 * hidden, 3 * hidden));
    const Var out_gate = sigmoid(slice(gates, axis, 3 * hidden, 4 * hidden));
    c = forget * c + in_gate * candidate;
    h = out_gate * tanh(c);
  }
  return h;
}

Tensor selection_matrix(std::span<const int> picks, std::size_t columns) {
  std::vector<double> v(picks.size() * columns, 0.0);
  for (std::size_t r = 0; r < picks.size(); ++r) {
    if (picks[r] >= 0) {
      if (static_cast<std::size_t>(picks[r]) >= columns) {
        throw std::out_of_range("selection index out of range");
      }
      v[r * columns + picks[r]] = 1.0;
    }
  }
  return Tensor({picks.size(), columns}, std::move(v));
}

}  // namespace xmodal::model
