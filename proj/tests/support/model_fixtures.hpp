// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "xmodal/diff/optim.hpp"
#include "xmodal/model/diversity.hpp"
#include "xmodal/scenario/scenario.hpp"

namespace fixtures {

using namespace xmodal;

inline model::ModelConfig small_config() {
  model::ModelConfig cfg;
  cfg.env_dim = cfg.node_dim = 4;
  cfg.cond_dim = 4;
  cfg.latent_dim = 3;
  cfg.hidden = 4;
  return cfg;
}

inline void zero_all(diff::ParameterStore& store) {
  std::vector<std::string> names;
  for (const auto& [name, t] : store.entries()) names.push_back(name);
  for (const auto& name : names) store.set(name, diff::Tensor::zeros(store.get(name).shape()));
}

/// Replaces every parameter by uniform draws in [-scale, scale], biases too.
inline void randomize(diff::ParameterStore& store, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<std::string> names;
  for (const auto& [name, t] : store.entries()) names.push_back(name);
  for (const auto& name : names) {
    const diff::Tensor& t = store.get(name);
    std::vector<double> v(t.size());
    for (double& x : v) x = u(rng);
    store.set(name, diff::Tensor(t.shape(), std::move(v)));
  }
}

/// Adds small uniform noise to every bias so no ReLU sits exactly on its kink.
inline void jitter_biases(diff::ParameterStore& store, std::mt19937_64& rng, double scale = 0.1) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<std::string> names;
  for (const auto& [name, t] : store.entries()) {
    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0) names.push_back(name);
  }
  for (const auto& name : names) {
    const diff::Tensor& t = store.get(name);
    std::vector<double> v(t.values().begin(), t.values().end());
    for (double& x : v) x += u(rng);
    store.set(name, diff::Tensor(t.shape(), std::move(v)));
  }
}

inline scenario::Scenario make_scenario(std::uint64_t seed, int agents = 0) {
  scenario::GenConfig gen;
  if (agents > 0) gen.min_agents = gen.max_agents = agents;
  return scenario::generate_scenario(gen, seed);
}

inline model::BranchInput make_input(const scenario::Scenario& s, scenario::Modality m,
                                     std::size_t grid = 8) {
  return model::prepare_input(scenario::render_view(s, m), grid);
}

/// grad_check over every stored parameter of `f`'s scalar output.
inline double param_grad_check(const diff::ParameterStore& store,
                               const std::function<diff::Var(diff::ParamBinder&)>& f,
                               double step = 1e-5) {
  std::vector<std::string> names;
  std::vector<diff::Tensor> point;
  for (const auto& [name, t] : store.entries()) {
    names.push_back(name);
    point.push_back(t);
  }
  const diff::GraphBuilder build = [&](diff::Graph& g, std::span<const diff::Var> in) {
    diff::ParamBinder binder(g, store);
    for (std::size_t i = 0; i < names.size(); ++i) binder.bind(names[i], in[i]);
    return f(binder);
  };
  return diff::grad_check(build, point, step);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Scalar LSTM step with gate weights w = {x row, h row} per gate i, f, g, o.
struct ScalarLstm {
  double wx[4];
  double wh[4];
  double b[4];

  double run(const std::vector<double>& xs) const {
    double h = 0.0, c = 0.0;
    for (double x : xs) {
      double a[4];
      for (int k = 0; k < 4; ++k) a[k] = x * wx[k] + h * wh[k] + b[k];
      const double i = sigmoid(a[0]), f = sigmoid(a[1]), g = std::tanh(a[2]),
                   o = sigmoid(a[3]);
      c = f * c + i * g;
      h = o * std::tanh(c);
    }
    return h;
  }

  diff::Tensor weight() const {
    return diff::Tensor::matrix(2, 4, {wx[0], wx[1], wx[2], wx[3], wh[0], wh[1], wh[2], wh[3]});
  }
  diff::Tensor bias() const { return diff::Tensor::vector({b[0], b[1], b[2], b[3]}); }
};

}  // namespace fixtures
