// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/diff/optim.hpp"

#include <algorithm>
#include <cmath>

namespace xmodal::diff {

void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state) {
  const AdamConfig& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& entry : grads.entries()) {
    const Tensor& p = params.get(entry.name);
    if (p.shape() != entry.grad.shape()) {
      throw ShapeError("adam: gradient for " + entry.name + " has shape " +
                       shape_to_string(entry.grad.shape()) + ", parameter " +
                       shape_to_string(p.shape()));
    }
    auto& m = state.first_moment[entry.name];
    auto& v = state.second_moment[entry.name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    std::vector<double> next(p.values().begin(), p.values().end());
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double g = entry.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      next[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    params.set(entry.name, Tensor(p.shape(), std::move(next)));
  }
}

namespace {

double evaluate(const GraphBuilder& function, std::span<const Tensor> point) {
  Graph g;
  std::vector<Var> inputs;
  inputs.reserve(point.size());
  for (const Tensor& t : point) inputs.push_back(g.constant(t));
  return g.value(function(g, inputs)).item();
}

}  // namespace

double grad_check(const GraphBuilder& function, std::span<const Tensor> point,
                  double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");
  Graph g;
  std::vector<Var> inputs;
  for (std::size_t i = 0; i < point.size(); ++i) {
    inputs.push_back(g.parameter("input" + std::to_string(i), point[i]));
  }
  const Gradients analytic = g.backward(function(g, inputs));

  double worst = 0.0;
  std::vector<Tensor> probe(point.begin(), point.end());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const Tensor& grad = analytic.entries()[i].grad;
    for (std::size_t j = 0; j < point[i].size(); ++j) {
      std::vector<double> vals(point[i].values().begin(), point[i].values().end());
      const double x = vals[j];
      vals[j] = x + step;
      probe[i] = Tensor(point[i].shape(), vals);
      const double up = evaluate(function, probe);
      vals[j] = x - step;
      probe[i] = Tensor(point[i].shape(), vals);
      const double down = evaluate(function, probe);
      probe[i] = point[i];
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(grad[j] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace xmodal::diff
