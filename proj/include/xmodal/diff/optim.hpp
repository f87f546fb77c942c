// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xmodal/diff/params.hpp"

namespace xmodal::diff {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter first/second moments plus the shared step counter.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

/// One bias-corrected adaptive-moment update of every parameter in `grads`.
void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state);

using GraphBuilder = std::function<Var(Graph&, std::span<const Var>)>;

/// Largest |analytic - central difference| / max(1, |central difference|)
/// over all coordinates of all inputs.
double grad_check(const GraphBuilder& function, std::span<const Tensor> point,
                  double step = 1e-5);

}  // namespace xmodal::diff
