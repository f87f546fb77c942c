// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/model/diversity.hpp"

#include <cmath>
#include <stdexcept>

namespace xmodal::model {

void validate(const DiversityConfig& cfg) {
  if (!(cfg.sigma_g_sq > 0.0) || !std::isfinite(cfg.sigma_g_sq)) {
    throw std::invalid_argument("sigma_g_sq: must be positive");
  }
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw std::invalid_argument("lambda: must be non-negative");
  }
  if (!(cfg.smooth_temperature >= 0.0)) {
    throw std::invalid_argument("smooth_temperature: must be non-negative");
  }
}

Var pairwise_similarity(Var predictions, Modality m, const DiversityConfig& cfg) {
  validate(cfg);
  if (predictions.shape().size() != 2 || predictions.shape()[1] % 2 != 0) {
    throw diff::ShapeError("predictions must be N x 2*steps, got " +
                           diff::shape_to_string(predictions.shape()));
  }
  const std::size_t n = predictions.shape()[0];
  if (n < 2) throw std::invalid_argument("similarity needs at least two predictions");
  const double steps = static_cast<double>(predictions.shape()[1]) / 2.0;
  std::vector<int> first, second;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      first.push_back(static_cast<int>(i));
      second.push_back(static_cast<int>(j));
    }
  }
  diff::Graph& g = *predictions.graph;
  const Var diffs = matmul(g.constant(selection_matrix(first, n)), predictions) -
                    matmul(g.constant(selection_matrix(second, n)), predictions);
  const double unit = loss_unit(m);
  const Var distance = scale(sum(square(diffs), 1), unit * unit / steps);
  const Var kernel = exp(scale(distance, -1.0 / (2.0 * cfg.sigma_g_sq)));
  return reshape(kernel, {n, n});
}

std::pair<std::size_t, std::size_t> k_max_pair(const Tensor& similarity) {
  const std::size_t n = similarity.dim(0);
  if (similarity.rank() != 2 || similarity.dim(1) != n || n < 2) {
    throw diff::ShapeError("similarity must be square with N >= 2");
  }
  std::pair<std::size_t, std::size_t> best{0, 1};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (similarity.at(i, j) > similarity.at(best.first, best.second)) best = {i, j};
    }
  }
  return best;
}

Var k_max(Var similarity) {
  const auto [i, j] = k_max_pair(similarity.value());
  return row(row(similarity, i), j);
}

Var k_max_smooth(Var similarity, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature: must be positive");
  const Tensor& v = similarity.value();
  const auto [bi, bj] = k_max_pair(v);
  const std::size_t n = v.dim(0);
  std::vector<int> upper;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) upper.push_back(static_cast<int>(i * n + j));
  }
  diff::Graph& g = *similarity.graph;
  const Var entries = reshape(matmul(g.constant(selection_matrix(upper, n * n)),
                                     reshape(similarity, {n * n, 1})),
                              {upper.size()});
  const double peak = v.at(bi, bj);
  const Var shifted = scale(entries - g.scalar(peak), 1.0 / temperature);
  return g.scalar(peak) + scale(log(sum(exp(shifted))), temperature);
}

Var total_loss(Var elbo, std::span<const Var> k_max_terms, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda: must be non-negative");
  Var total = elbo;
  for (const Var& k : k_max_terms) total = total + scale(k, lambda);
  return total;
}

TrainingLoss training_loss(ParamBinder& params, std::span<const BranchInput> inputs,
                           const ModelConfig& cfg, const DiversityConfig& div,
                           std::span<const Tensor> noises) {
  TrainingLoss out;
  out.joint = joint_loss(params, inputs, cfg, noises);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const BranchLoss& b = out.joint.branches[i];
    if (b.candidates.shape()[0] >= 2) {
      const Var sim = pairwise_similarity(b.candidates, inputs[i].modality, div);
      out.k_max.push_back(div.smooth_temperature > 0.0 ? k_max_smooth(sim, div.smooth_temperature)
                                                       : k_max(sim));
    }
  }
  out.total = total_loss(out.joint.total, out.k_max, div.lambda);
  return out;
}

}  // namespace xmodal::model
