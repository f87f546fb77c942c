// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "xmodal/model/cvae.hpp"

namespace xmodal::model {

struct DiversityConfig {
  double sigma_g_sq = 1.0;  // kernel bandwidth, squared loss units
  double lambda = 10.0;
  /// 0 selects the hard max; otherwise a log-sum-exp at this temperature.
  double smooth_temperature = 0.0;
};

void validate(const DiversityConfig& cfg);

/// N x N Gaussian kernel exp(-D / (2 sigma_g_sq)) between the rows of
/// `predictions` (N x 2*steps, modality units), where D is the mean over steps
/// of squared distance in loss units. Rejects N < 2.
Var pairwise_similarity(Var predictions, Modality m, const DiversityConfig& cfg);

/// Off-diagonal argmax over i < j, first pair in row-major order on ties.
std::pair<std::size_t, std::size_t> k_max_pair(const Tensor& similarity);

/// The entry at k_max_pair, differentiable through that entry only.
Var k_max(Var similarity);

/// temperature * log sum exp(K_ij / temperature) over i < j; tends to the
/// hard max as the temperature goes to 0.
Var k_max_smooth(Var similarity, double temperature);

/// elbo + lambda * sum(k_max_terms).
Var total_loss(Var elbo, std::span<const Var> k_max_terms, double lambda);

struct TrainingLoss {
  Var total;
  JointLoss joint;
  std::vector<Var> k_max;  // one per branch
};

/// Joint best-of-n ELBO plus the kernel penalty on each branch's candidates.
TrainingLoss training_loss(ParamBinder& params, std::span<const BranchInput> inputs,
                           const ModelConfig& cfg, const DiversityConfig& div,
                           std::span<const Tensor> noises);

}  // namespace xmodal::model
