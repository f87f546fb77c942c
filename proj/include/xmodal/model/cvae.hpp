// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "xmodal/model/encoder.hpp"

namespace xmodal::model {

/// Diagonal Gaussian over the latent space; both vectors latent_dim long.
struct GaussianLatent {
  Var mean;
  Var stddev;
};

/// Posterior and decoder weights: `<prefix>.posterior.*`, `<prefix>.decoder.*`.
void init_cvae(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg,
               std::uint64_t seed);

/// Encoder, posterior and decoder of one modality branch.
void init_branch(ParameterStore& store, Modality m, const ModelConfig& cfg,
                 std::uint64_t seed);

/// `future` is the flattened future (2 * delta); `cond` is the condition
/// vector. The last layer's output is split into mean and log-variance.
GaussianLatent encode_posterior(ParamBinder& params, const std::string& prefix,
                                Var future, Var cond, const ModelConfig& cfg);

/// 0.5 * sum(mean^2 + stddev^2 - 1 - log stddev^2).
Var kl_to_standard_normal(const GaussianLatent& q);

/// mean + stddev * noise; noise is latent_dim long or a batch of such rows.
Var reparameterize(const GaussianLatent& q, Var noise);

/// Decoded future offsets, 2 * delta per latent row, interleaved x, y.
Var decode(ParamBinder& params, const std::string& prefix, Var latent, Var cond,
           const ModelConfig& cfg);

/// Future of the target relative to its last observed position, divided by
/// the modality's coordinate scale, flattened.
Tensor future_offsets(const BranchInput& input);
/// Ground-truth future in modality units, flattened.
Tensor future_flat(const BranchInput& input);
/// Maps decoded offsets back to modality units.
Var offsets_to_coords(Var offsets, const BranchInput& input);

/// Mean over future steps of squared distance, in loss units. One value per
/// row of `predictions` (modality units).
Var reconstruction_error(Var predictions, const Tensor& truth, Modality m);

struct ElboTerms {
  Var total;
  Var kl;
  Var recon;
};

/// Single-draw negative ELBO of one branch.
ElboTerms elbo_loss(ParamBinder& params, const BranchInput& input, const ModelConfig& cfg,
                    const Tensor& noise);

struct BranchLoss {
  ElboTerms elbo;
  Var candidates;  // n_train x 2*delta, modality units
  std::size_t best = 0;
};

/// Best-of-n ELBO of one branch: n_train posterior draws (rows of `noise`),
/// the reconstruction term of the closest candidate, KL once.
BranchLoss branch_loss(ParamBinder& params, const BranchInput& input,
                       const ModelConfig& cfg, const Tensor& noise);

struct JointLoss {
  Var total;
  std::vector<BranchLoss> branches;
};

/// Sum of branch losses; inputs[i] uses noises[i].
JointLoss joint_loss(ParamBinder& params, std::span<const BranchInput> inputs,
                     const ModelConfig& cfg, std::span<const Tensor> noises);

/// rows x cols standard-normal draws taken in row-major order.
Tensor standard_normal(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

struct PredictionSet {
  Modality modality = Modality::kTopdown;
  std::size_t target = 0;
  std::vector<std::vector<Vec2>> trajectories;  // n x delta, modality units
  Tensor latents;                               // n x latent_dim
};

/// Decodes n prior draws; the first k draws do not depend on n.
PredictionSet sample_predictions(ParamBinder& params, const BranchInput& input,
                                 const ModelConfig& cfg, std::size_t n,
                                 std::mt19937_64& rng);

}  // namespace xmodal::model
