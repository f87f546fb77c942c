// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/model/cvae.hpp"

#include <stdexcept>

namespace xmodal::model {

namespace {

// Every layer sees [input, cond]; `act` after all but the last.
void init_conditioned_stack(ParameterStore& store, const std::string& name,
                            std::size_t in, std::size_t out, const ModelConfig& cfg,
                            std::uint64_t seed) {
  std::size_t width = in;
  for (std::size_t l = 0; l < cfg.mlp_layers; ++l) {
    const std::size_t next = l + 1 == cfg.mlp_layers ? out : cfg.hidden;
    init_dense(store, name + ".l" + std::to_string(l), width + cfg.cond_dim, next, seed);
    width = next;
  }
}

Var conditioned_stack(ParamBinder& params, const std::string& name, Var x, Var cond,
                      const ModelConfig& cfg, Activation act) {
  for (std::size_t l = 0; l < cfg.mlp_layers; ++l) {
    x = dense_conditioned(params, name + ".l" + std::to_string(l), x, cond);
    if (l + 1 < cfg.mlp_layers) x = activate(x, act);
  }
  return x;
}

std::size_t argmin(const Tensor& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

}  // namespace

void init_cvae(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg,
               std::uint64_t seed) {
  validate(cfg);
  const std::size_t future = 2 * static_cast<std::size_t>(cfg.delta);
  init_conditioned_stack(store, prefix + ".posterior", future, 2 * cfg.latent_dim, cfg, seed);
  init_conditioned_stack(store, prefix + ".decoder", cfg.latent_dim, future, cfg, seed);
}

void init_branch(ParameterStore& store, Modality m, const ModelConfig& cfg,
                 std::uint64_t seed) {
  init_encoder(store, branch_prefix(m), cfg, seed);
  init_cvae(store, branch_prefix(m), cfg, seed);
}

GaussianLatent encode_posterior(ParamBinder& params, const std::string& prefix,
                                Var future, Var cond, const ModelConfig& cfg) {
  const Var out = conditioned_stack(params, prefix + ".posterior", future, cond, cfg,
                                    Activation::kLeakyRelu);
  const std::size_t d = cfg.latent_dim;
  if (out.shape() != diff::Shape{2 * d}) {
    throw diff::ShapeError("posterior output " + diff::shape_to_string(out.shape()) +
                           ", expected [" + std::to_string(2 * d) + "]");
  }
  return {slice(out, 0, 0, d), exp(scale(slice(out, 0, d, 2 * d), 0.5))};
}

Var kl_to_standard_normal(const GaussianLatent& q) {
  diff::Graph& g = *q.mean.graph;
  const double dims = static_cast<double>(q.mean.value().size());
  const Var variance = square(q.stddev);
  const Var inner = sum(square(q.mean)) + sum(variance) - g.scalar(dims) - sum(log(variance));
  return scale(inner, 0.5);
}

Var reparameterize(const GaussianLatent& q, Var noise) {
  return (noise * q.stddev) + q.mean;
}

Var decode(ParamBinder& params, const std::string& prefix, Var latent, Var cond,
           const ModelConfig& cfg) {
  return conditioned_stack(params, prefix + ".decoder", latent, cond, cfg, Activation::kRelu);
}

Tensor future_offsets(const BranchInput& input) {
  const auto& track = input.coords[input.target];
  const Vec2 origin = track[input.tau - 1];
  const double scale = coord_scale(input.modality);
  std::vector<double> v;
  for (int t = input.tau; t < input.tau + input.delta; ++t) {
    const Vec2 d = (1.0 / scale) * (track[t] - origin);
    v.push_back(d.x);
    v.push_back(d.y);
  }
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor future_flat(const BranchInput& input) {
  const auto& track = input.coords[input.target];
  std::vector<double> v;
  for (int t = input.tau; t < input.tau + input.delta; ++t) {
    v.push_back(track[t].x);
    v.push_back(track[t].y);
  }
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Var offsets_to_coords(Var offsets, const BranchInput& input) {
  const Vec2 origin = input.coords[input.target][input.tau - 1];
  std::vector<double> tiled;
  for (int t = 0; t < input.delta; ++t) {
    tiled.push_back(origin.x);
    tiled.push_back(origin.y);
  }
  diff::Graph& g = *offsets.graph;
  return scale(offsets, coord_scale(input.modality)) +
         g.constant(Tensor({2 * static_cast<std::size_t>(input.delta)}, std::move(tiled)));
}

Var reconstruction_error(Var predictions, const Tensor& truth, Modality m) {
  diff::Graph& g = *predictions.graph;
  const Var err = square(predictions - g.constant(truth));
  const double steps = static_cast<double>(truth.size()) / 2.0;
  const double unit = loss_unit(m);
  const int axis = predictions.shape().size() == 2 ? 1 : -1;
  return scale(sum(err, axis), unit * unit / steps);
}

ElboTerms elbo_loss(ParamBinder& params, const BranchInput& input, const ModelConfig& cfg,
                    const Tensor& noise) {
  const std::string prefix = branch_prefix(input.modality);
  diff::Graph& g = params.graph();
  const Var cond = encode_condition(params, prefix, input, cfg);
  const GaussianLatent q =
      encode_posterior(params, prefix, g.constant(future_offsets(input)), cond, cfg);
  const Var z = reparameterize(q, g.constant(noise));
  const Var pred = offsets_to_coords(decode(params, prefix, z, cond, cfg), input);
  ElboTerms terms;
  terms.kl = kl_to_standard_normal(q);
  terms.recon = reconstruction_error(pred, future_flat(input), input.modality);
  terms.total = terms.kl + terms.recon;
  return terms;
}

BranchLoss branch_loss(ParamBinder& params, const BranchInput& input,
                       const ModelConfig& cfg, const Tensor& noise) {
  if (noise.rank() != 2 || noise.dim(0) == 0 || noise.dim(1) != cfg.latent_dim) {
    throw diff::ShapeError("noise must be n x " + std::to_string(cfg.latent_dim) + ", got " +
                           diff::shape_to_string(noise.shape()));
  }
  const std::string prefix = branch_prefix(input.modality);
  diff::Graph& g = params.graph();
  const Var cond = encode_condition(params, prefix, input, cfg);
  const GaussianLatent q =
      encode_posterior(params, prefix, g.constant(future_offsets(input)), cond, cfg);
  const Var z = reparameterize(q, g.constant(noise));
  BranchLoss out;
  out.candidates = offsets_to_coords(decode(params, prefix, z, cond, cfg), input);
  const Var errors = reconstruction_error(out.candidates, future_flat(input), input.modality);
  out.best = argmin(errors.value());
  out.elbo.kl = kl_to_standard_normal(q);
  out.elbo.recon = row(errors, out.best);
  out.elbo.total = out.elbo.kl + out.elbo.recon;
  return out;
}

JointLoss joint_loss(ParamBinder& params, std::span<const BranchInput> inputs,
                     const ModelConfig& cfg, std::span<const Tensor> noises) {
  if (inputs.empty()) throw std::invalid_argument("joint loss needs at least one branch");
  if (inputs.size() != noises.size()) throw std::invalid_argument("one noise draw per branch");
  JointLoss out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out.branches.push_back(branch_loss(params, inputs[i], cfg, noises[i]));
    const Var term = out.branches.back().elbo.total;
    out.total = i == 0 ? term : out.total + term;
  }
  return out;
}

Tensor standard_normal(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = normal(rng);
  return Tensor({rows, cols}, std::move(v));
}

PredictionSet sample_predictions(ParamBinder& params, const BranchInput& input,
                                 const ModelConfig& cfg, std::size_t n,
                                 std::mt19937_64& rng) {
  if (n == 0) throw std::invalid_argument("need at least one sample");
  const std::string prefix = branch_prefix(input.modality);
  diff::Graph& g = params.graph();
  const Var cond = encode_condition(params, prefix, input, cfg);
  PredictionSet out;
  out.modality = input.modality;
  out.target = input.target;
  out.latents = standard_normal(rng, n, cfg.latent_dim);
  const Var coords =
      offsets_to_coords(decode(params, prefix, g.constant(out.latents), cond, cfg), input);
  const Tensor& v = coords.value();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Vec2> traj;
    for (int t = 0; t < input.delta; ++t) {
      traj.push_back({v.at(i, 2 * t), v.at(i, 2 * t + 1)});
    }
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

}  // namespace xmodal::model
