// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmodal/model/layers.hpp"
#include "xmodal/scenario/view.hpp"

namespace xmodal::model {

using scenario::Modality;
using scenario::Vec2;

struct ModelConfig {
  std::size_t grid = 8;        // feature cells per raster side
  std::size_t env_dim = 32;    // external feature width
  std::size_t node_dim = 32;   // agent hidden state width
  std::size_t cond_dim = 32;   // condition vector width
  std::size_t latent_dim = 16;
  std::size_t hidden = 32;     // width of every hidden MLP layer
  std::size_t mlp_layers = 2;  // dense layers per MLP
  int rounds = 2;              // message-passing rounds
  bool use_env = true;
  bool use_soc = true;
  int tau = 5;
  int delta = 10;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const ModelConfig& cfg);

/// Model inputs are coordinates divided by this: 10 m top-down, 100 px frontal.
double coord_scale(Modality m);
/// Losses and kernel distances use coordinates times this: meters top-down,
/// tens of pixels frontal.
double loss_unit(Modality m);

/// "branch.<modality>"
std::string branch_prefix(Modality m);

/// What the model reads from one ModalityView.
struct BranchInput {
  Modality modality = Modality::kTopdown;
  std::size_t target = 0;
  int tau = 0;
  int delta = 0;
  std::vector<std::vector<Vec2>> coords;  // [agent][step], modality units
  std::vector<int> cells;                 // feature cell at step tau, -1 if off-raster
  std::size_t grid = 0;
  Tensor occupancy_pooled;  // grid^2 x tau, occupied fraction per cell and step
  Tensor labels_pooled;     // grid^2 x 3, label fraction per cell

  std::size_t num_agents() const { return coords.size(); }
};

/// Pools the rasters onto a grid x grid partition. Throws if a raster side is
/// not divisible by `grid`.
BranchInput prepare_input(const scenario::ModalityView& view, std::size_t grid);

/// Per-cell features of a grid x grid partition, rows in row-major cell order.
struct ExternalFeatureGrid {
  std::size_t grid = 0;
  Var temporal;  // grid^2 x env_dim
  Var spatial;   // grid^2 x env_dim
  Var combined;  // temporal + spatial
};

void init_encoder(ParameterStore& store, const std::string& prefix,
                  const ModelConfig& cfg, std::uint64_t seed);

ExternalFeatureGrid extract_external_features(ParamBinder& params,
                                              const std::string& prefix,
                                              const BranchInput& input,
                                              const ModelConfig& cfg);

/// Row i is the combined feature of cells[i]; negative cells give zero rows.
Var gather_agent_features(const ExternalFeatureGrid& features, std::span<const int> cells);

/// Last LSTM state over the embedded past positions plus local context.
Var encode_target(ParamBinder& params, const std::string& prefix,
                  std::span<const Vec2> past, std::optional<Var> context,
                  const ModelConfig& cfg);

/// One row per neighbor: last LSTM state over the embedded differences
/// target - neighbor.
Var encode_others(ParamBinder& params, const std::string& prefix,
                  std::span<const Vec2> target_past,
                  const std::vector<std::vector<Vec2>>& neighbor_pasts,
                  const ModelConfig& cfg);

/// One round: the target state becomes ReLU of the summed pair messages over
/// ordered neighbor pairs (i, j), i == j included, taken in index order.
/// Neighbor rows are returned unchanged by the caller.
Var message_pass(ParamBinder& params, const std::string& prefix, Var target_state,
                 std::optional<Var> neighbor_states,
                 std::optional<Var> neighbor_features, const ModelConfig& cfg);

Var readout(ParamBinder& params, const std::string& prefix, Var target_state,
            const ModelConfig& cfg);

/// Neighbor indices (every agent but the target) sorted by past coordinates,
/// so the result does not depend on agent labels.
std::vector<std::size_t> canonical_neighbors(const BranchInput& input);

/// Full encoder: condition vector of the target (cond_dim).
Var encode_condition(ParamBinder& params, const std::string& prefix,
                     const BranchInput& input, const ModelConfig& cfg);

}  // namespace xmodal::model
