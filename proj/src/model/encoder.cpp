// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/model/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace xmodal::model {

namespace {

std::vector<std::size_t> widths(std::size_t in, std::size_t hidden, std::size_t out,
                                std::size_t layers) {
  std::vector<std::size_t> dims{in};
  for (std::size_t i = 1; i < layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

Tensor positions_matrix(std::span<const Vec2> points) {
  std::vector<double> v;
  v.reserve(points.size() * 2);
  for (const Vec2& p : points) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return Tensor({points.size(), 2}, std::move(v));
}

std::vector<Vec2> scaled_past(const std::vector<Vec2>& track, int tau, double scale) {
  std::vector<Vec2> out;
  out.reserve(tau);
  for (int t = 0; t < tau; ++t) out.push_back((1.0 / scale) * track[t]);
  return out;
}

}  // namespace

void validate(const ModelConfig& cfg) {
  auto require = [](bool ok, const char* field, const char* why) {
    if (!ok) throw std::invalid_argument(std::string(field) + ": " + why);
  };
  require(cfg.grid >= 1, "grid", "must be positive");
  require(cfg.env_dim >= 1, "env_dim", "must be positive");
  require(cfg.node_dim == cfg.env_dim, "node_dim",
          "must equal env_dim, node states and cell features are added");
  require(cfg.cond_dim >= 1, "cond_dim", "must be positive");
  require(cfg.latent_dim >= 1, "latent_dim", "must be positive");
  require(cfg.hidden >= 1, "hidden", "must be positive");
  require(cfg.mlp_layers >= 1, "mlp_layers", "must be positive");
  require(cfg.rounds >= 1, "rounds", "must be positive");
  require(cfg.tau >= 1, "tau", "must be positive");
  require(cfg.delta >= 1, "delta", "must be positive");
}

double coord_scale(Modality m) { return m == Modality::kTopdown ? 10.0 : 100.0; }

double loss_unit(Modality m) { return m == Modality::kTopdown ? 1.0 : 0.1; }

std::string branch_prefix(Modality m) {
  return "branch." + std::string(scenario::modality_name(m));
}

BranchInput prepare_input(const scenario::ModalityView& view, std::size_t grid) {
  const scenario::Raster& stat = view.static_raster;
  if (grid == 0 || stat.width % grid != 0 || stat.height % grid != 0) {
    throw std::invalid_argument("raster " + std::to_string(stat.width) + " x " +
                                std::to_string(stat.height) +
                                " is not divisible into " + std::to_string(grid) +
                                " x " + std::to_string(grid) + " cells");
  }
  for (const auto& r : view.occupancy) {
    if (r.width != stat.width || r.height != stat.height) {
      throw std::invalid_argument("occupancy and static rasters differ in size");
    }
  }
  if (view.occupancy.size() != static_cast<std::size_t>(view.tau)) {
    throw std::invalid_argument("expected one occupancy raster per observed step");
  }
  BranchInput in;
  in.modality = view.modality;
  in.target = view.target;
  in.tau = view.tau;
  in.delta = view.delta;
  in.coords = view.coords;
  in.grid = grid;
  const int cell_w = stat.width / static_cast<int>(grid);
  const int cell_h = stat.height / static_cast<int>(grid);
  for (const auto& track : view.coords) {
    const auto cell = scenario::raster_cell(view, track[view.tau - 1]);
    in.cells.push_back(cell ? ((*cell)[0] / cell_h) * static_cast<int>(grid) +
                                  (*cell)[1] / cell_w
                            : -1);
  }
  const std::size_t cells = grid * grid;
  const double area = static_cast<double>(cell_w) * cell_h;
  std::vector<double> occ(cells * view.tau, 0.0);
  std::vector<double> lab(cells * scenario::kNumMapLabels, 0.0);
  for (int row = 0; row < stat.height; ++row) {
    for (int col = 0; col < stat.width; ++col) {
      const std::size_t c = static_cast<std::size_t>(row / cell_h) * grid + col / cell_w;
      for (int t = 0; t < view.tau; ++t) {
        if (view.occupancy[t].at(row, col)) occ[c * view.tau + t] += 1.0;
      }
      const int label = stat.at(row, col);
      if (label < scenario::kNumMapLabels) lab[c * scenario::kNumMapLabels + label] += 1.0;
    }
  }
  for (double& x : occ) x /= area;
  for (double& x : lab) x /= area;
  in.occupancy_pooled = Tensor({cells, static_cast<std::size_t>(view.tau)}, std::move(occ));
  in.labels_pooled = Tensor({cells, static_cast<std::size_t>(scenario::kNumMapLabels)},
                            std::move(lab));
  return in;
}

void init_encoder(ParameterStore& store, const std::string& prefix,
                  const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const std::size_t layers = cfg.mlp_layers;
  if (cfg.use_env) {
    init_mlp(store, prefix + ".env.temporal",
             widths(cfg.tau, cfg.hidden, cfg.env_dim, layers), seed);
    init_mlp(store, prefix + ".env.spatial",
             widths(scenario::kNumMapLabels, cfg.hidden, cfg.env_dim, layers), seed);
  }
  init_mlp(store, prefix + ".target.embed", widths(2, cfg.hidden, cfg.env_dim, layers),
           seed);
  init_lstm(store, prefix + ".target.lstm", cfg.env_dim, cfg.node_dim, seed);
  if (cfg.use_soc) {
    init_mlp(store, prefix + ".others.embed", widths(2, cfg.hidden, cfg.env_dim, layers),
             seed);
    init_lstm(store, prefix + ".others.lstm", cfg.env_dim, cfg.node_dim, seed);
    init_mlp(store, prefix + ".message",
             widths(3 * cfg.node_dim, cfg.hidden, cfg.node_dim, layers), seed);
  }
  init_mlp(store, prefix + ".readout", widths(cfg.node_dim, cfg.hidden, cfg.cond_dim, layers),
           seed);
}

ExternalFeatureGrid extract_external_features(ParamBinder& params,
                                              const std::string& prefix,
                                              const BranchInput& input,
                                              const ModelConfig& cfg) {
  if (input.grid != cfg.grid) {
    throw std::invalid_argument("input pooled on " + std::to_string(input.grid) +
                                " cells per side, model expects " +
                                std::to_string(cfg.grid));
  }
  diff::Graph& g = params.graph();
  ExternalFeatureGrid out;
  out.grid = cfg.grid;
  out.temporal = mlp(params, prefix + ".env.temporal", g.constant(input.occupancy_pooled),
                     cfg.mlp_layers);
  out.spatial = mlp(params, prefix + ".env.spatial", g.constant(input.labels_pooled),
                    cfg.mlp_layers);
  out.combined = out.temporal + out.spatial;
  return out;
}

Var gather_agent_features(const ExternalFeatureGrid& features, std::span<const int> cells) {
  diff::Graph& g = *features.combined.graph;
  return matmul(g.constant(selection_matrix(cells, features.grid * features.grid)),
                features.combined);
}

Var encode_target(ParamBinder& params, const std::string& prefix,
                  std::span<const Vec2> past, std::optional<Var> context,
                  const ModelConfig& cfg) {
  diff::Graph& g = params.graph();
  Var embedded = mlp(params, prefix + ".target.embed", g.constant(positions_matrix(past)),
                     cfg.mlp_layers);
  if (context) embedded = embedded + *context;
  std::vector<Var> steps;
  for (std::size_t t = 0; t < past.size(); ++t) steps.push_back(row(embedded, t));
  return lstm(params, prefix + ".target.lstm", steps);
}

Var encode_others(ParamBinder& params, const std::string& prefix,
                  std::span<const Vec2> target_past,
                  const std::vector<std::vector<Vec2>>& neighbor_pasts,
                  const ModelConfig& cfg) {
  const std::size_t n = neighbor_pasts.size();
  const std::size_t steps = target_past.size();
  if (n == 0) throw std::invalid_argument("encode_others needs at least one neighbor");
  std::vector<Vec2> diffs;
  diffs.reserve(n * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (const auto& other : neighbor_pasts) {
      if (other.size() != steps) {
        throw std::invalid_argument("neighbor track length differs from target's");
      }
      diffs.push_back(target_past[t] - other[t]);
    }
  }
  diff::Graph& g = params.graph();
  const Var embedded = mlp(params, prefix + ".others.embed",
                           g.constant(positions_matrix(diffs)), cfg.mlp_layers);
  std::vector<Var> seq;
  for (std::size_t t = 0; t < steps; ++t) seq.push_back(slice(embedded, 0, t * n, (t + 1) * n));
  return lstm(params, prefix + ".others.lstm", seq);
}

Var message_pass(ParamBinder& params, const std::string& prefix, Var target_state,
                 std::optional<Var> neighbor_states,
                 std::optional<Var> neighbor_features, const ModelConfig& cfg) {
  diff::Graph& g = params.graph();
  if (!neighbor_states || neighbor_states->shape()[0] == 0) {
    return relu(g.constant(Tensor::zeros({cfg.node_dim})));
  }
  Var nodes = *neighbor_states;
  if (neighbor_features) nodes = nodes + *neighbor_features;
  const std::size_t n = nodes.shape()[0];
  const std::size_t dim = nodes.shape()[1];
  const std::string first = prefix + ".message.l0";
  const Var w = params.get(first + ".weight");
  // [a, b, t] @ W splits into a @ W_a + b @ W_b + t @ W_t.
  const Var from_i = matmul(nodes, slice(w, 0, 0, dim));
  const Var from_j = matmul(nodes, slice(w, 0, dim, 2 * dim));
  const Var from_target = matmul(target_state, slice(w, 0, 2 * dim, 3 * dim));
  std::vector<int> pick_i, pick_j;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      pick_i.push_back(static_cast<int>(i));
      pick_j.push_back(static_cast<int>(j));
    }
  }
  Var pairs = matmul(g.constant(selection_matrix(pick_i, n)), from_i) +
              matmul(g.constant(selection_matrix(pick_j, n)), from_j);
  pairs = pairs + (from_target + params.get(first + ".bias"));
  for (std::size_t l = 1; l < cfg.mlp_layers; ++l) {
    pairs = dense(params, prefix + ".message.l" + std::to_string(l), relu(pairs));
  }
  return relu(sum(pairs, 0));
}

Var readout(ParamBinder& params, const std::string& prefix, Var target_state,
            const ModelConfig& cfg) {
  return mlp(params, prefix + ".readout", target_state, cfg.mlp_layers);
}

std::vector<std::size_t> canonical_neighbors(const BranchInput& input) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < input.num_agents(); ++i) {
    if (i != input.target) order.push_back(i);
  }
  auto key = [&](std::size_t a) {
    std::vector<double> k;
    for (int t = 0; t < input.tau; ++t) {
      k.push_back(input.coords[a][t].x);
      k.push_back(input.coords[a][t].y);
    }
    return k;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return order;
}

Var encode_condition(ParamBinder& params, const std::string& prefix,
                     const BranchInput& input, const ModelConfig& cfg) {
  if (input.target >= input.num_agents()) throw std::invalid_argument("target out of range");
  if (input.tau != cfg.tau) throw std::invalid_argument("observed steps differ from model tau");
  if (params.monitor()) params.monitor()->record(scenario::modality_name(input.modality));
  const double scale = coord_scale(input.modality);
  const std::vector<Vec2> target_past = scaled_past(input.coords[input.target], input.tau, scale);
  const std::vector<std::size_t> neighbors = canonical_neighbors(input);

  std::optional<ExternalFeatureGrid> env;
  std::optional<Var> context;
  if (cfg.use_env) {
    env = extract_external_features(params, prefix, input, cfg);
    const int target_cell = input.cells[input.target];
    const Tensor pick = selection_matrix(std::span<const int>(&target_cell, 1),
                                         cfg.grid * cfg.grid);
    context = row(matmul(params.graph().constant(pick), env->spatial), 0);
  }
  Var state = encode_target(params, prefix, target_past, context, cfg);

  if (cfg.use_soc) {
    std::optional<Var> others;
    std::optional<Var> features;
    if (!neighbors.empty()) {
      std::vector<std::vector<Vec2>> pasts;
      std::vector<int> cells;
      for (std::size_t j : neighbors) {
        pasts.push_back(scaled_past(input.coords[j], input.tau, scale));
        cells.push_back(input.cells[j]);
      }
      others = encode_others(params, prefix, target_past, pasts, cfg);
      if (env) features = gather_agent_features(*env, cells);
    }
    for (int r = 0; r < cfg.rounds; ++r) {
      state = message_pass(params, prefix, state, others, features, cfg);
    }
  }
  return readout(params, prefix, state, cfg);
}

}  // namespace xmodal::model
