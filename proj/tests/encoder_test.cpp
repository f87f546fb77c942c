// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support/model_fixtures.hpp"

using namespace xmodal;
using namespace xmodal::model;
using diff::Graph;
using diff::Tensor;
using scenario::Modality;
using scenario::Vec2;

namespace {

const std::string kPrefix = "branch.topdown";

std::vector<double> row_values(const Tensor& m, std::size_t r) {
  std::vector<double> out;
  for (std::size_t c = 0; c < m.dim(1); ++c) out.push_back(m.at(r, c));
  return out;
}

std::vector<double> values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

}  // namespace

TEST_CASE("external features vanish for empty rasters and zero weights") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 1);
  fixtures::zero_all(store);
  BranchInput in = fixtures::make_input(fixtures::make_scenario(3), Modality::kTopdown);
  in.occupancy_pooled = Tensor::zeros(in.occupancy_pooled.shape());
  in.labels_pooled = Tensor::zeros(in.labels_pooled.shape());
  Graph g;
  ParamBinder binder(g, store);
  const auto grid = extract_external_features(binder, kPrefix, in, cfg);
  CHECK(grid.combined.shape() == diff::Shape{64, 4});
  for (double v : grid.combined.value().values()) CHECK(v == 0.0);
}

TEST_CASE("external features are local to their cell") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 2);
  const auto s = fixtures::make_scenario(4);
  scenario::ModalityView view = scenario::render_view(s, Modality::kTopdown);
  scenario::ModalityView edited = view;
  // Cell (3, 5) covers raster rows 60..79 and columns 100..119.
  for (int r = 62; r < 70; ++r) {
    edited.occupancy[2].cells[r * 160 + 104] ^= 1;
    edited.static_raster.cells[r * 160 + 111] = 2;
  }
  Graph g;
  ParamBinder binder(g, store);
  const auto a = extract_external_features(binder, kPrefix, prepare_input(view, 8), cfg);
  const auto b = extract_external_features(binder, kPrefix, prepare_input(edited, 8), cfg);
  const std::size_t changed = 3 * 8 + 5;
  for (std::size_t c = 0; c < 64; ++c) {
    if (c == changed) {
      CHECK(row_values(a.combined.value(), c) != row_values(b.combined.value(), c));
    } else {
      CHECK(row_values(a.combined.value(), c) == row_values(b.combined.value(), c));
    }
  }
}

TEST_CASE("external features are the exact sum of both branches") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 3);
  Graph g;
  ParamBinder binder(g, store);
  const auto f = extract_external_features(
      binder, kPrefix, fixtures::make_input(fixtures::make_scenario(5), Modality::kTopdown), cfg);
  const Tensor& t = f.temporal.value();
  const Tensor& sp = f.spatial.value();
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(f.combined.value()[i] == t[i] + sp[i]);
}

TEST_CASE("raster sizes must divide into the feature grid") {
  const auto view = scenario::render_view(fixtures::make_scenario(1), Modality::kFrontal);
  CHECK_NOTHROW(prepare_input(view, 8));
  CHECK_THROWS_AS(prepare_input(view, 7), std::invalid_argument);
  const auto top = scenario::render_view(fixtures::make_scenario(1), Modality::kTopdown);
  CHECK_THROWS_AS(prepare_input(top, 3), std::invalid_argument);
}

TEST_CASE("gathered rows come from each agent's cell") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 4);
  const auto s = fixtures::make_scenario(6);
  scenario::ModalityView view = scenario::render_view(s, Modality::kTopdown);
  const int tau = view.tau;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> x(-15, 95), y(-55, 55);

  SUBCASE("first sub-region and shared cells") {
    view.coords[0][tau - 1] = {1.0, -39.0};
    view.coords[1][tau - 1] = {9.0, -31.0};
    const BranchInput in = prepare_input(view, 8);
    CHECK(in.cells[0] == 0);
    Graph g;
    ParamBinder binder(g, store);
    const auto grid = extract_external_features(binder, kPrefix, in, cfg);
    const Var rows = gather_agent_features(grid, in.cells);
    CHECK(row_values(rows.value(), 0) == row_values(grid.combined.value(), 0));
    CHECK(row_values(rows.value(), 0) == row_values(rows.value(), 1));
  }

  SUBCASE("random placements match floor division") {
    for (int trial = 0; trial < 200; ++trial) {
      for (auto& track : view.coords) track[tau - 1] = {x(rng), y(rng)};
      const BranchInput in = prepare_input(view, 8);
      Graph g;
      ParamBinder binder(g, store);
      const auto grid = extract_external_features(binder, kPrefix, in, cfg);
      const Var rows = gather_agent_features(grid, in.cells);
      for (std::size_t a = 0; a < view.coords.size(); ++a) {
        const Vec2 p = view.coords[a][tau - 1];
        const bool inside = p.x >= 0 && p.x < 80 && p.y >= -40 && p.y < 40;
        const int cell = inside ? static_cast<int>(std::floor(p.x / 10.0)) * 8 +
                                      static_cast<int>(std::floor((p.y + 40.0) / 10.0))
                                : -1;
        CHECK(in.cells[a] == cell);
        const auto got = row_values(rows.value(), a);
        if (cell < 0) {
          CHECK(got == std::vector<double>(cfg.env_dim, 0.0));
        } else {
          CHECK(got == row_values(grid.combined.value(), cell));
        }
      }
    }
  }
}

TEST_CASE("frontal cells follow pixel floor division") {
  const auto s = fixtures::make_scenario(8);
  scenario::ModalityView view = scenario::render_view(s, Modality::kFrontal);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20, 440), v(-10, 140);
  for (int trial = 0; trial < 300; ++trial) {
    for (auto& track : view.coords) track[view.tau - 1] = {u(rng), v(rng)};
    const BranchInput in = prepare_input(view, 8);
    for (std::size_t a = 0; a < view.coords.size(); ++a) {
      const Vec2 p = view.coords[a][view.tau - 1];
      const bool inside = p.x >= 0 && p.x < 414 && p.y >= 0 && p.y < 125;
      const int cell = inside ? static_cast<int>(std::floor(p.y) / 16) * 8 +
                                    static_cast<int>(std::floor(p.x) / 52)
                              : -1;
      CHECK(in.cells[a] == cell);
    }
  }
}

TEST_CASE("target encoder") {
  SUBCASE("zero weights give a zero state") {
    const ModelConfig cfg = fixtures::small_config();
    ParameterStore store;
    init_encoder(store, kPrefix, cfg, 5);
    fixtures::zero_all(store);
    Graph g;
    ParamBinder binder(g, store);
    const std::vector<Vec2> past = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}};
    const Var h = encode_target(binder, kPrefix, past, std::nullopt, cfg);
    for (double v : h.value().values()) CHECK(v == 0.0);
  }

  SUBCASE("absolute positions matter") {
    const ModelConfig cfg = fixtures::small_config();
    std::mt19937_64 rng(6);
    bool changed = false;
    for (int draw = 0; draw < 5; ++draw) {
      ParameterStore store;
      init_encoder(store, kPrefix, cfg, draw);
      fixtures::randomize(store, rng);
      std::vector<Vec2> past(5, Vec2{1.5, -0.5});
      std::vector<Vec2> shifted(5, Vec2{1.5 + 2.0, -0.5 + 3.0});
      Graph g;
      ParamBinder binder(g, store);
      const auto a = values(encode_target(binder, kPrefix, past, std::nullopt, cfg).value());
      const auto b = values(encode_target(binder, kPrefix, shifted, std::nullopt, cfg).value());
      changed = changed || a != b;
    }
    CHECK(changed);
  }

  SUBCASE("two-step scalar case matches a hand unroll") {
    ModelConfig cfg;
    cfg.env_dim = cfg.node_dim = cfg.hidden = 1;
    cfg.mlp_layers = 1;
    cfg.tau = 2;
    ParameterStore store;
    store.add(kPrefix + ".target.embed.l0.weight", Tensor::matrix(2, 1, {0.7, -0.4}));
    store.add(kPrefix + ".target.embed.l0.bias", Tensor::vector({0.1}));
    const fixtures::ScalarLstm cell{{0.5, -0.3, 0.8, 0.2}, {0.1, 0.4, -0.6, 0.9},
                                    {0.05, 0.5, -0.1, 0.0}};
    store.add(kPrefix + ".target.lstm.weight", cell.weight());
    store.add(kPrefix + ".target.lstm.bias", cell.bias());
    const std::vector<Vec2> past = {{1.0, 2.0}, {1.5, 1.0}};
    const double omega = 0.25;
    Graph g;
    ParamBinder binder(g, store);
    const Var h = encode_target(binder, kPrefix, past,
                                g.constant(Tensor::vector({omega})), cfg);
    std::vector<double> xs;
    for (const Vec2& p : past) xs.push_back(0.7 * p.x - 0.4 * p.y + 0.1 + omega);
    CHECK(std::abs(h.value()[0] - cell.run(xs)) <= 1e-12);
  }
}

TEST_CASE("neighbor encoder") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 7);
  std::mt19937_64 rng(8);
  fixtures::randomize(store, rng);

  SUBCASE("identical tracks give the response to a zero sequence") {
    const std::vector<Vec2> track = {{1, 1}, {2, 1}, {3, 2}, {4, 2}, {5, 3}};
    Graph g;
    ParamBinder binder(g, store);
    const Var h = encode_others(binder, kPrefix, track, {track}, cfg);
    const Var zero_embed = mlp(binder, kPrefix + ".others.embed",
                               g.constant(Tensor::zeros({1, 2})), cfg.mlp_layers);
    const std::vector<Var> seq(5, zero_embed);
    CHECK(values(h.value()) == values(lstm(binder, kPrefix + ".others.lstm", seq).value()));
  }

  SUBCASE("a common translation leaves the output bitwise unchanged") {
    // Dyadic coordinates and integer offsets keep every sum exact.
    std::uniform_int_distribution<int> q(-640, 640);
    std::uniform_int_distribution<int> off(-50, 50);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Vec2> target(5);
      std::vector<std::vector<Vec2>> others(3, std::vector<Vec2>(5));
      for (auto& p : target) p = {q(rng) / 64.0, q(rng) / 64.0};
      for (auto& o : others)
        for (auto& p : o) p = {q(rng) / 64.0, q(rng) / 64.0};
      const Vec2 shift{static_cast<double>(off(rng)), static_cast<double>(off(rng))};
      auto moved_target = target;
      auto moved_others = others;
      for (auto& p : moved_target) p = p + shift;
      for (auto& o : moved_others)
        for (auto& p : o) p = p + shift;
      Graph g;
      ParamBinder binder(g, store);
      CHECK(values(encode_others(binder, kPrefix, target, others, cfg).value()) ==
            values(encode_others(binder, kPrefix, moved_target, moved_others, cfg).value()));
    }
  }

  SUBCASE("scalar case matches a hand unroll") {
    ModelConfig tiny;
    tiny.env_dim = tiny.node_dim = tiny.hidden = 1;
    tiny.mlp_layers = 1;
    ParameterStore s;
    s.add(kPrefix + ".others.embed.l0.weight", Tensor::matrix(2, 1, {-0.6, 0.3}));
    s.add(kPrefix + ".others.embed.l0.bias", Tensor::vector({0.2}));
    const fixtures::ScalarLstm cell{{0.3, 0.6, -0.7, 0.1}, {-0.2, 0.3, 0.5, 0.4},
                                    {0.0, 0.2, 0.1, -0.3}};
    s.add(kPrefix + ".others.lstm.weight", cell.weight());
    s.add(kPrefix + ".others.lstm.bias", cell.bias());
    const std::vector<Vec2> target = {{0.0, 0.0}, {1.0, 0.5}, {2.0, 1.5}};
    const std::vector<Vec2> other = {{1.0, -1.0}, {1.5, -0.5}, {1.0, 0.5}};
    Graph g;
    ParamBinder binder(g, s);
    const Var h = encode_others(binder, kPrefix, target, {other}, tiny);
    std::vector<double> xs;
    for (int t = 0; t < 3; ++t) {
      const Vec2 d = target[t] - other[t];
      xs.push_back(-0.6 * d.x + 0.3 * d.y + 0.2);
    }
    CHECK(std::abs(h.value().at(0, 0) - cell.run(xs)) <= 1e-12);
  }
}

TEST_CASE("message passing") {
  SUBCASE("no neighbors gives a zero target state") {
    const ModelConfig cfg = fixtures::small_config();
    ParameterStore store;
    init_encoder(store, kPrefix, cfg, 9);
    Graph g;
    ParamBinder binder(g, store);
    const Var h = message_pass(binder, kPrefix, g.constant(Tensor::vector({1, 2, 3, 4})),
                               std::nullopt, std::nullopt, cfg);
    CHECK(values(h.value()) == std::vector<double>(4, 0.0));
  }

  SUBCASE("three agents match an explicit double loop") {
    ModelConfig cfg;
    cfg.env_dim = cfg.node_dim = 2;
    cfg.hidden = 3;
    ParameterStore store;
    init_mlp(store, kPrefix + ".message", std::vector<std::size_t>{6, 3, 2}, 0);
    std::mt19937_64 rng(10);
    fixtures::randomize(store, rng, 0.8);
    const Tensor w0 = store.get(kPrefix + ".message.l0.weight");
    const Tensor b0 = store.get(kPrefix + ".message.l0.bias");
    const Tensor w1 = store.get(kPrefix + ".message.l1.weight");
    const Tensor b1 = store.get(kPrefix + ".message.l1.bias");
    const std::vector<double> hk = {0.3, -0.7};
    const std::vector<std::vector<double>> hn = {{0.5, 0.1}, {-0.2, 0.9}};
    const std::vector<std::vector<double>> fn = {{0.05, -0.3}, {0.4, 0.2}};

    std::vector<double> m(2, 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> in = {hn[i][0] + fn[i][0], hn[i][1] + fn[i][1],
                                  hn[j][0] + fn[j][0], hn[j][1] + fn[j][1], hk[0], hk[1]};
        std::vector<double> hidden(3);
        for (std::size_t c = 0; c < 3; ++c) {
          double acc = b0[c];
          for (std::size_t r = 0; r < 6; ++r) acc += in[r] * w0.at(r, c);
          hidden[c] = std::max(0.0, acc);
        }
        for (std::size_t c = 0; c < 2; ++c) {
          double acc = b1[c];
          for (std::size_t r = 0; r < 3; ++r) acc += hidden[r] * w1.at(r, c);
          m[c] += acc;
        }
      }
    }
    Graph g;
    ParamBinder binder(g, store);
    const Var h = message_pass(binder, kPrefix, g.constant(Tensor::vector({hk[0], hk[1]})),
                               g.constant(Tensor::matrix(2, 2, {0.5, 0.1, -0.2, 0.9})),
                               g.constant(Tensor::matrix(2, 2, {0.05, -0.3, 0.4, 0.2})), cfg);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(std::abs(h.value()[c] - std::max(0.0, m[c])) <= 1e-12);
    }
  }
}

TEST_CASE("readout") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 12);
  Graph g;
  ParamBinder binder(g, store);
  const Var zero = readout(binder, kPrefix, g.constant(Tensor::zeros({4})), cfg);
  CHECK(values(zero.value()) == std::vector<double>(4, 0.0));
  // Zero biases make the map positively homogeneous; doubling is exact.
  const Tensor h = Tensor::vector({0.3, -1.2, 0.8, 2.0});
  const Tensor h2 = Tensor::vector({0.6, -2.4, 1.6, 4.0});
  const auto once = values(readout(binder, kPrefix, g.constant(h), cfg).value());
  const auto twice = values(readout(binder, kPrefix, g.constant(h2), cfg).value());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == 2.0 * once[i]);
}

TEST_CASE("full encoder equals the composition of its stages") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_encoder(store, kPrefix, cfg, 13);
  const BranchInput in =
      fixtures::make_input(fixtures::make_scenario(21, 2), Modality::kTopdown);
  REQUIRE(in.num_agents() == 2);
  Graph g;
  ParamBinder binder(g, store);
  const Var c = encode_condition(binder, kPrefix, in, cfg);

  auto scaled = [&](std::size_t a) {
    std::vector<Vec2> out;
    for (int t = 0; t < in.tau; ++t) out.push_back((1.0 / 10.0) * in.coords[a][t]);
    return out;
  };
  const auto grid = extract_external_features(binder, kPrefix, in, cfg);
  const Var omega = row(gather_agent_features(
                            ExternalFeatureGrid{grid.grid, grid.spatial, grid.spatial,
                                                grid.spatial},
                            std::vector<int>{in.cells[0]}),
                        0);
  Var h = encode_target(binder, kPrefix, scaled(0), omega, cfg);
  const Var others = encode_others(binder, kPrefix, scaled(0), {scaled(1)}, cfg);
  const Var feats = gather_agent_features(grid, std::vector<int>{in.cells[1]});
  for (int r = 0; r < cfg.rounds; ++r) h = message_pass(binder, kPrefix, h, others, feats, cfg);
  CHECK(values(readout(binder, kPrefix, h, cfg).value()) == values(c.value()));
}

TEST_CASE("condition vector is invariant to neighbor relabeling") {
  const ModelConfig cfg = fixtures::small_config();
  std::mt19937_64 rng(14);
  for (int draw = 0; draw < 3; ++draw) {
    ParameterStore store;
    init_encoder(store, kPrefix, cfg, 100 + draw);
    const BranchInput in =
        fixtures::make_input(fixtures::make_scenario(30 + draw, 5), Modality::kTopdown);
    Graph g;
    ParamBinder binder(g, store);
    const auto base = values(encode_condition(binder, kPrefix, in, cfg).value());
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::size_t> perm(in.num_agents());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      BranchInput relabeled = in;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        relabeled.coords[i] = in.coords[perm[i]];
        relabeled.cells[i] = in.cells[perm[i]];
        if (perm[i] == in.target) relabeled.target = i;
      }
      Graph g2;
      ParamBinder b2(g2, store);
      CHECK(values(encode_condition(b2, kPrefix, relabeled, cfg).value()) == base);
    }
  }
}

TEST_CASE("toggles remove their parameters and inputs") {
  ModelConfig cfg = fixtures::small_config();
  ParameterStore full, no_env, no_soc;
  init_encoder(full, kPrefix, cfg, 1);
  cfg.use_env = false;
  init_encoder(no_env, kPrefix, cfg, 1);
  cfg.use_env = true;
  cfg.use_soc = false;
  init_encoder(no_soc, kPrefix, cfg, 1);
  CHECK(no_env.value_count() < full.value_count());
  CHECK(no_soc.value_count() < full.value_count());
  CHECK_FALSE(no_env.contains(kPrefix + ".env.spatial.l0.weight"));
  CHECK_FALSE(no_soc.contains(kPrefix + ".message.l0.weight"));
  // Shared parameters keep their names and values.
  CHECK(no_env.get(kPrefix + ".readout.l0.weight") == full.get(kPrefix + ".readout.l0.weight"));

  const BranchInput in = fixtures::make_input(fixtures::make_scenario(2, 3), Modality::kTopdown);
  Graph g;
  ParamBinder b(g, no_soc);
  cfg.use_soc = false;
  const Var c = encode_condition(b, kPrefix, in, cfg);
  Var h = encode_target(
      b, kPrefix,
      [&] {
        std::vector<Vec2> out;
        for (int t = 0; t < in.tau; ++t) out.push_back((1.0 / 10.0) * in.coords[0][t]);
        return out;
      }(),
      row(matmul(g.constant(selection_matrix(std::vector<int>{in.cells[0]}, 64)),
                 extract_external_features(b, kPrefix, in, cfg).spatial),
          0),
      cfg);
  CHECK(values(readout(b, kPrefix, h, cfg).value()) == values(c.value()));
}

TEST_CASE("condition gradients pass a finite-difference check") {
  for (Modality m : scenario::kAllModalities) {
    const ModelConfig cfg = fixtures::small_config();
    ParameterStore store;
    init_encoder(store, branch_prefix(m), cfg, 15);
    std::mt19937_64 rng(16);
    fixtures::jitter_biases(store, rng);
    const BranchInput in = fixtures::make_input(fixtures::make_scenario(40, 3), m);
    const Tensor weights = Tensor::vector({0.7, -1.1, 0.4, 0.9});
    const double err = fixtures::param_grad_check(store, [&](ParamBinder& b) {
      const Var c = encode_condition(b, branch_prefix(m), in, cfg);
      return sum(c * b.graph().constant(weights));
    });
    CHECK(err <= 1e-4);
  }
}
