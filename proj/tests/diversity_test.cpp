// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/model_fixtures.hpp"

using namespace xmodal;
using namespace xmodal::model;
using diff::Graph;
using diff::Tensor;
using scenario::Modality;

namespace {

Tensor random_predictions(std::mt19937_64& rng, std::size_t n, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> v(n * 20);
  for (double& x : v) x = u(rng);
  return Tensor({n, 20}, std::move(v));
}

double kernel_oracle(const Tensor& p, std::size_t i, std::size_t j, double unit, double sigma_sq) {
  double d = 0.0;
  for (std::size_t t = 0; t < 10; ++t) {
    const double dx = unit * (p.at(i, 2 * t) - p.at(j, 2 * t));
    const double dy = unit * (p.at(i, 2 * t + 1) - p.at(j, 2 * t + 1));
    d += dx * dx + dy * dy;
  }
  return std::exp(-(d / 10.0) / (2.0 * sigma_sq));
}

Tensor similarity(const Tensor& preds, Modality m = Modality::kTopdown,
                  DiversityConfig cfg = {}) {
  Graph g;
  return pairwise_similarity(g.constant(preds), m, cfg).value();
}

}  // namespace

TEST_CASE("kernel values") {
  std::vector<double> v(40, 0.0);
  for (std::size_t t = 0; t < 10; ++t) {
    v[2 * t] = v[20 + 2 * t] = 0.1 * t;
    v[2 * t + 1] = 3.0;
    v[20 + 2 * t + 1] = 3.0;
  }
  CHECK(similarity(Tensor({2, 20}, v)).at(0, 1) == 1.0);
  // Offset (1, 1) everywhere: D = 2 = 2 sigma_g^2.
  for (std::size_t t = 0; t < 10; ++t) {
    v[20 + 2 * t] = v[2 * t] + 1.0;
    v[20 + 2 * t + 1] = 4.0;
  }
  CHECK(similarity(Tensor({2, 20}, v)).at(0, 1) == std::exp(-1.0));
  // The same offset in tens of pixels on the frontal view.
  for (std::size_t t = 0; t < 10; ++t) {
    v[20 + 2 * t] = v[2 * t] + 10.0;
    v[20 + 2 * t + 1] = 13.0;
  }
  CHECK(similarity(Tensor({2, 20}, v), Modality::kFrontal).at(0, 1) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(similarity(Tensor::zeros({1, 20})), std::invalid_argument);
}

TEST_CASE("kernel matrix matches a double loop and keeps its invariants") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor p = random_predictions(rng, 4);
    DiversityConfig cfg;
    cfg.sigma_g_sq = 0.5 + trial * 0.1;
    for (Modality m : scenario::kAllModalities) {
      const Tensor k = similarity(p, m, cfg);
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(k.at(i, i) == 1.0);
        for (std::size_t j = 0; j < 4; ++j) {
          CHECK(std::abs(k.at(i, j) - kernel_oracle(p, i, j, loss_unit(m), cfg.sigma_g_sq)) <=
                1e-12);
          CHECK(k.at(i, j) == k.at(j, i));
          CHECK(k.at(i, j) > 0.0);
          CHECK(k.at(i, j) <= 1.0);
        }
      }
    }
  }
}

TEST_CASE("spreading predictions apart lowers every kernel entry") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor p = random_predictions(rng, 5, 0.6);
    std::vector<double> wide(p.values().begin(), p.values().end());
    for (double& x : wide) x *= 1.5;
    const Tensor a = similarity(p);
    const Tensor b = similarity(Tensor(p.shape(), wide));
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        if (i != j) CHECK(b.at(i, j) < a.at(i, j));
    Graph g;
    CHECK(k_max(g.constant(b)).value().item() <= k_max(g.constant(a)).value().item());
  }
}

TEST_CASE("maximum similarity") {
  Graph g;
  CHECK(k_max(g.constant(similarity(Tensor::zeros({6, 20})))).value().item() == 1.0);

  std::mt19937_64 rng(3);
  Tensor far = random_predictions(rng, 5, 40.0);
  std::vector<double> v(far.values().begin(), far.values().end());
  std::copy(v.begin() + 20, v.begin() + 40, v.begin() + 60);  // row 3 := row 1
  const Tensor sim = similarity(Tensor(far.shape(), v));
  CHECK(k_max_pair(sim) == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(k_max(g.constant(sim)).value().item() == 1.0);

  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(36);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = i; j < 6; ++j) m[i * 6 + j] = m[j * 6 + i] = i == j ? 1.0 : u(rng);
    }
    double best = -1.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) best = std::max(best, m[i * 6 + j]);
    CHECK(k_max(g.constant(Tensor({6, 6}, m))).value().item() == best);
  }

  // Ties go to the first pair in row-major order.
  std::vector<double> tie(16, 0.5);
  for (std::size_t i = 0; i < 4; ++i) tie[i * 5] = 1.0;
  CHECK(k_max_pair(Tensor({4, 4}, tie)) == std::pair<std::size_t, std::size_t>{0, 1});
}

TEST_CASE("smooth maximum approaches the hard maximum") {
  std::mt19937_64 rng(4);
  const Tensor sim = similarity(random_predictions(rng, 6, 1.0));
  Graph g;
  const double hard = k_max(g.constant(sim)).value().item();
  const double soft = k_max_smooth(g.constant(sim), 1e-4).value().item();
  CHECK(soft >= hard);
  CHECK(soft - hard <= 1e-3);
}

TEST_CASE("total objective") {
  Graph g;
  const Var elbo = g.scalar(3.75);
  const std::vector<Var> ks = {g.scalar(0.5), g.scalar(0.3)};
  CHECK(total_loss(elbo, ks, 0.0).value().item() == 3.75);
  CHECK(total_loss(elbo, ks, 10.0).value().item() == doctest::Approx(11.75).epsilon(1e-15));
  // Affine in each term with slope lambda.
  const std::vector<Var> bumped = {g.scalar(0.75), g.scalar(0.3)};
  CHECK(total_loss(elbo, bumped, 10.0).value().item() -
            total_loss(elbo, ks, 10.0).value().item() ==
        doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS(total_loss(elbo, ks, -1.0));
}

TEST_CASE("kernel penalty gradients reach the predictions") {
  std::mt19937_64 rng(5);
  const Tensor p = random_predictions(rng, 4, 0.8);
  const diff::GraphBuilder f = [](Graph&, std::span<const diff::Var> in) {
    const Var sim = pairwise_similarity(in[0], Modality::kTopdown, {});
    const std::vector<Var> ks = {k_max(sim)};
    return total_loss(sum(square(in[0])), ks, 10.0);
  };
  CHECK(diff::grad_check(f, std::vector<Tensor>{p}) <= 1e-6);

  Graph g;
  const Var preds = g.parameter("preds", p);
  const diff::Gradients grads = g.backward(k_max(pairwise_similarity(preds, Modality::kTopdown, {})));
  double norm = 0.0;
  for (double x : grads["preds"].values()) norm += x * x;
  CHECK(norm > 0.0);
}

TEST_CASE("collapsed decoder gives unit maximum similarity") {
  const ModelConfig cfg = fixtures::small_config();
  ParameterStore store;
  init_branch(store, Modality::kTopdown, cfg, 6);
  const std::string w = branch_prefix(Modality::kTopdown) + ".decoder.l0.weight";
  const Tensor old = store.get(w);
  std::vector<double> v(old.values().begin(), old.values().end());
  std::fill(v.begin(), v.begin() + cfg.latent_dim * old.dim(1), 0.0);
  store.set(w, Tensor(old.shape(), std::move(v)));
  const BranchInput in = fixtures::make_input(fixtures::make_scenario(7), Modality::kTopdown);
  std::mt19937_64 rng(7);
  const Tensor noise = standard_normal(rng, 10, cfg.latent_dim);
  Graph g;
  ParamBinder binder(g, store);
  const TrainingLoss loss = training_loss(binder, std::span(&in, 1), cfg, {}, std::span(&noise, 1));
  REQUIRE(loss.k_max.size() == 1);
  CHECK(loss.k_max[0].value().item() == 1.0);
  CHECK(loss.total.value().item() == loss.joint.total.value().item() + 10.0);
}
