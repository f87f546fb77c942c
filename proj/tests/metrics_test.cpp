// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "support/metric_oracles.hpp"

using namespace xmodal;
using namespace xmodal::metrics;
using scenario::Modality;

namespace {

Trajectory shifted(const Trajectory& t, Vec2 v) {
  Trajectory out = t;
  for (auto& p : out) p = p + v;
  return out;
}

}  // namespace

TEST_CASE("ade") {
  std::mt19937_64 rng(1);
  const Trajectory gt = oracle::random_trajectory(rng);
  for (std::size_t h = 1; h <= 10; ++h) CHECK(ade(gt, gt, h) == 0.0);
  const Trajectory off = shifted(gt, {3.0, 4.0});
  for (std::size_t h = 1; h <= 10; ++h) CHECK(ade(off, gt, h) == doctest::Approx(5.0).epsilon(1e-14));
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory a = oracle::random_trajectory(rng);
    const Trajectory b = oracle::random_trajectory(rng);
    for (std::size_t h = 1; h <= 10; ++h) {
      CHECK(std::abs(ade(a, b, h) - oracle::ade(a, b, h)) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(ade(Trajectory(9), gt, 5), std::invalid_argument);
  CHECK_THROWS_AS(ade(gt, gt, 11), std::invalid_argument);
  CHECK_THROWS_AS(ade(gt, gt, 0), std::invalid_argument);
}

TEST_CASE("fde") {
  std::mt19937_64 rng(2);
  const Trajectory gt = oracle::random_trajectory(rng);
  CHECK(fde(gt, gt, 10) == 0.0);
  Trajectory last = gt;
  last.back() = last.back() + Vec2{0.0, 2.0};
  CHECK(fde(last, gt, horizon_step(4.0, 0.4)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fde(last, gt, 8) == 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory a = oracle::random_trajectory(rng);
    const Trajectory b = oracle::random_trajectory(rng);
    for (std::size_t s = 1; s <= 10; ++s) CHECK(std::abs(fde(a, b, s) - oracle::fde(a, b, s)) <= 1e-12);
  }
  CHECK_THROWS_AS(fde(gt, Trajectory(3), 2), std::invalid_argument);
  CHECK_THROWS_AS(fde(gt, gt, 11), std::invalid_argument);
}

TEST_CASE("select_best") {
  std::mt19937_64 rng(3);
  const Trajectory gt = oracle::random_trajectory(rng);
  std::vector<Trajectory> one{oracle::random_trajectory(rng)};
  CHECK(select_best(one, gt) == 0);
  std::vector<Trajectory> set;
  for (int i = 0; i < 7; ++i) set.push_back(oracle::random_trajectory(rng));
  set[4] = gt;
  CHECK(select_best(set, gt) == 4);
  set[2] = gt;
  CHECK(select_best(set, gt) == 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Trajectory> preds;
    for (int i = 0; i < 20; ++i) preds.push_back(oracle::random_trajectory(rng));
    CHECK(select_best(preds, gt) == oracle::argmin_ade(preds, gt));
  }
  CHECK_THROWS(select_best({}, gt));
}

TEST_CASE("success rate") {
  const std::vector<double> errors{0.5, 1.0, 2.0};
  CHECK(success_rate(errors, 1.5) == 2.0 / 3.0);
  CHECK(success_rate(errors, 0.0) == 0.0);
  CHECK(success_rate(errors, 1.0) == 2.0 / 3.0);
  CHECK(success_rate(errors, 2.0) == 1.0);
  CHECK_THROWS_AS(success_rate({}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(success_rate(errors, -0.1), std::invalid_argument);
}

TEST_CASE("sr curve") {
  const std::vector<double> single{1.0};
  const std::vector<double> grid{0.5, 1.5};
  const SrCurve c = sr_curve(single, grid);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].second == 0.0);
  CHECK(c.points[1].second == 1.0);
  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(sr_curve(single, bad), std::invalid_argument);

  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(0.8);
  std::vector<double> errors(1000);
  for (double& x : errors) x = e(rng);
  const auto eps = default_eps_grid(Modality::kTopdown);
  const SrCurve curve = sr_curve(errors, eps);
  double prev = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    CHECK(curve.points[k].first == eps[k]);
    CHECK(curve.points[k].second == static_cast<double>(oracle::count_within(errors, eps[k])) / 1000.0);
    CHECK(curve.points[k].second >= prev);
    prev = curve.points[k].second;
  }
  const double max_err = *std::max_element(errors.begin(), errors.end());
  CHECK(success_rate(errors, max_err) == 1.0);
  CHECK(success_rate(errors, max_err + 1.0) == 1.0);
}

TEST_CASE("horizons and grids") {
  CHECK(horizon_step(1.0, 0.4) == 3);
  CHECK(horizon_step(2.0, 0.4) == 5);
  CHECK(horizon_step(3.0, 0.4) == 8);
  CHECK(horizon_step(4.0, 0.4) == 10);
  CHECK(horizon_step(0.2, 0.4) == 1);
  const auto top = default_eps_grid(Modality::kTopdown);
  CHECK(top.size() == 51);
  CHECK(top.front() == 0.0);
  CHECK(top.back() == 5.0);
  CHECK(top[15] == 1.5);
  const auto front = default_eps_grid(Modality::kFrontal);
  CHECK(front.back() == 100.0);
  CHECK(units_of(Modality::kTopdown) == "m");
  CHECK(units_of(Modality::kFrontal) == "px");
}

TEST_CASE("nested best-of-N is non-increasing") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Trajectory gt = oracle::random_trajectory(rng);
    std::vector<Trajectory> preds;
    double prev = 1e300;
    for (int n = 1; n <= 20; ++n) {
      preds.push_back(oracle::random_trajectory(rng));
      const double best = ade(preds[select_best(preds, gt)], gt, 10);
      CHECK(best <= prev);
      prev = best;
    }
  }
}

TEST_CASE("report builder") {
  std::mt19937_64 rng(6);
  ReportBuilder builder(Modality::kTopdown, 0.4, 3, 42);
  std::vector<double> ade4, fde1, ends;
  for (int s = 0; s < 30; ++s) {
    const Trajectory gt = oracle::random_trajectory(rng);
    std::vector<Trajectory> preds;
    for (int i = 0; i < 3; ++i) preds.push_back(oracle::random_trajectory(rng));
    const std::size_t best = builder.add(preds, gt);
    CHECK(best == oracle::argmin_ade(preds, gt));
    ade4.push_back(oracle::ade(preds[best], gt, 10));
    fde1.push_back(oracle::fde(preds[best], gt, 3));
    ends.push_back(oracle::fde(preds[best], gt, 10));
  }
  const MetricReport r = builder.finish();
  CHECK(r.units == "m");
  CHECK(r.modality == "topdown");
  CHECK(r.n_samples == 3);
  CHECK(r.n_scenarios == 30);
  REQUIRE(r.horizons.size() == 4);
  CHECK(r.horizons[0].step == 3);
  CHECK(r.horizons[3].step == 10);
  double a = 0.0, f = 0.0;
  for (int s = 0; s < 30; ++s) {
    a += ade4[s];
    f += fde1[s];
  }
  CHECK(std::abs(r.horizons[3].ade - a / 30.0) <= 1e-9);
  CHECK(std::abs(r.horizons[0].fde - f / 30.0) <= 1e-9);
  CHECK(builder.endpoint_errors() == ends);
  for (const auto& h : r.horizons) CHECK(h.ade >= 0.0);
  for (const auto& [eps, frac] : r.sr.points) {
    CHECK(frac == static_cast<double>(oracle::count_within(ends, eps)) / 30.0);
  }
  CHECK_THROWS(ReportBuilder(Modality::kFrontal, 0.4, 1, 0).finish());
}

TEST_CASE("report file round trip") {
  std::mt19937_64 rng(7);
  ReportBuilder builder(Modality::kFrontal, 0.4, 20, 9);
  for (int s = 0; s < 10; ++s) {
    const Trajectory gt = oracle::random_trajectory(rng, 10, 300.0);
    std::vector<Trajectory> preds;
    for (int i = 0; i < 20; ++i) preds.push_back(oracle::random_trajectory(rng, 10, 300.0));
    builder.add(preds, gt);
  }
  const MetricReport r = builder.finish();
  CHECK(r.units == "px");
  CHECK(report_from_json(report_to_json(r)) == r);
  const auto path = std::filesystem::temp_directory_path() / "xmodal_metrics_report.json";
  save_report(r, path);
  CHECK(load_report(path) == r);
  std::filesystem::remove(path);
  CHECK_THROWS(report_from_json("{\"units\":\"m\"}"));
}

TEST_CASE("sr csv round trip") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> errors(37);
  for (double& x : errors) x = u(rng);
  const auto grid = default_eps_grid(Modality::kTopdown);
  const SrCurve curve = sr_curve(errors, grid);
  std::stringstream buf;
  write_sr_csv(buf, curve);
  CHECK(buf.str().rfind("eps,success_rate\n", 0) == 0);
  CHECK(read_sr_csv(buf) == curve);
  std::stringstream junk("eps,success_rate\n0.1,abc\n");
  CHECK_THROWS(read_sr_csv(junk));
  std::stringstream nohead("0.1,0.2\n");
  CHECK_THROWS(read_sr_csv(nohead));
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
