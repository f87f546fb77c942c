// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/scenario/view.hpp"

namespace xmodal::metrics {

using scenario::Vec2;
using Trajectory = std::vector<Vec2>;

/// Mean pointwise L2 distance over steps 1..horizon_step.
double ade(std::span<const Vec2> pred, std::span<const Vec2> truth, std::size_t horizon_step);
/// L2 distance at `step` (1-based).
double fde(std::span<const Vec2> pred, std::span<const Vec2> truth, std::size_t step);

/// Index of the prediction with the lowest full-horizon ADE; lowest index on ties.
std::size_t select_best(std::span<const Trajectory> preds, std::span<const Vec2> truth);

/// Fraction of errors <= eps. Rejects empty input and negative eps.
double success_rate(std::span<const double> errors, double eps);

struct SrCurve {
  std::vector<std::pair<double, double>> points;  // (eps, fraction)
  friend bool operator==(const SrCurve&, const SrCurve&) = default;
};

/// `grid` must be ascending.
SrCurve sr_curve(std::span<const double> errors, std::span<const double> grid);

/// round-half-up(seconds / dt)
std::size_t horizon_step(double seconds, double dt);

/// 0 to 5 m in 0.1 m steps top-down; 0 to 100 px in 2 px steps frontal.
std::vector<double> default_eps_grid(scenario::Modality m);

/// "m" or "px".
std::string units_of(scenario::Modality m);

struct HorizonMetrics {
  double seconds = 0.0;
  std::size_t step = 0;
  double ade = 0.0;
  double fde = 0.0;
  friend bool operator==(const HorizonMetrics&, const HorizonMetrics&) = default;
};

struct MetricReport {
  std::string modality;
  std::string units;
  std::vector<HorizonMetrics> horizons;
  SrCurve sr;
  std::size_t n_samples = 0;
  std::size_t n_scenarios = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Accumulates best-of-N results scenario by scenario.
class ReportBuilder {
 public:
  ReportBuilder(scenario::Modality m, double dt, std::size_t n_samples, std::uint64_t seed,
                std::vector<double> horizons_s = {1.0, 2.0, 3.0, 4.0});

  /// Selects the best prediction against `truth` and records its errors.
  /// Returns the selected index.
  std::size_t add(std::span<const Trajectory> preds, std::span<const Vec2> truth);

  /// Throws if nothing was added.
  MetricReport finish(std::span<const double> eps_grid) const;
  MetricReport finish() const;

  /// Full-horizon endpoint error of each scenario's selected prediction.
  const std::vector<double>& endpoint_errors() const { return endpoint_; }

 private:
  scenario::Modality modality_;
  std::size_t n_samples_;
  std::uint64_t seed_;
  std::vector<double> seconds_;
  std::vector<std::size_t> steps_;
  std::vector<double> ade_sum_;
  std::vector<double> fde_sum_;
  std::vector<double> endpoint_;
};

std::string report_to_json(const MetricReport& r);
MetricReport report_from_json(const std::string& text);
void save_report(const MetricReport& r, const std::filesystem::path& path);
MetricReport load_report(const std::filesystem::path& path);

/// Two columns, "eps,success_rate", shortest round-trip decimals.
void write_sr_csv(std::ostream& out, const SrCurve& curve);
SrCurve read_sr_csv(std::istream& in);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace xmodal::metrics
