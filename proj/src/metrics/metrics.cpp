// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/metrics/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xmodal::metrics {

using nlohmann::json;

namespace {

void check_lengths(std::span<const Vec2> pred, std::span<const Vec2> truth, std::size_t step) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("prediction has " + std::to_string(pred.size()) +
                                " steps, ground truth " + std::to_string(truth.size()));
  }
  if (step < 1 || step > truth.size()) {
    throw std::invalid_argument("horizon step " + std::to_string(step) + " outside 1.." +
                                std::to_string(truth.size()));
  }
}

std::string horizon_key(double seconds) { return format_double(seconds) + "s"; }

}  // namespace

double ade(std::span<const Vec2> pred, std::span<const Vec2> truth, std::size_t horizon_step) {
  check_lengths(pred, truth, horizon_step);
  double total = 0.0;
  for (std::size_t t = 0; t < horizon_step; ++t) total += norm(pred[t] - truth[t]);
  return total / static_cast<double>(horizon_step);
}

double fde(std::span<const Vec2> pred, std::span<const Vec2> truth, std::size_t step) {
  check_lengths(pred, truth, step);
  return norm(pred[step - 1] - truth[step - 1]);
}

std::size_t select_best(std::span<const Trajectory> preds, std::span<const Vec2> truth) {
  if (preds.empty()) throw std::invalid_argument("no predictions to select from");
  std::size_t best = 0;
  double best_ade = ade(preds[0], truth, truth.size());
  for (std::size_t i = 1; i < preds.size(); ++i) {
    const double a = ade(preds[i], truth, truth.size());
    if (a < best_ade) {
      best = i;
      best_ade = a;
    }
  }
  return best;
}

double success_rate(std::span<const double> errors, double eps) {
  if (errors.empty()) throw std::invalid_argument("success rate of an empty set");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be non-negative");
  std::size_t hits = 0;
  for (double e : errors) hits += e <= eps ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

SrCurve sr_curve(std::span<const double> errors, std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i - 1] < grid[i])) throw std::invalid_argument("eps grid must ascend");
  }
  SrCurve curve;
  for (double eps : grid) curve.points.emplace_back(eps, success_rate(errors, eps));
  return curve;
}

std::size_t horizon_step(double seconds, double dt) {
  if (!(seconds > 0.0) || !(dt > 0.0)) throw std::invalid_argument("horizon and dt must be positive");
  return static_cast<std::size_t>(std::floor(seconds / dt + 0.5));
}

std::vector<double> default_eps_grid(scenario::Modality m) {
  std::vector<double> grid;
  if (m == scenario::Modality::kTopdown) {
    for (int i = 0; i <= 50; ++i) grid.push_back(i / 10.0);
  } else {
    for (int i = 0; i <= 50; ++i) grid.push_back(2.0 * i);
  }
  return grid;
}

std::string units_of(scenario::Modality m) {
  return m == scenario::Modality::kTopdown ? "m" : "px";
}

ReportBuilder::ReportBuilder(scenario::Modality m, double dt, std::size_t n_samples,
                             std::uint64_t seed, std::vector<double> horizons_s)
    : modality_(m), n_samples_(n_samples), seed_(seed), seconds_(std::move(horizons_s)) {
  for (double h : seconds_) steps_.push_back(horizon_step(h, dt));
  ade_sum_.assign(steps_.size(), 0.0);
  fde_sum_.assign(steps_.size(), 0.0);
}

std::size_t ReportBuilder::add(std::span<const Trajectory> preds, std::span<const Vec2> truth) {
  const std::size_t best = select_best(preds, truth);
  const Trajectory& p = preds[best];
  for (std::size_t h = 0; h < steps_.size(); ++h) {
    ade_sum_[h] += ade(p, truth, steps_[h]);
    fde_sum_[h] += fde(p, truth, steps_[h]);
  }
  endpoint_.push_back(fde(p, truth, truth.size()));
  return best;
}

MetricReport ReportBuilder::finish(std::span<const double> eps_grid) const {
  if (endpoint_.empty()) throw std::invalid_argument("report over zero scenarios");
  MetricReport r;
  r.modality = std::string(scenario::modality_name(modality_));
  r.units = units_of(modality_);
  const double n = static_cast<double>(endpoint_.size());
  for (std::size_t h = 0; h < steps_.size(); ++h) {
    r.horizons.push_back({seconds_[h], steps_[h], ade_sum_[h] / n, fde_sum_[h] / n});
  }
  r.sr = sr_curve(endpoint_, eps_grid);
  r.n_samples = n_samples_;
  r.n_scenarios = endpoint_.size();
  r.seed = seed_;
  return r;
}

MetricReport ReportBuilder::finish() const { return finish(default_eps_grid(modality_)); }

std::string report_to_json(const MetricReport& r) {
  json horizons = json::object();
  for (const auto& h : r.horizons) {
    horizons[horizon_key(h.seconds)] = {
        {"seconds", h.seconds}, {"step", h.step}, {"ade", h.ade}, {"fde", h.fde}};
  }
  json sr = json::array();
  for (const auto& [eps, frac] : r.sr.points) sr.push_back({eps, frac});
  const json doc = {{"modality", r.modality}, {"units", r.units},
                    {"horizons", horizons},   {"sr_curve", sr},
                    {"n_samples", r.n_samples}, {"n_scenarios", r.n_scenarios},
                    {"seed", r.seed}};
  return doc.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    MetricReport r;
    r.modality = doc.at("modality").get<std::string>();
    r.units = doc.at("units").get<std::string>();
    for (const auto& [key, h] : doc.at("horizons").items()) {
      r.horizons.push_back({h.at("seconds").get<double>(), h.at("step").get<std::size_t>(),
                            h.at("ade").get<double>(), h.at("fde").get<double>()});
    }
    std::sort(r.horizons.begin(), r.horizons.end(),
              [](const HorizonMetrics& a, const HorizonMetrics& b) { return a.seconds < b.seconds; });
    for (const auto& p : doc.at("sr_curve")) {
      r.sr.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    r.n_samples = doc.at("n_samples").get<std::size_t>();
    r.n_scenarios = doc.at("n_scenarios").get<std::size_t>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed metric report: ") + e.what());
  }
}

void save_report(const MetricReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report_to_json(r);
}

MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_sr_csv(std::ostream& out, const SrCurve& curve) {
  out << "eps,success_rate\n";
  for (const auto& [eps, frac] : curve.points) {
    out << format_double(eps) << ',' << format_double(frac) << '\n';
  }
}

SrCurve read_sr_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "eps,success_rate") {
    throw std::runtime_error("SR csv: missing header 'eps,success_rate'");
  }
  SrCurve curve;
  std::size_t line_no = 1;
  auto parse = [&](std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw std::runtime_error("SR csv line " + std::to_string(line_no) + ": bad number '" +
                               std::string(s) + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("SR csv line " + std::to_string(line_no) + ": expected two columns");
    }
    const std::string_view view(line);
    curve.points.emplace_back(parse(view.substr(0, comma)), parse(view.substr(comma + 1)));
  }
  return curve;
}

}  // namespace xmodal::metrics
