// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/cli/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "xmodal/diff/optim.hpp"
#include "xmodal/model/diversity.hpp"
#include "xmodal/scenario/io.hpp"

namespace xmodal::cli {

using diff::Gradients;
using diff::Graph;
using diff::ParamBinder;
using diff::ParameterStore;
using diff::Tensor;
using nlohmann::json;
using scenario::Modality;
using scenario::Scenario;

namespace {

/// Atomic as far as the filesystem allows: write, then rename over.
void write_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::size_t worker_count(const RunConfig& cfg) {
  if (!cfg.parallel) return 1;
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end, worker) over contiguous chunks of [0, n).
template <typename Body>
void for_chunks(std::size_t n, std::size_t workers, Body body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end, w] {
      try {
        body(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json stats_json(const std::vector<BranchStats>& branches) {
  json out = json::object();
  for (const auto& b : branches) out[b.modality] = {{"kl", b.kl}, {"recon", b.recon}, {"k_max", b.k_max}};
  return out;
}

struct SampleTerms {
  double total = 0.0;
  std::vector<BranchStats> branches;
};

std::vector<Scenario> load_or_generate(const RunConfig& cfg, const std::string& path,
                                       std::size_t count, bool test_split) {
  if (!path.empty()) return scenario::load_scenarios(path);
  return generate_corpus(cfg, count, test_split);
}

}  // namespace

std::vector<Scenario> generate_corpus(const RunConfig& cfg, std::size_t count, bool test_split) {
  const scenario::GenConfig gen = gen_config(cfg);
  const std::uint64_t base = (cfg.data_seed << 32) + (test_split ? (1ull << 31) : 0ull);
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(scenario::generate_scenario(gen, base + i));
  return out;
}

std::vector<Scenario> train_corpus(const RunConfig& cfg) {
  return load_or_generate(cfg, cfg.train_path, cfg.train_scenarios, false);
}

std::vector<Scenario> test_corpus(const RunConfig& cfg) {
  return load_or_generate(cfg, cfg.test_path, cfg.test_scenarios, true);
}

json train_log_to_json(const TrainLog& log) {
  json steps = json::array();
  for (const auto& s : log.steps) {
    steps.push_back({{"epoch", s.epoch}, {"step", s.step}, {"total", s.total},
                     {"branches", stats_json(s.branches)}});
  }
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"total", e.total},
                      {"branches", stats_json(e.branches)}, {"seconds", e.seconds}});
  }
  return {{"steps", steps}, {"epochs", epochs}};
}

ParameterStore init_parameters(const RunConfig& cfg) {
  const model::ModelConfig mc = model_config(cfg);
  ParameterStore store;
  for (Modality m : trained_modalities(cfg)) model::init_branch(store, m, mc, cfg.seed);
  return store;
}

TrainResult train(const RunConfig& cfg, std::span<const Scenario> scenarios,
                  const std::filesystem::path& run_dir, const TrainHooks& hooks) {
  validate(cfg);
  if (scenarios.empty()) throw ConfigError("training set is empty");
  const model::ModelConfig mc = model_config(cfg);
  const model::DiversityConfig div = diversity_config(cfg);
  const std::vector<Modality> mods = trained_modalities(cfg);
  const std::size_t n_mods = mods.size();

  // inputs[i * n_mods + b]: scenario i, branch b
  std::vector<model::BranchInput> inputs;
  inputs.reserve(scenarios.size() * n_mods);
  for (const Scenario& s : scenarios) {
    for (Modality m : mods) inputs.push_back(model::prepare_input(scenario::render_view(s, m), cfg.grid));
  }

  TrainResult result;
  result.params = init_parameters(cfg);
  diff::AdamState adam;
  adam.config.learning_rate = cfg.lr;

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    write_file(run_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  }

  // Independent streams: batch order, and one latent-noise stream per
  // modality, so adding a branch leaves the others' draws unchanged.
  std::mt19937_64 shuffle_rng(model::parameter_seed("stream.shuffle", cfg.seed));
  std::vector<std::mt19937_64> noise_rng;
  for (Modality m : mods) {
    noise_rng.emplace_back(
        model::parameter_seed("stream.noise." + std::string(scenario::modality_name(m)), cfg.seed));
  }

  const std::size_t workers = worker_count(cfg);
  std::vector<std::size_t> order(scenarios.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord epoch_rec;
    epoch_rec.epoch = epoch;
    epoch_rec.branches.resize(n_mods);
    for (std::size_t b = 0; b < n_mods; ++b) {
      epoch_rec.branches[b].modality = std::string(scenario::modality_name(mods[b]));
    }

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      ++step;
      // Noise is drawn serially in sample order, whatever the worker count.
      std::vector<Tensor> noises;
      noises.reserve(count * n_mods);
      for (std::size_t k = 0; k < count; ++k) {
        for (std::size_t b = 0; b < n_mods; ++b) {
          noises.push_back(model::standard_normal(noise_rng[b], cfg.n_train, cfg.latent_dim));
        }
      }

      std::vector<SampleTerms> terms(count);
      std::vector<Gradients> partial(std::min(workers, count));
      const double weight = 1.0 / static_cast<double>(count);
      const std::string where = "step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + ")";
      try {
        for_chunks(count, workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
          for (std::size_t k = begin; k < end; ++k) {
            Graph g;
            ParamBinder binder(g, result.params);
            const std::size_t i = order[start + k];
            const auto loss = model::training_loss(
                binder, std::span(inputs).subspan(i * n_mods, n_mods), mc, div,
                std::span<const Tensor>(noises).subspan(k * n_mods, n_mods));
            SampleTerms& t = terms[k];
            t.total = loss.total.value().item();
            for (std::size_t b = 0; b < n_mods; ++b) {
              BranchStats st;
              st.kl = loss.joint.branches[b].elbo.kl.value().item();
              st.recon = loss.joint.branches[b].elbo.recon.value().item();
              st.k_max = b < loss.k_max.size() ? loss.k_max[b].value().item() : 0.0;
              t.branches.push_back(st);
            }
            partial[w].accumulate(g.backward(loss.total), weight);
          }
        });
      } catch (const diff::NumericalError& e) {
        throw DivergenceError(step, "loss diverged at " + where + ": " + e.what());
      }

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.branches.resize(n_mods);
      for (std::size_t b = 0; b < n_mods; ++b) rec.branches[b].modality = epoch_rec.branches[b].modality;
      for (const SampleTerms& t : terms) {
        rec.total += t.total * weight;
        epoch_rec.total += t.total;
        for (std::size_t b = 0; b < n_mods; ++b) {
          rec.branches[b].kl += t.branches[b].kl * weight;
          rec.branches[b].recon += t.branches[b].recon * weight;
          rec.branches[b].k_max += t.branches[b].k_max * weight;
          epoch_rec.branches[b].kl += t.branches[b].kl;
          epoch_rec.branches[b].recon += t.branches[b].recon;
          epoch_rec.branches[b].k_max += t.branches[b].k_max;
        }
      }
      Gradients grads = std::move(partial[0]);
      for (std::size_t w = 1; w < partial.size(); ++w) grads.accumulate(partial[w]);
      try {
        diff::adam_step(result.params, grads, adam);
      } catch (const diff::NumericalError& e) {
        throw DivergenceError(step, "update diverged at " + where + ": " + e.what());
      }
      result.log.steps.push_back(rec);
      if (hooks.after_step) hooks.after_step(rec, result.params);
    }

    const double n = static_cast<double>(order.size());
    epoch_rec.total /= n;
    for (auto& b : epoch_rec.branches) {
      b.kl /= n;
      b.recon /= n;
      b.k_max /= n;
    }
    epoch_rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(epoch_rec);
    if (!run_dir.empty()) {
      write_file(run_dir / "checkpoint.json", diff::checkpoint_to_json(result.params));
      write_file(run_dir / "train_log.json", train_log_to_json(result.log).dump(1) + "\n");
    }
    if (hooks.after_epoch) hooks.after_epoch(epoch_rec);
  }
  return result;
}

std::vector<Modality> modalities_in(const ParameterStore& params) {
  std::vector<Modality> out;
  for (Modality m : scenario::kAllModalities) {
    const std::string prefix = model::branch_prefix(m) + ".";
    const auto it = params.entries().lower_bound(prefix);
    if (it != params.entries().end() && it->first.compare(0, prefix.size(), prefix) == 0) {
      out.push_back(m);
    }
  }
  return out;
}

EvalResult evaluate(const ParameterStore& params, const RunConfig& cfg,
                    std::span<const Scenario> scenarios, Modality m, std::size_t n) {
  validate(cfg);
  const auto trained = modalities_in(params);
  if (std::find(trained.begin(), trained.end(), m) == trained.end()) {
    throw ConfigError("modality '" + std::string(scenario::modality_name(m)) +
                      "' has no trained branch in this checkpoint");
  }
  if (scenarios.empty()) throw ConfigError("evaluation set is empty");
  if (n < 1) throw ConfigError("n_eval must be at least 1");
  const model::ModelConfig mc = model_config(cfg);

  struct PerScenario {
    std::vector<metrics::Trajectory> preds;
    metrics::Trajectory truth;
    double spread = 0.0;
  };
  std::vector<PerScenario> per(scenarios.size());
  const std::size_t workers = worker_count(cfg);
  std::vector<diff::AccessMonitor> monitors(std::min(workers, scenarios.size()));
  for_chunks(scenarios.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
    for (std::size_t i = begin; i < end; ++i) {
      // Only the evaluated modality is ever rendered.
      const model::BranchInput input = model::prepare_input(scenario::render_view(scenarios[i], m), cfg.grid);
      Graph g;
      ParamBinder binder(g, params, &monitors[w]);
      std::mt19937_64 rng(model::parameter_seed("stream.eval." + std::to_string(i), cfg.seed));
      model::PredictionSet set = model::sample_predictions(binder, input, mc, n, rng);
      PerScenario& out = per[i];
      out.preds = std::move(set.trajectories);
      const auto& track = input.coords[input.target];
      out.truth.assign(track.begin() + input.tau, track.begin() + input.tau + input.delta);
      if (n >= 2) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = a + 1; b < n; ++b) sum += scenario::norm(out.preds[a].back() - out.preds[b].back());
        }
        out.spread = sum / static_cast<double>(n * (n - 1) / 2);
      }
    }
  });

  EvalResult result;
  metrics::ReportBuilder builder(m, cfg.dt, n, cfg.seed);
  double spread = 0.0;
  for (const auto& p : per) {
    builder.add(p.preds, p.truth);
    spread += p.spread;
  }
  result.report = builder.finish();
  result.endpoint_spread = spread / static_cast<double>(per.size());
  for (const auto& mon : monitors) result.access.merge(mon);
  return result;
}

std::vector<AblationRow> ablate(const RunConfig& base, std::span<const Scenario> train_set,
                                std::span<const Scenario> test_set,
                                const std::function<void(const std::string&)>& progress) {
  validate(base);
  const std::string primary = base.eval_modality;
  std::string partner = primary == "topdown" ? "frontal" : "topdown";
  for (const auto& m : base.modalities) {
    if (m != primary) {
      partner = m;
      break;
    }
  }
  struct Toggle {
    const char* name;
    bool env, soc, emb;
  };
  const Toggle grid[] = {{"-Env-Soc", false, false, false},
                         {"+Env-Soc", true, false, false},
                         {"-Env+Soc", false, true, false},
                         {"+Env+Soc", true, true, false},
                         {"+Env+Soc+Emb", true, true, true}};
  const Modality m = scenario::modality_from_name(primary);
  std::vector<AblationRow> rows;
  for (const Toggle& t : grid) {
    RunConfig cfg = base;
    cfg.use_env = t.env;
    cfg.use_soc = t.soc;
    cfg.use_mul = t.emb;
    cfg.modalities = t.emb ? std::vector<std::string>{primary, partner}
                           : std::vector<std::string>{primary};
    AblationRow row;
    row.name = t.name;
    row.env = t.env;
    row.soc = t.soc;
    row.emb = t.emb;
    row.parameter_count = init_parameters(cfg).value_count();
    for (std::size_t r = 0; r < base.repeats; ++r) {
      cfg.seed = base.seed + r;
      if (progress) progress(row.name + " seed " + std::to_string(cfg.seed));
      const TrainResult trained = train(cfg, train_set);
      const EvalResult eval = evaluate(trained.params, cfg, test_set, m, cfg.n_eval);
      if (row.mean.empty()) {
        row.mean = eval.report.horizons;
        for (auto& h : row.mean) h.ade = h.fde = 0.0;
      }
      for (std::size_t h = 0; h < row.mean.size(); ++h) {
        row.mean[h].ade += eval.report.horizons[h].ade / static_cast<double>(base.repeats);
        row.mean[h].fde += eval.report.horizons[h].fde / static_cast<double>(base.repeats);
      }
      row.ade_4s.push_back(eval.report.horizons.back().ade);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_markdown(std::span<const AblationRow> rows, const std::string& units) {
  std::string out = "| components | params |";
  if (rows.empty()) return out + "\n";
  std::string rule = "|---|---:|";
  for (const auto& h : rows.front().mean) {
    const std::string s = metrics::format_double(h.seconds);
    out += " ADE@" + s + "s | FDE@" + s + "s |";
    rule += "---:|---:|";
  }
  out += "\n" + rule + "\n";
  char buf[32];
  for (const auto& r : rows) {
    out += "| " + r.name + " | " + std::to_string(r.parameter_count) + " |";
    for (const auto& h : r.mean) {
      std::snprintf(buf, sizeof buf, " %.3f | %.3f |", h.ade, h.fde);
      out += buf;
    }
    out += "\n";
  }
  out += "\nUnits: " + units + ".\n";
  return out;
}

json ablation_to_json(std::span<const AblationRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json horizons = json::array();
    for (const auto& h : r.mean) {
      horizons.push_back({{"seconds", h.seconds}, {"step", h.step}, {"ade", h.ade}, {"fde", h.fde}});
    }
    out.push_back({{"name", r.name}, {"env", r.env}, {"soc", r.soc}, {"emb", r.emb},
                   {"parameter_count", r.parameter_count}, {"horizons", horizons},
                   {"ade_4s_per_seed", r.ade_4s}});
  }
  return out;
}

std::string sr_svg(std::span<const metrics::MetricReport> reports,
                   std::span<const std::string> labels) {
  if (reports.empty()) throw ConfigError("plot-sr needs at least one report");
  if (labels.size() != reports.size()) throw ConfigError("one label per report");
  for (const auto& r : reports) {
    if (r.units != reports.front().units) {
      throw ConfigError("reports mix units '" + reports.front().units + "' and '" + r.units + "'");
    }
    if (r.sr.points.empty()) throw ConfigError("report has an empty SR curve");
  }
  double x_max = 0.0;
  for (const auto& r : reports) {
    for (const auto& [eps, frac] : r.sr.points) x_max = std::max(x_max, eps);
  }
  if (x_max <= 0.0) x_max = 1.0;

  constexpr double kWidth = 640, kHeight = 420, kLeft = 60, kRight = 170, kTop = 20, kBottom = 50;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double eps) { return kLeft + pw * eps / x_max; };
  auto py = [&](double frac) { return kTop + ph * (1.0 - frac); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                "viewBox=\"0 0 %g %g\" font-family=\"sans-serif\" font-size=\"12\">\n",
                kWidth, kHeight, kWidth, kHeight);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  std::snprintf(buf, sizeof buf,
                "<g class=\"axes\" stroke=\"black\"><line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\"/>"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\"/></g>\n",
                kLeft, py(0), kLeft + pw, py(0), kLeft, py(0), kLeft, py(1));
  svg += buf;
  for (int k = 0; k <= 5; ++k) {
    const double eps = x_max * k / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>"
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">%g</text>\n",
                  px(eps), py(0), px(eps), py(0) + 5, px(eps), py(0) + 18, eps);
    svg += buf;
    const double frac = k / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>"
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\">%g</text>\n",
                  kLeft - 5, py(frac), kLeft, py(frac), kLeft - 8, py(frac) + 4, frac);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">threshold (%s)</text>\n"
                "<text transform=\"translate(16 %.2f) rotate(-90)\" text-anchor=\"middle\">"
                "success rate</text>\n",
                kLeft + pw / 2, kHeight - 12, reports.front().units.c_str(), kTop + ph / 2);
  svg += buf;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const char* color = kColors[r % std::size(kColors)];
    svg += "<polyline class=\"curve\" fill=\"none\" stroke-width=\"2\" stroke=\"";
    svg += color;
    svg += "\" points=\"";
    for (const auto& [eps, frac] : reports[r].sr.points) {
      std::snprintf(buf, sizeof buf, "%.3f,%.3f ", px(eps), py(frac));
      svg += buf;
    }
    svg.back() = '"';
    svg += "/>\n";
    const double ly = kTop + 10 + 20.0 * r;
    std::snprintf(buf, sizeof buf,
                  "<g class=\"legend\"><line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                  "stroke=\"%s\" stroke-width=\"2\"/><text x=\"%.2f\" y=\"%.2f\">",
                  kLeft + pw + 15, ly, kLeft + pw + 40, ly, color, kLeft + pw + 46, ly + 4);
    svg += buf;
    for (char c : labels[r]) {
      switch (c) {
        case '<': svg += "&lt;"; break;
        case '>': svg += "&gt;"; break;
        case '&': svg += "&amp;"; break;
        default: svg += c;
      }
    }
    svg += "</text></g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace xmodal::cli
