// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

// xmodal: scenario generation, training, evaluation, ablations and SR plots.
//
// Every subcommand accepts `--config FILE` plus `--<key> <value>` overrides of
// any run-config key (dashes and underscores are interchangeable).

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "xmodal/cli/run.hpp"
#include "xmodal/scenario/io.hpp"

using namespace xmodal;
using cli::ConfigError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() <= 2) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
      value = args[++i];
    } else {
      value = "true";  // bare flag, valid for boolean keys only
    }
    std::replace(key.begin(), key.end(), '-', '_');
    out.emplace_back(key, value);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void print_report(const metrics::MetricReport& r) {
  std::printf("%s, N=%zu, %zu scenarios (%s)\n", r.modality.c_str(), r.n_samples, r.n_scenarios,
              r.units.c_str());
  for (const auto& h : r.horizons) {
    std::printf("  %gs (step %zu): ADE %.4f  FDE %.4f\n", h.seconds, h.step, h.ade, h.fde);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal trajectory prediction experiments"};
  app.require_subcommand(1);
  std::string config_path;

  auto* gen = app.add_subcommand("gen", "Generate train/test scenario files into out_dir");
  auto* train = app.add_subcommand("train", "Train and write checkpoint, config and log into out_dir");
  auto* eval = app.add_subcommand("eval", "Best-of-N evaluation of a trained run");
  auto* ablate = app.add_subcommand("ablate", "Env/Soc/Emb ablation table");
  auto* plot = app.add_subcommand("plot-sr", "SR curves of metric reports as CSV and SVG");

  std::string run_dir, report_path;
  eval->add_option("--run", run_dir, "Run directory holding checkpoint.json and config.json")->required();
  eval->add_option("--report", report_path, "Report path (default <run>/report_<modality>.json)");

  std::vector<std::string> report_files, labels;
  std::string plot_prefix = "sr";
  plot->add_option("reports", report_files, "Metric report JSON files")->required();
  plot->add_option("--label", labels, "Legend label per report (default: file stem)");
  plot->add_option("--out", plot_prefix, "Output prefix: <out>.svg and <out>.<label>.csv");

  for (auto* sub : {gen, train, eval, ablate}) {
    sub->add_option("--config", config_path, "Run config JSON");
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::filesystem::path out_dir_for_errors;
  try {
    if (*plot) {
      std::vector<metrics::MetricReport> reports;
      for (const auto& f : report_files) reports.push_back(metrics::load_report(f));
      if (labels.empty()) {
        for (const auto& f : report_files) labels.push_back(std::filesystem::path(f).stem().string());
      }
      const std::string svg = cli::sr_svg(reports, labels);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::string csv_path = plot_prefix + "." + labels[i] + ".csv";
        std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + csv_path);
        metrics::write_sr_csv(out, reports[i].sr);
        std::printf("wrote %s\n", csv_path.c_str());
      }
      write_text(plot_prefix + ".svg", svg);
      std::printf("wrote %s.svg\n", plot_prefix.c_str());
      return kExitOk;
    }

    CLI::App* active = app.get_subcommands().front();
    std::string base = config_path;
    if (*eval && base.empty() && std::filesystem::exists(std::filesystem::path(run_dir) / "config.json")) {
      base = (std::filesystem::path(run_dir) / "config.json").string();
    }
    const cli::RunConfig cfg = cli::load_config(base, parse_overrides(active->remaining()));
    const std::filesystem::path out_dir = cfg.out_dir;
    out_dir_for_errors = out_dir;

    if (*gen) {
      std::filesystem::create_directories(out_dir);
      scenario::save_scenarios(out_dir / "train.jsonl", cli::generate_corpus(cfg, cfg.train_scenarios, false));
      scenario::save_scenarios(out_dir / "test.jsonl", cli::generate_corpus(cfg, cfg.test_scenarios, true));
      std::printf("wrote %zu + %zu scenarios to %s\n", cfg.train_scenarios, cfg.test_scenarios,
                  out_dir.string().c_str());
    } else if (*train) {
      const auto scenarios = cli::train_corpus(cfg);
      cli::TrainHooks hooks;
      hooks.after_epoch = [&](const cli::EpochRecord& e) {
        std::printf("epoch %zu/%zu  loss %.5f  (%.1fs)\n", e.epoch, cfg.epochs, e.total, e.seconds);
        std::fflush(stdout);
      };
      cli::train(cfg, scenarios, out_dir, hooks);
      std::printf("checkpoint: %s\n", (out_dir / "checkpoint.json").string().c_str());
    } else if (*eval) {
      const auto params = diff::load_checkpoint(std::filesystem::path(run_dir) / "checkpoint.json");
      const auto m = cli::eval_modality(cfg);
      const auto result = cli::evaluate(params, cfg, cli::test_corpus(cfg), m, cfg.n_eval);
      print_report(result.report);
      for (const auto& [key, count] : result.access.counts()) {
        std::printf("  reads[%s] = %llu\n", key.c_str(), static_cast<unsigned long long>(count));
      }
      const std::filesystem::path out =
          report_path.empty() ? std::filesystem::path(run_dir) / ("report_" + cfg.eval_modality + ".json")
                              : std::filesystem::path(report_path);
      metrics::save_report(result.report, out);
      std::printf("report: %s\n", out.string().c_str());
    } else if (*ablate) {
      const auto train_set = cli::train_corpus(cfg);
      const auto test_set = cli::test_corpus(cfg);
      const auto rows = cli::ablate(cfg, train_set, test_set, [](const std::string& what) {
        std::printf("training %s\n", what.c_str());
        std::fflush(stdout);
      });
      const std::string table =
          cli::ablation_markdown(rows, metrics::units_of(cli::eval_modality(cfg)));
      std::filesystem::create_directories(out_dir);
      write_text(out_dir / "ablation.md", table);
      write_text(out_dir / "ablation.json", cli::ablation_to_json(rows).dump(2) + "\n");
      std::fputs(table.c_str(), stdout);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const cli::DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    if (std::filesystem::exists(out_dir_for_errors / "checkpoint.json")) {
      std::fprintf(stderr, "last good checkpoint: %s\n",
                   (out_dir_for_errors / "checkpoint.json").string().c_str());
    }
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
