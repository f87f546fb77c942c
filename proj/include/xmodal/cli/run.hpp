// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xmodal/cli/config.hpp"
#include "xmodal/diff/params.hpp"
#include "xmodal/metrics/metrics.hpp"
#include "xmodal/scenario/scenario.hpp"

namespace xmodal::cli {

/// The training loss or the parameters stopped being finite. Exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Generated corpora: seeds data_seed * 2^32 + i for training and
/// data_seed * 2^32 + 2^31 + i for testing, so both are fixed by data_seed.
std::vector<scenario::Scenario> generate_corpus(const RunConfig& cfg, std::size_t count,
                                                bool test_split);
/// From train_path / test_path when set, otherwise generated.
std::vector<scenario::Scenario> train_corpus(const RunConfig& cfg);
std::vector<scenario::Scenario> test_corpus(const RunConfig& cfg);

struct BranchStats {
  std::string modality;
  double kl = 0.0;
  double recon = 0.0;
  double k_max = 0.0;  // 0 when n_train < 2
  friend bool operator==(const BranchStats&, const BranchStats&) = default;
};

/// Batch means of one optimizer step, taken before the update.
struct StepRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // 1-based, counted across epochs
  double total = 0.0;
  std::vector<BranchStats> branches;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double total = 0.0;  // mean over the epoch's samples
  std::vector<BranchStats> branches;
  double seconds = 0.0;  // wall clock, not reproducible
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

nlohmann::json train_log_to_json(const TrainLog& log);

struct TrainHooks {
  /// Runs after every optimizer update; may modify the parameters.
  std::function<void(const StepRecord&, diff::ParameterStore&)> after_step;
  /// Runs after every epoch.
  std::function<void(const EpochRecord&)> after_epoch;
};

struct TrainResult {
  diff::ParameterStore params;
  TrainLog log;
};

/// Fresh branches for every trained modality, seeded by cfg.seed.
diff::ParameterStore init_parameters(const RunConfig& cfg);

/// Mini-batch Adam on the regularized joint objective. With a non-empty
/// `run_dir`, writes config.json once and checkpoint.json plus
/// train_log.json after every epoch. On divergence the directory keeps the
/// last good epoch's checkpoint.
TrainResult train(const RunConfig& cfg, std::span<const scenario::Scenario> scenarios,
                  const std::filesystem::path& run_dir = {}, const TrainHooks& hooks = {});

/// Modalities with a branch in `params`.
std::vector<scenario::Modality> modalities_in(const diff::ParameterStore& params);

struct EvalResult {
  metrics::MetricReport report;
  diff::AccessMonitor access;  // parameter and input reads, keyed by modality
  double endpoint_spread = 0.0;  // mean pairwise endpoint distance of the N samples
};

/// Best-of-n evaluation from one input modality. Scenario i draws its prior
/// samples from a stream seeded by (cfg.seed, i), so results do not depend
/// on thread count. Throws ConfigError for an untrained modality.
EvalResult evaluate(const diff::ParameterStore& params, const RunConfig& cfg,
                    std::span<const scenario::Scenario> scenarios, scenario::Modality m,
                    std::size_t n);

struct AblationRow {
  std::string name;  // e.g. "+Env+Soc+Emb"
  bool env = false;
  bool soc = false;
  bool emb = false;
  std::size_t parameter_count = 0;
  std::vector<metrics::HorizonMetrics> mean;  // averaged over seeds
  std::vector<double> ade_4s;                 // one per seed
};

/// Trains and evaluates -Env-Soc, +Env-Soc, -Env+Soc, +Env+Soc on the
/// evaluation modality alone, and +Env+Soc+Emb jointly with a second
/// modality, each over `repeats` seeds starting at cfg.seed.
std::vector<AblationRow> ablate(const RunConfig& base,
                                std::span<const scenario::Scenario> train_set,
                                std::span<const scenario::Scenario> test_set,
                                const std::function<void(const std::string&)>& progress = {});
std::string ablation_markdown(std::span<const AblationRow> rows, const std::string& units);
nlohmann::json ablation_to_json(std::span<const AblationRow> rows);

/// One polyline per report with axes and a legend. Rejects an empty list,
/// mismatched units, or a label count different from the report count.
std::string sr_svg(std::span<const metrics::MetricReport> reports,
                   std::span<const std::string> labels);

}  // namespace xmodal::cli
