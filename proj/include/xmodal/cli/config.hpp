// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xmodal/model/diversity.hpp"
#include "xmodal/scenario/scenario.hpp"

namespace xmodal::cli {

/// Bad key, bad value or out-of-range setting. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // geometry and data
  double dt = 0.4;
  int tau = 5;
  int delta = 10;
  std::uint64_t data_seed = 0;
  std::size_t train_scenarios = 500;
  std::size_t test_scenarios = 100;
  std::string train_path;  // empty: generate from data_seed
  std::string test_path;

  // model
  std::size_t grid = 8;
  std::size_t latent_dim = 16;
  std::size_t cond_dim = 32;
  std::size_t env_dim = 32;  // also the agent state width
  std::size_t hidden = 32;
  std::size_t mlp_layers = 2;
  int rounds = 2;
  bool use_env = true;
  bool use_soc = true;
  bool use_mul = true;  // false: only the first listed modality is trained
  std::vector<std::string> modalities = {"topdown", "frontal"};

  // objective
  double lambda = 10.0;
  double sigma_g_sq = 1.0;
  double smooth_temperature = 0.0;
  std::size_t n_train = 10;
  std::size_t n_eval = 20;

  // optimization
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool parallel = false;
  std::size_t threads = 0;  // 0: hardware concurrency, with parallel

  // evaluation and output
  std::string eval_modality = "topdown";
  std::size_t repeats = 1;  // training seeds per ablation row
  std::string out_dir = "run";
};

/// Throws ConfigError naming the field.
void validate(const RunConfig& cfg);

nlohmann::json config_to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& doc);

/// Reads a JSON file (empty path: defaults), applies `--key value` overrides,
/// then XMODAL_SEED if set, then validates.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Parses `value` with the type of the key's default.
void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value);

model::ModelConfig model_config(const RunConfig& cfg);
model::DiversityConfig diversity_config(const RunConfig& cfg);
scenario::GenConfig gen_config(const RunConfig& cfg);

/// Modalities that receive a branch: all listed, or only the first without Mul.
std::vector<scenario::Modality> trained_modalities(const RunConfig& cfg);
scenario::Modality eval_modality(const RunConfig& cfg);

}  // namespace xmodal::cli
