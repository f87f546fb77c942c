// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "xmodal/metrics/metrics.hpp"

namespace xmodal::cli {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    RunConfig, dt, tau, delta, data_seed, train_scenarios, test_scenarios, train_path,
    test_path, grid, latent_dim, cond_dim, env_dim, hidden, mlp_layers, rounds, use_env, use_soc,
    use_mul, modalities, lambda, sigma_g_sq, smooth_temperature, n_train, n_eval, lr, epochs,
    batch_size, seed, parallel, threads, eval_modality, repeats, out_dir)

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError(field + ": " + why);
}

bool known_modality(const std::string& name) { return name == "topdown" || name == "frontal"; }

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  if (text.empty() || text[0] == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  std::size_t used = 0;
  try {
    const auto v = std::stoull(text, &used, 10);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
}

}  // namespace

void validate(const RunConfig& c) {
  require(std::isfinite(c.dt) && c.dt > 0.0 && c.dt <= 2.0, "dt", "must be in (0, 2]");
  require(c.tau >= 1 && c.tau <= 50, "tau", "must be in [1, 50]");
  require(c.delta >= 1 && c.delta <= 100, "delta", "must be in [1, 100]");
  require(metrics::horizon_step(4.0, c.dt) <= static_cast<std::size_t>(c.delta) &&
              metrics::horizon_step(1.0, c.dt) >= 1,
          "delta", "must cover the 1 to 4 s horizons at this dt");
  require(c.train_scenarios >= 1, "train_scenarios", "must be at least 1");
  require(c.test_scenarios >= 1, "test_scenarios", "must be at least 1");
  require(c.grid >= 1 && 32 % c.grid == 0, "grid", "must divide 32");
  require(c.latent_dim >= 1, "latent_dim", "must be at least 1");
  require(c.cond_dim >= 1, "cond_dim", "must be at least 1");
  require(c.env_dim >= 1, "env_dim", "must be at least 1");
  require(c.hidden >= 1, "hidden", "must be at least 1");
  require(c.mlp_layers >= 1 && c.mlp_layers <= 8, "mlp_layers", "must be in [1, 8]");
  require(c.rounds >= 0 && c.rounds <= 8, "rounds", "must be in [0, 8]");
  require(!c.modalities.empty(), "modalities", "must list at least one modality");
  for (const auto& m : c.modalities) {
    require(known_modality(m), "modalities", "unknown modality '" + m + "'");
    require(std::count(c.modalities.begin(), c.modalities.end(), m) == 1, "modalities",
            "duplicate modality '" + m + "'");
  }
  require(std::isfinite(c.lambda) && c.lambda >= 0.0, "lambda", "must be >= 0");
  require(std::isfinite(c.sigma_g_sq) && c.sigma_g_sq > 0.0, "sigma_g_sq", "must be > 0");
  require(std::isfinite(c.smooth_temperature) && c.smooth_temperature >= 0.0,
          "smooth_temperature", "must be >= 0");
  require(c.n_train >= 1, "n_train", "must be at least 1");
  require(c.n_eval >= 1, "n_eval", "must be at least 1");
  require(std::isfinite(c.lr) && c.lr >= 0.0, "lr", "must be >= 0");
  require(c.epochs >= 1, "epochs", "must be at least 1");
  require(c.batch_size >= 1, "batch_size", "must be at least 1");
  require(c.threads <= 256, "threads", "must be at most 256");
  require(known_modality(c.eval_modality), "eval_modality",
          "unknown modality '" + c.eval_modality + "'");
  require(c.repeats >= 1, "repeats", "must be at least 1");
}

json config_to_json(const RunConfig& cfg) {
  json doc = cfg;
  return doc;
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const json defaults = RunConfig{};
  for (const auto& [key, value] : doc.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    const json& d = defaults[key];
    const bool ok = (d.is_boolean() && value.is_boolean()) ||
                    (d.is_number_unsigned() && value.is_number_unsigned()) ||
                    (d.is_number_integer() && !d.is_number_unsigned() && value.is_number_integer()) ||
                    (d.is_number_float() && value.is_number()) ||
                    (d.is_string() && value.is_string()) ||
                    (d.is_array() && value.is_array() &&
                     std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); }));
    if (!ok) throw ConfigError(key + ": wrong type (" + std::string(value.type_name()) + ")");
  }
  try {
    return doc.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

void apply_override(json& doc, const std::string& key, const std::string& value) {
  const json defaults = RunConfig{};
  if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  const json& d = defaults[key];
  if (d.is_boolean()) {
    if (value == "true" || value == "1") {
      doc[key] = true;
    } else if (value == "false" || value == "0") {
      doc[key] = false;
    } else {
      throw ConfigError(key + ": expected true or false, got '" + value + "'");
    }
  } else if (d.is_number_unsigned()) {
    doc[key] = parse_u64(key, value);
  } else if (d.is_number_integer()) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used, 10);
      if (used != value.size()) throw std::invalid_argument(value);
      doc[key] = v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
  } else if (d.is_number_float()) {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      doc[key] = v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
  } else if (d.is_array()) {
    json list = json::array();
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) list.push_back(item);
    }
    doc[key] = list;
  } else {
    doc[key] = value;
  }
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    config_from_json(doc);  // reject unknown keys before merging
  }
  for (const auto& [key, value] : overrides) apply_override(doc, key, value);
  if (const char* env = std::getenv("XMODAL_SEED"); env != nullptr && *env != '\0') {
    doc["seed"] = parse_u64("XMODAL_SEED", env);
  }
  RunConfig cfg = config_from_json(doc);
  validate(cfg);
  return cfg;
}

model::ModelConfig model_config(const RunConfig& c) {
  model::ModelConfig m;
  m.grid = c.grid;
  m.env_dim = m.node_dim = c.env_dim;
  m.cond_dim = c.cond_dim;
  m.latent_dim = c.latent_dim;
  m.hidden = c.hidden;
  m.mlp_layers = c.mlp_layers;
  m.rounds = c.rounds;
  m.use_env = c.use_env;
  m.use_soc = c.use_soc;
  m.tau = c.tau;
  m.delta = c.delta;
  return m;
}

model::DiversityConfig diversity_config(const RunConfig& c) {
  return {c.sigma_g_sq, c.lambda, c.smooth_temperature};
}

scenario::GenConfig gen_config(const RunConfig& c) {
  scenario::GenConfig g;
  g.dt = c.dt;
  g.tau = c.tau;
  g.delta = c.delta;
  return g;
}

std::vector<scenario::Modality> trained_modalities(const RunConfig& c) {
  std::vector<scenario::Modality> out;
  for (const auto& name : c.modalities) {
    out.push_back(scenario::modality_from_name(name));
    if (!c.use_mul) break;
  }
  return out;
}

scenario::Modality eval_modality(const RunConfig& c) {
  return scenario::modality_from_name(c.eval_modality);
}

}  // namespace xmodal::cli
