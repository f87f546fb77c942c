// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>

#include "xmodal/diff/graph.hpp"

namespace xmodal::diff {

/// Named parameter tensors, iterated in lexicographic name order.
class ParameterStore {
 public:
  void add(const std::string& name, Tensor value);
  void set(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t value_count() const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::map<std::string, Tensor> params_;
};

/// Counts reads per key. Used to prove which inputs and weights an
/// evaluation touched.
class AccessMonitor {
 public:
  void record(std::string_view key, std::uint64_t n = 1);
  std::uint64_t count(std::string_view key) const;
  void merge(const AccessMonitor& other);
  const std::map<std::string, std::uint64_t, std::less<>>& counts() const {
    return counts_;
  }

 private:
  std::map<std::string, std::uint64_t, std::less<>> counts_;
};

/// Key under which a parameter read is recorded: the second dot-separated
/// component of "branch.<modality>.<layer>...", otherwise the first.
std::string_view access_key(std::string_view parameter_name);

/// Binds stored parameters into one graph, once each.
class ParamBinder {
 public:
  ParamBinder(Graph& graph, const ParameterStore& store,
              AccessMonitor* monitor = nullptr)
      : graph_(graph), store_(store), monitor_(monitor) {}

  Var get(const std::string& name);
  /// Makes later get(name) calls return `value`, e.g. a grad_check input.
  void bind(const std::string& name, Var value);
  Graph& graph() { return graph_; }
  AccessMonitor* monitor() { return monitor_; }

 private:
  Graph& graph_;
  const ParameterStore& store_;
  AccessMonitor* monitor_;
  std::unordered_map<std::string, Var> bound_;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint JSON: {"format_version": 1, "parameters": {name: {"shape": [...],
/// "values": [...]}}}. Reals are written as shortest round-trip decimals.
std::string checkpoint_to_json(const ParameterStore& store);
ParameterStore checkpoint_from_json(std::string_view text);
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace xmodal::diff
