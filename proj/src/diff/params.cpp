// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/diff/params.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace xmodal::diff {

using nlohmann::json;

void ParameterStore::add(const std::string& name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("duplicate parameter " + name);
  }
}

void ParameterStore::set(const std::string& name, Tensor value) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  if (it->second.shape() != value.shape()) {
    throw ShapeError("parameter " + name + " has shape " +
                     shape_to_string(it->second.shape()) + ", got " +
                     shape_to_string(value.shape()));
  }
  it->second = std::move(value);
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

std::size_t ParameterStore::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void AccessMonitor::record(std::string_view key, std::uint64_t n) {
  auto it = counts_.find(key);
  if (it == counts_.end()) {
    counts_.emplace(std::string(key), n);
  } else {
    it->second += n;
  }
}

std::uint64_t AccessMonitor::count(std::string_view key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

void AccessMonitor::merge(const AccessMonitor& other) {
  for (const auto& [k, n] : other.counts_) record(k, n);
}

std::string_view access_key(std::string_view name) {
  const auto first = name.find('.');
  if (first == std::string_view::npos) return name;
  if (name.substr(0, first) != "branch") return name.substr(0, first);
  const auto second = name.find('.', first + 1);
  return name.substr(first + 1, second == std::string_view::npos
                                    ? std::string_view::npos
                                    : second - first - 1);
}

Var ParamBinder::get(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  if (monitor_) monitor_->record(access_key(name));
  Var v = graph_.parameter(name, store_.get(name));
  bound_.emplace(name, v);
  return v;
}

void ParamBinder::bind(const std::string& name, Var value) {
  if (value.graph != &graph_) throw std::invalid_argument("bound value belongs to another graph");
  if (!bound_.emplace(name, value).second) {
    throw std::invalid_argument("parameter " + name + " is already bound");
  }
}

std::string checkpoint_to_json(const ParameterStore& store) {
  json params = json::object();
  for (const auto& [name, t] : store.entries()) {
    json entry;
    entry["shape"] = t.shape();
    entry["values"] = std::vector<double>(t.values().begin(), t.values().end());
    params[name] = std::move(entry);
  }
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["parameters"] = std::move(params);
  return doc.dump();
}

ParameterStore checkpoint_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      doc["format_version"] != kCheckpointFormatVersion) {
    throw std::runtime_error("checkpoint: missing or unsupported format_version");
  }
  if (!doc.contains("parameters") || !doc["parameters"].is_object()) {
    throw std::runtime_error("checkpoint: missing parameters object");
  }
  ParameterStore store;
  for (const auto& [name, entry] : doc["parameters"].items()) {
    try {
      store.add(name, Tensor(entry.at("shape").get<Shape>(),
                             entry.at("values").get<std::vector<double>>()));
    } catch (const json::exception& e) {
      throw std::runtime_error("checkpoint: parameter " + name + ": " + e.what());
    }
  }
  return store;
}

void save_checkpoint(const ParameterStore& store,
                     const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << checkpoint_to_json(store) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace xmodal::diff
