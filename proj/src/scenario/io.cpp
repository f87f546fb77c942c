// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/scenario/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace xmodal::scenario {

using nlohmann::json;

FormatError::FormatError(std::size_t line, std::string field, const std::string& why)
    : std::runtime_error("line " + std::to_string(line) + ": field '" + field +
                         "': " + why),
      line_(line),
      field_(std::move(field)) {}

namespace {

constexpr const char* kFormatTag = "xmodal-scenarios";

json header_json() {
  return json{{"format", kFormatTag}, {"version", kScenarioFormatVersion}};
}

class Reader {
 public:
  explicit Reader(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& why) const {
    throw FormatError(line_, field, why);
  }

  const json& member(const json& obj, const std::string& key,
                     const std::string& path) const {
    if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(join(path, key), "missing");
    return *it;
  }

  double real(const json& v, const std::string& field) const {
    if (!v.is_number()) fail(field, "expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const json& v, const std::string& field) const {
    if (!v.is_number_integer()) fail(field, "expected an integer");
    return v.get<std::int64_t>();
  }

  const json& array(const json& v, const std::string& field) const {
    if (!v.is_array()) fail(field, "expected an array");
    return v;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::size_t line_;
};

Scenario parse_scenario(const json& doc, std::size_t line) {
  Reader r(line);
  Scenario s;
  if (r.integer(r.member(doc, "version", ""), "version") != kScenarioFormatVersion) {
    r.fail("version", "unsupported version");
  }
  const json& seed = r.member(doc, "seed", "");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    r.fail("seed", "expected a non-negative integer");
  }
  s.seed = seed.get<std::uint64_t>();
  s.dt = r.real(r.member(doc, "dt", ""), "dt");
  s.tau = static_cast<int>(r.integer(r.member(doc, "tau", ""), "tau"));
  s.delta = static_cast<int>(r.integer(r.member(doc, "delta", ""), "delta"));
  const std::int64_t target = r.integer(r.member(doc, "target", ""), "target");
  if (target < 0) r.fail("target", "must be non-negative");
  s.target = static_cast<std::size_t>(target);

  const json& ego = r.array(r.member(doc, "ego", ""), "ego");
  for (std::size_t i = 0; i < ego.size(); ++i) {
    const std::string f = "ego[" + std::to_string(i) + "]";
    const json& p = r.array(ego[i], f);
    if (p.size() != 3) r.fail(f, "expected [x, y, theta]");
    s.ego.push_back({{r.real(p[0], f), r.real(p[1], f)}, r.real(p[2], f)});
  }

  const json& agents = r.array(r.member(doc, "agents", ""), "agents");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string f = "agents[" + std::to_string(i) + "]";
    AgentTrack a;
    a.id = static_cast<int>(r.integer(r.member(agents[i], "id", f), f + ".id"));
    const json& cls = r.member(agents[i], "class", f);
    if (!cls.is_string()) r.fail(f + ".class", "expected a string");
    try {
      a.agent_class = class_from_name(cls.get<std::string>());
    } catch (const std::invalid_argument& e) {
      r.fail(f + ".class", e.what());
    }
    const json& xy = r.array(r.member(agents[i], "xy", f), f + ".xy");
    for (std::size_t t = 0; t < xy.size(); ++t) {
      const std::string ft = f + ".xy[" + std::to_string(t) + "]";
      const json& p = r.array(xy[t], ft);
      if (p.size() != 2) r.fail(ft, "expected [x, y]");
      a.positions.push_back({r.real(p[0], ft), r.real(p[1], ft)});
    }
    s.agents.push_back(std::move(a));
  }

  const json& map = r.member(doc, "static_map", "");
  s.static_map.width = static_cast<int>(r.integer(r.member(map, "w", "static_map"), "static_map.w"));
  s.static_map.height = static_cast<int>(r.integer(r.member(map, "h", "static_map"), "static_map.h"));
  s.static_map.cell_m = r.real(r.member(map, "cell_m", "static_map"), "static_map.cell_m");
  const json& labels = r.array(r.member(map, "labels", "static_map"), "static_map.labels");
  s.static_map.labels.reserve(labels.size());
  for (const json& l : labels) {
    const std::int64_t v = r.integer(l, "static_map.labels");
    if (v < 0 || v >= kNumMapLabels) r.fail("static_map.labels", "label out of range");
    s.static_map.labels.push_back(static_cast<std::uint8_t>(v));
  }

  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    r.fail("<scenario>", e.what());
  }
  return s;
}

}  // namespace

std::string scenario_to_json_line(const Scenario& s) {
  json ego = json::array();
  for (const Pose& p : s.ego) ego.push_back({p.position.x, p.position.y, p.heading});
  json agents = json::array();
  for (const AgentTrack& a : s.agents) {
    json xy = json::array();
    for (const Vec2& p : a.positions) xy.push_back({p.x, p.y});
    agents.push_back({{"id", a.id}, {"class", class_name(a.agent_class)}, {"xy", std::move(xy)}});
  }
  json doc = {
      {"version", kScenarioFormatVersion},
      {"seed", s.seed},
      {"dt", s.dt},
      {"tau", s.tau},
      {"delta", s.delta},
      {"target", s.target},
      {"ego", std::move(ego)},
      {"agents", std::move(agents)},
      {"static_map",
       {{"w", s.static_map.width},
        {"h", s.static_map.height},
        {"cell_m", s.static_map.cell_m},
        {"labels", s.static_map.labels}}},
  };
  return doc.dump();
}

void write_scenarios(std::ostream& out, const std::vector<Scenario>& scenarios) {
  out << header_json().dump() << '\n';
  for (const Scenario& s : scenarios) out << scenario_to_json_line(s) << '\n';
}

std::vector<Scenario> read_scenarios(std::istream& in) {
  std::vector<Scenario> out;
  std::string text;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(line, "<line>", std::string("malformed JSON: ") + e.what());
    }
    if (!header) {
      if (!doc.is_object() || doc.value("format", "") != kFormatTag) {
        throw FormatError(line, "format", "expected header tag 'xmodal-scenarios'");
      }
      if (doc.value("version", -1) != kScenarioFormatVersion) {
        throw FormatError(line, "version", "unsupported version");
      }
      header = true;
      continue;
    }
    out.push_back(parse_scenario(doc, line));
  }
  if (!header) throw FormatError(line + 1, "format", "missing header line");
  return out;
}

void save_scenarios(const std::filesystem::path& path,
                    const std::vector<Scenario>& scenarios) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_scenarios(out, scenarios);
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_scenarios(in);
}

}  // namespace xmodal::scenario
