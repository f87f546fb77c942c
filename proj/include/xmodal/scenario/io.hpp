// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "xmodal/scenario/scenario.hpp"

namespace xmodal::scenario {

inline constexpr int kScenarioFormatVersion = 1;

/// Schema violation in a scenario file.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, std::string field, const std::string& why);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// JSON-lines: a header line {"format":"xmodal-scenarios","version":1}, then
// one scenario object per line:
//   {version, seed, dt, tau, delta, target, ego: [[x,y,theta]...],
//    agents: [{id, class, xy: [[x,y]...]}...],
//    static_map: {w, h, cell_m, labels: [...]}}
std::string scenario_to_json_line(const Scenario& s);
void write_scenarios(std::ostream& out, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios(std::istream& in);

void save_scenarios(const std::filesystem::path& path,
                    const std::vector<Scenario>& scenarios);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);

}  // namespace xmodal::scenario
