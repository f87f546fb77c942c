// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal::scenario {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double norm(Vec2 a);

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians, counter-clockwise from world +x
  friend bool operator==(const Pose&, const Pose&) = default;
};

enum class AgentClass : std::uint8_t { kVehicle, kPedestrian, kCyclist };

std::string_view class_name(AgentClass c);
AgentClass class_from_name(std::string_view name);
/// Speed cap in m/s: pedestrian 2, cyclist 6, vehicle 15.
double max_speed(AgentClass c);

struct AgentTrack {
  int id = 0;
  AgentClass agent_class = AgentClass::kVehicle;
  std::vector<Vec2> positions;  // world frame, one per step
  friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

enum class MapLabel : std::uint8_t { kOffRoad = 0, kRoad = 1, kSidewalk = 2 };
inline constexpr int kNumMapLabels = 3;

/// Semantic grid in the ego frame of the first step. Rows run forward from
/// the ego, columns run across from -40 m (right) to +40 m (left).
struct StaticMap {
  int width = 0;
  int height = 0;
  double cell_m = 0.5;
  std::vector<std::uint8_t> labels;  // row-major, height x width
  friend bool operator==(const StaticMap&, const StaticMap&) = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  double dt = 0.4;
  int tau = 5;
  int delta = 10;
  std::vector<Pose> ego;  // world frame, one per step
  std::vector<AgentTrack> agents;
  std::size_t target = 0;
  StaticMap static_map;

  int steps() const { return tau + delta; }
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

class InfeasibleConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws std::invalid_argument naming the violated invariant.
void validate(const Scenario& s);

struct GenConfig {
  double dt = 0.4;
  int tau = 5;
  int delta = 10;
  int min_agents = 2;
  int max_agents = 5;
  /// Multiplies every sampled cruise speed; 0 freezes all agents.
  double speed_scale = 1.0;
  /// Hard minimum distance between any two agents.
  double repulsion_radius = 1.0;
  /// Inverse-square repulsion strength, m^3/s.
  double repulsion_gain = 4.0;
  /// Repulsion is ignored beyond this distance.
  double repulsion_range = 8.0;
  int max_attempts = 400;
};

inline constexpr int kMaxAgents = 8;

/// Route-following agent for the kinematic simulator.
struct AgentSpec {
  AgentClass agent_class = AgentClass::kVehicle;
  Vec2 start;
  double speed = 0.0;  // cruise speed, m/s
  std::vector<Vec2> waypoints;
};

/// Constant-speed waypoint following with inverse-square pairwise repulsion.
/// No two agents come closer than cfg.repulsion_radius, provided they start
/// at least that far apart, and no step exceeds the class speed cap.
std::vector<std::vector<Vec2>> simulate(const std::vector<AgentSpec>& agents,
                                        int steps, const GenConfig& cfg);

/// Synthetic intersection scenario, deterministic in (cfg, seed). Agent 0 is
/// the prediction target.
Scenario generate_scenario(const GenConfig& cfg, std::uint64_t seed);

}  // namespace xmodal::scenario
