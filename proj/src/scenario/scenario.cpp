// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/scenario/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "xmodal/scenario/geometry.hpp"

namespace xmodal::scenario {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

std::string_view class_name(AgentClass c) {
  switch (c) {
    case AgentClass::kVehicle: return "vehicle";
    case AgentClass::kPedestrian: return "pedestrian";
    case AgentClass::kCyclist: return "cyclist";
  }
  return "vehicle";
}

AgentClass class_from_name(std::string_view name) {
  if (name == "vehicle") return AgentClass::kVehicle;
  if (name == "pedestrian") return AgentClass::kPedestrian;
  if (name == "cyclist") return AgentClass::kCyclist;
  throw std::invalid_argument("unknown agent class '" + std::string(name) + "'");
}

double max_speed(AgentClass c) {
  switch (c) {
    case AgentClass::kVehicle: return 15.0;
    case AgentClass::kPedestrian: return 2.0;
    case AgentClass::kCyclist: return 6.0;
  }
  return 15.0;
}

void validate(const Scenario& s) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid scenario: " + what);
  };
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) fail("dt must be positive");
  if (s.tau < 1 || s.delta < 1) fail("tau and delta must be >= 1");
  if (s.agents.empty()) fail("needs at least one agent");
  if (s.target >= s.agents.size()) fail("target index out of range");
  const auto steps = static_cast<std::size_t>(s.steps());
  if (s.ego.size() != steps) fail("ego pose count differs from tau + delta");
  for (const Pose& p : s.ego) {
    if (!std::isfinite(p.position.x) || !std::isfinite(p.position.y) ||
        !std::isfinite(p.heading)) {
      fail("non-finite ego pose");
    }
  }
  for (const AgentTrack& a : s.agents) {
    if (a.positions.size() != steps) {
      fail("agent " + std::to_string(a.id) + " track length differs from tau + delta");
    }
    for (const Vec2& p : a.positions) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        fail("agent " + std::to_string(a.id) + " has a non-finite position");
      }
    }
  }
  const StaticMap& m = s.static_map;
  if (m.width <= 0 || m.height <= 0 || !(m.cell_m > 0.0) ||
      m.labels.size() != static_cast<std::size_t>(m.width) * m.height) {
    fail("static map dimensions disagree with its labels");
  }
  for (std::uint8_t l : m.labels) {
    if (l >= kNumMapLabels) fail("static map label out of range");
  }
}

std::vector<std::vector<Vec2>> simulate(const std::vector<AgentSpec>& agents,
                                        int steps, const GenConfig& cfg) {
  const std::size_t n = agents.size();
  std::vector<std::vector<Vec2>> tracks(n);
  std::vector<Vec2> latest(n);
  std::vector<std::size_t> next_wp(n, 0);
  std::vector<Vec2> heading(n, Vec2{1.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    latest[i] = agents[i].start;
    tracks[i].reserve(static_cast<std::size_t>(steps));
    tracks[i].push_back(agents[i].start);
  }
  const double r = cfg.repulsion_radius;
  auto clear_of_others = [&](std::size_t i, Vec2 p) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && norm(p - latest[j]) < r) return false;
    }
    return true;
  };

  for (int t = 1; t < steps; ++t) {
    const std::vector<Vec2> prev = latest;
    for (std::size_t i = 0; i < n; ++i) {
      const AgentSpec& spec = agents[i];
      const Vec2 pos = prev[i];
      const double reach = std::max(0.75, spec.speed * cfg.dt);
      while (next_wp[i] < spec.waypoints.size() &&
             norm(spec.waypoints[next_wp[i]] - pos) < reach) {
        ++next_wp[i];
      }
      if (next_wp[i] < spec.waypoints.size()) {
        const Vec2 to = spec.waypoints[next_wp[i]] - pos;
        heading[i] = (1.0 / norm(to)) * to;
      }
      const Vec2 dir = heading[i];

      // Yield to anyone just ahead along the direction of travel.
      double factor = 1.0;
      const double look = 6.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Vec2 rel = prev[j] - pos;
        const double ahead = rel.x * dir.x + rel.y * dir.y;
        const double across = std::abs(rel.x * dir.y - rel.y * dir.x);
        if (ahead > 0.0 && ahead < look && across < 1.5) {
          factor = std::min(factor, std::max(0.0, (ahead - r) / (look - r)));
        }
      }
      Vec2 v = (spec.speed * factor) * dir;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Vec2 away = pos - prev[j];
        const double d = norm(away);
        if (d > 1e-9 && d < cfg.repulsion_range) {
          v = v + (cfg.repulsion_gain / (d * d * d)) * away;
        }
      }
      const double vmax = max_speed(spec.agent_class) * (1.0 - 1e-12);
      const double speed = norm(v);
      if (speed > vmax) v = (vmax / speed) * v;

      const Vec2 step = cfg.dt * v;
      Vec2 next = pos + step;
      if (!clear_of_others(i, next)) {
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 30; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (clear_of_others(i, pos + mid * step)) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        next = pos + lo * step;
      }
      latest[i] = next;
      tracks[i].push_back(next);
    }
  }
  return tracks;
}

namespace {

constexpr double kSidewalkWidth = 2.5;

struct Layout {
  Vec2 center;
  double hw_main = 4.0;   // half width of the road along x
  double hw_cross = 4.0;  // half width of the road along y
};

// Arms: 0 near (x < cx), 1 far, 2 right (y < cy), 3 left. Inward directions.
constexpr std::array<Vec2, 4> kInward = {Vec2{1, 0}, Vec2{-1, 0}, Vec2{0, 1},
                                         Vec2{0, -1}};

Vec2 right_normal(Vec2 d) { return {d.y, -d.x}; }

int arm_with_outward(Vec2 e) {
  for (int a = 0; a < 4; ++a) {
    if (kInward[a].x == -e.x && kInward[a].y == -e.y) return a;
  }
  return 0;
}

double arm_half_width(const Layout& l, int arm) {
  return arm < 2 ? l.hw_main : l.hw_cross;
}

double other_half_width(const Layout& l, int arm) {
  return arm < 2 ? l.hw_cross : l.hw_main;
}

StaticMap rasterize(const Layout& l) {
  StaticMap m;
  m.width = kTopdownCells;
  m.height = kTopdownCells;
  m.cell_m = kTopdownCellM;
  m.labels.resize(static_cast<std::size_t>(m.width) * m.height);
  for (int row = 0; row < m.height; ++row) {
    for (int col = 0; col < m.width; ++col) {
      const double x = (row - kTopdownAnchorRow + 0.5) * m.cell_m;
      const double y = (col - kTopdownAnchorCol + 0.5) * m.cell_m;
      const double dy = std::abs(y - l.center.y);
      const double dx = std::abs(x - l.center.x);
      MapLabel label = MapLabel::kOffRoad;
      if (dy <= l.hw_main || dx <= l.hw_cross) {
        label = MapLabel::kRoad;
      } else if (dy <= l.hw_main + kSidewalkWidth || dx <= l.hw_cross + kSidewalkWidth) {
        label = MapLabel::kSidewalk;
      }
      m.labels[static_cast<std::size_t>(row) * m.width + col] =
          static_cast<std::uint8_t>(label);
    }
  }
  return m;
}

class Sampler {
 public:
  Sampler(const GenConfig& cfg, const Layout& layout, std::mt19937_64& rng)
      : cfg_(cfg), layout_(layout), rng_(rng) {}

  AgentClass sample_class(bool target) {
    const double u = uniform(0.0, 1.0);
    if (target) {
      return u < 0.5 ? AgentClass::kVehicle
                     : (u < 0.75 ? AgentClass::kCyclist : AgentClass::kPedestrian);
    }
    return u < 0.4 ? AgentClass::kVehicle
                   : (u < 0.6 ? AgentClass::kCyclist : AgentClass::kPedestrian);
  }

  AgentSpec sample_agent(AgentClass c) {
    AgentSpec spec;
    spec.agent_class = c;
    const int arm = static_cast<int>(pick(4));
    const Vec2 d = kInward[arm];
    const Vec2 r = right_normal(d);
    const Vec2 center = layout_.center;
    const double hw = arm_half_width(layout_, arm);
    const double hw_other = other_half_width(layout_, arm);
    const double lead = uniform(cfg_.tau - 2.0, cfg_.tau + 3.0) * cfg_.dt;

    if (c == AgentClass::kPedestrian) {
      spec.speed = uniform(0.9, 1.7) * cfg_.speed_scale;
      const double side = pick(2) == 0 ? 1.0 : -1.0;
      const double off = hw + 0.5 * kSidewalkWidth;
      const double clear = hw_other + 0.5 * kSidewalkWidth;
      const Vec2 corner = center + (side * off) * r - clear * d;
      switch (pick(3)) {
        case 0: {
          const Vec2 across = center + (side * off) * r + clear * d;
          spec.waypoints = {corner, across, across + 40.0 * d};
          break;
        }
        case 1:
          spec.waypoints = {corner, corner + (side * 40.0) * r};
          break;
        default: {
          const Vec2 across = center - (side * off) * r - clear * d;
          spec.waypoints = {corner, across, across - (side * 40.0) * r};
          break;
        }
      }
      spec.start = corner - (spec.speed * lead + uniform(0.0, 2.0)) * d;
      return spec;
    }

    const bool bike = c == AgentClass::kCyclist;
    spec.speed = (bike ? uniform(3.0, 5.5) : uniform(5.0, 10.0)) * cfg_.speed_scale;
    const double lane = bike ? std::max(0.5, hw - 0.8) : 0.5 * hw;
    const Vec2 entry = center + lane * r - (hw_other + 1.0) * d;
    Vec2 out = d;
    switch (pick(3)) {
      case 0: out = d; break;
      case 1: out = r; break;
      default: out = -1.0 * r; break;
    }
    const int exit_arm = arm_with_outward(out);
    const double exit_hw = arm_half_width(layout_, exit_arm);
    const double exit_lane = bike ? std::max(0.5, exit_hw - 0.8) : 0.5 * exit_hw;
    const Vec2 exit_r = right_normal(out);
    const Vec2 exit =
        center + (other_half_width(layout_, exit_arm) + 1.0) * out + exit_lane * exit_r;
    spec.waypoints = {entry, exit, exit + 80.0 * out};
    spec.start = entry - (spec.speed * lead) * d;
    return spec;
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  std::uint64_t pick(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_);
  }

 private:
  const GenConfig& cfg_;
  const Layout& layout_;
  std::mt19937_64& rng_;
};

// Past positions must be on both rasters with margin; future positions must
// stay in front of the camera.
bool visible(const std::vector<Vec2>& local, int tau) {
  const Intrinsics k;
  for (std::size_t t = 0; t < local.size(); ++t) {
    const Vec2 p = local[t];
    if (static_cast<int>(t) < tau) {
      if (p.x < 2.5 || p.x > kTopdownForwardM - 0.5 ||
          std::abs(p.y) > kTopdownLateralM - 0.5) {
        return false;
      }
      const PixelCoord px = project_frontal(lift_to_camera(p, k), k);
      if (!px.projectable || px.u < 1.0 || px.u > kImageWidth - 1.0 || px.v < 1.0 ||
          px.v > kImageHeight - 1.0) {
        return false;
      }
    } else if (p.x < 1.0) {
      return false;
    }
  }
  return true;
}

}  // namespace

Scenario generate_scenario(const GenConfig& cfg, std::uint64_t seed) {
  if (!(cfg.dt > 0.0)) throw InfeasibleConfig("dt must be positive");
  if (cfg.tau < 1 || cfg.delta < 1) throw InfeasibleConfig("tau and delta must be >= 1");
  if (cfg.min_agents < 1 || cfg.max_agents < cfg.min_agents ||
      cfg.max_agents > kMaxAgents) {
    throw InfeasibleConfig("agent count range must satisfy 1 <= min <= max <= " +
                           std::to_string(kMaxAgents));
  }
  if (cfg.speed_scale < 0.0 || cfg.repulsion_radius < 0.0) {
    throw InfeasibleConfig("speed scale and repulsion radius must be >= 0");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x5ce7a210u};
  std::mt19937_64 rng(seq);

  Layout layout;
  Sampler sampler(cfg, layout, rng);
  layout.center = {sampler.uniform(28.0, 42.0), sampler.uniform(-3.0, 3.0)};
  layout.hw_main = sampler.uniform(3.5, 5.0);
  layout.hw_cross = sampler.uniform(3.5, 5.0);

  const int k = cfg.min_agents +
                static_cast<int>(sampler.pick(
                    static_cast<std::uint64_t>(cfg.max_agents - cfg.min_agents + 1)));
  const int steps = cfg.tau + cfg.delta;

  std::vector<AgentSpec> specs;
  std::vector<AgentClass> classes;
  for (int i = 0; i < k; ++i) {
    classes.push_back(sampler.sample_class(i == 0));
    specs.push_back(sampler.sample_agent(classes.back()));
  }

  std::vector<std::vector<Vec2>> tracks;
  bool ok = false;
  for (int attempt = 0; attempt < cfg.max_attempts && !ok; ++attempt) {
    // Respawn agents that start too close to an earlier one.
    for (int i = 1; i < k; ++i) {
      for (int tries = 0; tries < 50; ++tries) {
        bool spaced = true;
        for (int j = 0; j < i; ++j) {
          if (norm(specs[i].start - specs[j].start) < cfg.repulsion_radius + 0.5) {
            spaced = false;
          }
        }
        if (spaced) break;
        specs[i] = sampler.sample_agent(classes[i]);
      }
    }
    tracks = simulate(specs, steps, cfg);
    ok = true;
    for (int i = 0; i < k; ++i) {
      bool spaced = true;
      for (int j = 0; j < i; ++j) {
        if (norm(specs[i].start - specs[j].start) < cfg.repulsion_radius) spaced = false;
      }
      if (!spaced || !visible(tracks[i], cfg.tau)) {
        ok = false;
        specs[i] = sampler.sample_agent(classes[i]);
      }
    }
  }
  if (!ok) {
    throw InfeasibleConfig("could not place " + std::to_string(k) +
                           " agents inside both views after " +
                           std::to_string(cfg.max_attempts) + " attempts");
  }

  // Ego motion in its own first-step frame, then everything to world.
  Scenario s;
  s.seed = seed;
  s.dt = cfg.dt;
  s.tau = cfg.tau;
  s.delta = cfg.delta;
  s.target = 0;
  s.static_map = rasterize(layout);
  Pose first;
  first.position = {sampler.uniform(-200.0, 200.0), sampler.uniform(-200.0, 200.0)};
  first.heading = sampler.uniform(-std::numbers::pi, std::numbers::pi);
  const double ego_speed = sampler.uniform(0.0, 4.0);
  const double yaw_rate = sampler.uniform(-0.05, 0.05);
  Vec2 ego_local{0.0, 0.0};
  double ego_yaw = 0.0;
  for (int t = 0; t < steps; ++t) {
    if (t > 0) {
      ego_local = ego_local + (ego_speed * cfg.dt) * Vec2{std::cos(ego_yaw),
                                                          std::sin(ego_yaw)};
      ego_yaw += yaw_rate * cfg.dt;
    }
    Pose p;
    p.position = t == 0 ? first.position : ego_frame_to_world(ego_local, first);
    p.heading = first.heading + ego_yaw;
    s.ego.push_back(p);
  }
  for (int i = 0; i < k; ++i) {
    AgentTrack track;
    track.id = i;
    track.agent_class = classes[i];
    for (const Vec2& p : tracks[i]) track.positions.push_back(ego_frame_to_world(p, first));
    s.agents.push_back(std::move(track));
  }
  return s;
}

}  // namespace xmodal::scenario
