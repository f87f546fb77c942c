// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/scenario/view.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace xmodal::scenario {

std::string_view modality_name(Modality m) {
  return m == Modality::kTopdown ? "topdown" : "frontal";
}

Modality modality_from_name(std::string_view name) {
  if (name == "topdown") return Modality::kTopdown;
  if (name == "frontal") return Modality::kFrontal;
  throw std::invalid_argument("unknown modality '" + std::string(name) + "'");
}

namespace {

struct Footprint {
  double length;  // along travel, meters
  double width;
  double height;
};

Footprint footprint(AgentClass c) {
  switch (c) {
    case AgentClass::kVehicle: return {4.5, 1.9, 1.6};
    case AgentClass::kCyclist: return {1.8, 0.6, 1.7};
    case AgentClass::kPedestrian: return {0.6, 0.6, 1.7};
  }
  return {4.5, 1.9, 1.6};
}

Vec2 travel_direction(const std::vector<Vec2>& track, std::size_t t) {
  Vec2 d = t > 0 ? track[t] - track[t - 1]
                 : (track.size() > 1 ? track[1] - track[0] : Vec2{1.0, 0.0});
  const double n = norm(d);
  return n > 1e-9 ? (1.0 / n) * d : Vec2{1.0, 0.0};
}

void set(Raster& r, int row, int col, std::uint8_t value) {
  if (row >= 0 && row < r.height && col >= 0 && col < r.width) {
    r.cells[static_cast<std::size_t>(row) * r.width + col] = value;
  }
}

void draw_topdown_box(Raster& r, Vec2 center, Vec2 dir, const Footprint& f) {
  const CellCoord c = project_topdown(center);
  set(r, c.row, c.col, 1);
  const double reach = 0.5 * std::hypot(f.length, f.width) + kTopdownCellM;
  const int span = static_cast<int>(std::ceil(reach / kTopdownCellM));
  for (int dr = -span; dr <= span; ++dr) {
    for (int dc = -span; dc <= span; ++dc) {
      const int row = c.row + dr;
      const int col = c.col + dc;
      const Vec2 cell_center{(row - kTopdownAnchorRow + 0.5) * kTopdownCellM,
                             (col - kTopdownAnchorCol + 0.5) * kTopdownCellM};
      const Vec2 rel = cell_center - center;
      const double along = rel.x * dir.x + rel.y * dir.y;
      const double across = rel.x * dir.y - rel.y * dir.x;
      if (std::abs(along) <= 0.5 * f.length && std::abs(across) <= 0.5 * f.width) {
        set(r, row, col, 1);
      }
    }
  }
}

Raster blank(int w, int h) {
  return Raster{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
}

}  // namespace

ModalityView render_view(const Scenario& s, Modality m, const Intrinsics& k) {
  validate(s);
  ModalityView view;
  view.modality = m;
  view.tau = s.tau;
  view.delta = s.delta;
  view.target = s.target;
  view.intrinsics = k;

  std::vector<std::vector<Vec2>> local;
  for (const AgentTrack& a : s.agents) {
    local.push_back(ego_future_eliminate(a.positions, s.ego));
  }

  if (m == Modality::kTopdown) {
    const StaticMap& map = s.static_map;
    if (map.width != kTopdownCells || map.height != kTopdownCells ||
        map.cell_m != kTopdownCellM) {
      throw std::invalid_argument("top-down view needs a 160 x 160 map at 0.5 m");
    }
    view.coords = local;
    view.static_raster = Raster{map.width, map.height, map.labels};
    for (int t = 0; t < s.tau; ++t) {
      Raster r = blank(kTopdownCells, kTopdownCells);
      for (std::size_t i = 0; i < local.size(); ++i) {
        draw_topdown_box(r, local[i][t], travel_direction(local[i], t),
                         footprint(s.agents[i].agent_class));
      }
      view.occupancy.push_back(std::move(r));
    }
    return view;
  }

  std::vector<std::vector<double>> depth(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    std::vector<Vec2> px;
    for (const Vec2& p : local[i]) {
      const Vec3 cam = lift_to_camera(p, k);
      const PixelCoord pc = project_frontal(cam, k);
      if (!pc.projectable) {
        throw std::invalid_argument("agent " + std::to_string(s.agents[i].id) +
                                    " is behind the camera");
      }
      px.push_back({pc.u, pc.v});
      depth[i].push_back(cam.z);
    }
    view.coords.push_back(std::move(px));
  }
  for (int t = 0; t < s.tau; ++t) {
    Raster r = blank(kFrontalCanvasWidth, kFrontalCanvasHeight);
    for (std::size_t i = 0; i < local.size(); ++i) {
      const Footprint f = footprint(s.agents[i].agent_class);
      const double z = depth[i][t];
      const Vec2 c = view.coords[i][t];
      const double half_w = 0.5 * k.focal * f.width / z;
      const double half_h = 0.5 * k.focal * f.height / z;
      const int u0 = std::max(0, static_cast<int>(std::floor(c.x - half_w)));
      const int u1 = std::min(kImageWidth - 1, static_cast<int>(std::floor(c.x + half_w)));
      const int v0 = std::max(0, static_cast<int>(std::floor(c.y - half_h)));
      const int v1 = std::min(kImageHeight - 1, static_cast<int>(std::floor(c.y + half_h)));
      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) set(r, v, u, 1);
      }
    }
    view.occupancy.push_back(std::move(r));
  }
  Raster stat = blank(kFrontalCanvasWidth, kFrontalCanvasHeight);
  const StaticMap& map = s.static_map;
  for (int v = 0; v < kImageHeight; ++v) {
    const double vc = v + 0.5;
    if (vc <= k.cv) continue;
    const double z = k.focal * k.camera_height / (vc - k.cv);
    for (int u = 0; u < kImageWidth; ++u) {
      const double lateral = -((u + 0.5) - k.cu) * z / k.focal;
      const Vec2 ground{z, lateral};
      const int row = static_cast<int>(std::floor(ground.x / map.cell_m));
      const int col = map.width / 2 + static_cast<int>(std::floor(ground.y / map.cell_m));
      if (row >= 0 && row < map.height && col >= 0 && col < map.width) {
        set(stat, v, u, map.labels[static_cast<std::size_t>(row) * map.width + col]);
      }
    }
  }
  view.static_raster = std::move(stat);
  return view;
}

std::optional<std::array<int, 2>> raster_cell(const ModalityView& view, Vec2 coord) {
  if (view.modality == Modality::kTopdown) {
    const CellCoord c = project_topdown(coord);
    if (!c.in_extent) return std::nullopt;
    return std::array<int, 2>{c.row, c.col};
  }
  if (coord.x < 0.0 || coord.x >= kImageWidth || coord.y < 0.0 ||
      coord.y >= kImageHeight) {
    return std::nullopt;
  }
  return std::array<int, 2>{static_cast<int>(std::floor(coord.y)),
                            static_cast<int>(std::floor(coord.x))};
}

}  // namespace xmodal::scenario
