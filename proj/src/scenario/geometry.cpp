// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/scenario/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace xmodal::scenario {

std::vector<Vec2> ego_future_eliminate(std::span<const Vec2> points,
                                       std::span<const Pose> ego) {
  if (ego.size() < points.size()) {
    throw std::invalid_argument("ego poses cover " + std::to_string(ego.size()) +
                                " steps, points cover " +
                                std::to_string(points.size()));
  }
  std::vector<Vec2> out;
  out.reserve(points.size());
  if (points.empty()) return out;
  const Pose& first = ego.front();
  const double c = std::cos(first.heading);
  const double s = std::sin(first.heading);
  for (const Vec2& p : points) {
    const Vec2 d = p - first.position;
    out.push_back({c * d.x + s * d.y, -s * d.x + c * d.y});
  }
  return out;
}

Vec2 ego_frame_to_world(Vec2 local, const Pose& ego_first) {
  const double c = std::cos(ego_first.heading);
  const double s = std::sin(ego_first.heading);
  return {ego_first.position.x + c * local.x - s * local.y,
          ego_first.position.y + s * local.x + c * local.y};
}

CellCoord project_topdown(Vec2 point) {
  CellCoord cell;
  cell.row = kTopdownAnchorRow + static_cast<int>(std::floor(point.x / kTopdownCellM));
  cell.col = kTopdownAnchorCol + static_cast<int>(std::floor(point.y / kTopdownCellM));
  cell.in_extent = cell.row >= 0 && cell.row < kTopdownCells && cell.col >= 0 &&
                   cell.col < kTopdownCells;
  return cell;
}

Vec3 lift_to_camera(Vec2 local, const Intrinsics& k) {
  return {-local.y, k.camera_height - k.agent_height, local.x};
}

PixelCoord project_frontal(Vec3 point, const Intrinsics& k) {
  PixelCoord px;
  if (!(point.z > 0.0)) return px;
  px.projectable = true;
  px.u = k.focal * point.x / point.z + k.cu;
  px.v = k.focal * point.y / point.z + k.cv;
  px.in_image = px.u >= 0.0 && px.u < kImageWidth && px.v >= 0.0 &&
                px.v < kImageHeight;
  return px;
}

}  // namespace xmodal::scenario
