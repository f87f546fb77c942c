// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "xmodal/scenario/scenario.hpp"

namespace xmodal::scenario {

/// Re-expresses world points in the rigid frame of the ego at the first step.
/// Only ego.front() is read; poses must cover every step of `points`.
std::vector<Vec2> ego_future_eliminate(std::span<const Vec2> points,
                                       std::span<const Pose> ego);

/// Inverse of the above for a single point: first-step ego frame to world.
Vec2 ego_frame_to_world(Vec2 local, const Pose& ego_first);

// Top-down raster: 160 x 160 cells of 0.5 m, 80 m forward, +-40 m lateral.
inline constexpr int kTopdownCells = 160;
inline constexpr double kTopdownCellM = 0.5;
inline constexpr double kTopdownForwardM = 80.0;
inline constexpr double kTopdownLateralM = 40.0;
/// Cell holding the ego position (0, 0).
inline constexpr int kTopdownAnchorRow = 0;
inline constexpr int kTopdownAnchorCol = 80;

struct CellCoord {
  int row = 0;  // longitudinal
  int col = 0;  // lateral
  bool in_extent = false;
  friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

/// Cell of a first-step ego-frame point (x forward, y left). Points outside
/// the extent keep their unclamped indices and are flagged.
CellCoord project_topdown(Vec2 point);

// Frontal image plane.
inline constexpr int kImageWidth = 414;
inline constexpr int kImageHeight = 125;

struct Intrinsics {
  double focal = 160.0;   // pixels
  double cu = 207.0;      // principal point, pixels
  double cv = 40.0;
  double camera_height = 1.65;  // meters above ground
  double agent_height = 0.8;    // reference point height of every agent
};

/// Camera coordinates: x right, y down, z along the optical axis.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
  bool projectable = false;
  bool in_image = false;
};

/// Lifts a first-step ego-frame ground point to camera coordinates at the
/// fixed agent height.
Vec3 lift_to_camera(Vec2 local, const Intrinsics& k);

/// Pinhole projection; non-positive depth is flagged, not projected.
PixelCoord project_frontal(Vec3 point, const Intrinsics& k);

}  // namespace xmodal::scenario
