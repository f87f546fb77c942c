// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "xmodal/scenario/geometry.hpp"
#include "xmodal/scenario/scenario.hpp"

namespace xmodal::scenario {

enum class Modality : std::uint8_t { kTopdown = 0, kFrontal = 1 };
inline constexpr std::array<Modality, 2> kAllModalities = {Modality::kTopdown,
                                                           Modality::kFrontal};

std::string_view modality_name(Modality m);
Modality modality_from_name(std::string_view name);

/// Row-major byte raster.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  std::uint8_t at(int row, int col) const {
    return cells[static_cast<std::size_t>(row) * width + col];
  }
  friend bool operator==(const Raster&, const Raster&) = default;
};

// The frontal canvas pads the 414 x 125 image plane on the right and bottom
// so that an 8 x 8 feature grid tiles it exactly.
inline constexpr int kFrontalCanvasWidth = 416;
inline constexpr int kFrontalCanvasHeight = 128;

/// One scenario rendered into one modality's coordinate frame: meters for
/// top-down, pixels for frontal. Coordinates cover every step; rasters cover
/// the observation steps.
struct ModalityView {
  Modality modality = Modality::kTopdown;
  int tau = 0;
  int delta = 0;
  std::size_t target = 0;
  std::vector<std::vector<Vec2>> coords;  // [agent][step]
  std::vector<Raster> occupancy;          // one per observation step
  Raster static_raster;
  Intrinsics intrinsics;

  std::size_t num_agents() const { return coords.size(); }
};

/// Renders a scenario after ego-future elimination.
ModalityView render_view(const Scenario& s, Modality m, const Intrinsics& k = {});

/// Raster cell (row, col) holding a modality coordinate, if on the raster.
std::optional<std::array<int, 2>> raster_cell(const ModalityView& view, Vec2 coord);

}  // namespace xmodal::scenario
