#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mapnav/world/world.hpp"

namespace mapnav::world {

/// Per-cell observation classes: Unseen, Free, Obstacle, then one class per
/// landmark id.
inline constexpr int kClassUnseen = 0;
inline constexpr int kClassFree = 1;
inline constexpr int kClassObstacle = 2;
inline constexpr int kClassLandmarkBase = 3;
inline constexpr int kNumCellClasses = kClassLandmarkBase + kMaxLandmarkId + 1;

int cell_class(const Cell& c);

/// Displacement of the agent since the previous observation, expressed in
/// the previous agent frame.
struct PoseDelta {
  bool initial = true;  // no previous observation
  int forward = 0;
  int right = 0;
  int quarter_turns = 0;  // clockwise, in (-2, 2]
  bool operator==(const PoseDelta&) const = default;
};

PoseDelta relative_delta(const Pose& previous, const Pose& current);

/// Egocentric D x D view: the agent sits at the centre of the bottom row
/// facing up. Row 0 is the farthest row ahead.
struct Observation {
  int size = 0;
  std::vector<std::uint8_t> window;  // D*D classes, row-major
  PoseDelta delta;

  int at(int row, int col) const { return window[static_cast<std::size_t>(row) * size + col]; }
  bool operator==(const Observation&) const = default;
};

/// World cell shown at (row, col) of a D x D egocentric window.
Coord window_cell(const Pose& pose, int size, int row, int col);

/// `size` must be odd. Cells outside the visible set (or the world) are
/// Unseen.
Observation observe(const World& world, const Pose& pose, int size, int range,
                    const std::optional<Pose>& previous = std::nullopt);

}  // namespace mapnav::world
