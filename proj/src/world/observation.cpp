#include "mapnav/world/observation.hpp"

#include <algorithm>

#include "mapnav/error.hpp"

namespace mapnav::world {

int cell_class(const Cell& c) {
  switch (c.kind) {
    case CellKind::Free: return kClassFree;
    case CellKind::Obstacle: return kClassObstacle;
    case CellKind::Landmark: return kClassLandmarkBase + c.landmark;
  }
  return kClassUnseen;
}

PoseDelta relative_delta(const Pose& previous, const Pose& current) {
  const Coord f = forward_vector(previous.heading);
  const Coord r = right_vector(previous.heading);
  const int dx = current.x - previous.x, dy = current.y - previous.y;
  int turns = (static_cast<int>(current.heading) - static_cast<int>(previous.heading) + 4) % 4;
  if (turns == 3) turns = -1;
  return PoseDelta{false, dx * f.x + dy * f.y, dx * r.x + dy * r.y, turns};
}

Coord window_cell(const Pose& pose, int size, int row, int col) {
  return agent_to_world(pose, size - 1 - row, col - size / 2);
}

Observation observe(const World& world, const Pose& pose, int size, int range,
                    const std::optional<Pose>& previous) {
  if (size < 1 || size % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "observation window must be odd, got " + std::to_string(size));
  }
  const std::vector<Coord> vis = visible_cells(world, pose, range);
  Observation obs;
  obs.size = size;
  obs.window.assign(static_cast<std::size_t>(size) * size, kClassUnseen);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Coord w = window_cell(pose, size, r, c);
      if (world.in_bounds(w) && std::binary_search(vis.begin(), vis.end(), w)) {
        obs.window[static_cast<std::size_t>(r) * size + c] =
            static_cast<std::uint8_t>(cell_class(world.at(w)));
      }
    }
  }
  if (previous) obs.delta = relative_delta(*previous, pose);
  return obs;
}

}  // namespace mapnav::world
