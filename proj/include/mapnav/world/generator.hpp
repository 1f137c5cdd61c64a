#pragma once

#include <cstdint>

#include "mapnav/world/world.hpp"

namespace mapnav::world {

struct WorldGenParams {
  int width = 16;
  int height = 16;
  int wall_segments = 3;
  int obstacle_blobs = 4;
  int min_landmarks = 4;
  int max_landmarks = 6;
  int max_cluster_cells = 2;
};

/// Procedural closed world: interior walls with door gaps, scattered
/// obstacles and landmark clusters with distinct ids. Only the largest
/// connected open region is kept, so every open cell reaches every other.
/// Deterministic in `seed`.
World generate_world(std::uint64_t seed, const WorldGenParams& params = {});

}  // namespace mapnav::world
