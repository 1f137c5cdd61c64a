#pragma once

#include <string>
#include <vector>

#include "mapnav/supervision/bev.hpp"
#include "mapnav/world/world.hpp"

namespace mapnav::harness {

/// P6 image of a BEV map, channels as R/G/B.
std::string render_bev(const supervision::BevMap& map);

/// P6 image of the world grid, one pixel per cell: free white, obstacle
/// black, landmark yellow, goal blue, start green. Every cell the agent
/// entered after the start is red.
std::string render_trajectory(const world::World& world, const std::vector<world::Pose>& trajectory,
                              world::Coord goal);

/// Renders every line of a map dump (JSON lines with a "tokens" field) to
/// `<out_dir>/<episode_id>_<step>.ppm`. Returns the written paths. Throws
/// IoError, ParseError.
std::vector<std::string> render_map_dump(const std::string& jsonl, int dist_bins,
                                         const std::string& out_dir);

}  // namespace mapnav::harness
