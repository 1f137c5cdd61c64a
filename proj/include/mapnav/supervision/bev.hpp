#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mapnav/world/episode.hpp"
#include "mapnav/world/world.hpp"

namespace mapnav::supervision {

using world::Coord;
using world::Pose;
using world::World;

inline constexpr std::uint8_t kOccObstacle = 0;
inline constexpr std::uint8_t kOccUnknown = 128;
inline constexpr std::uint8_t kOccFree = 255;
inline constexpr std::uint8_t kLmOff = 0;
inline constexpr std::uint8_t kLmOn = 255;
inline constexpr std::uint8_t kDistFar = 255;
inline constexpr int kDefaultMapSize = 15;
inline constexpr int kDefaultDMax = 32;

/// Union of visible cells over an episode, in world coordinates.
class ObservedSet {
 public:
  void add(const std::vector<Coord>& cells) { cells_.insert(cells.begin(), cells.end()); }
  void add(Coord c) { cells_.insert(c); }
  bool contains(Coord c) const { return cells_.contains(c); }
  std::size_t size() const { return cells_.size(); }
  const std::set<Coord>& cells() const { return cells_; }
  bool operator==(const ObservedSet&) const = default;

 private:
  std::set<Coord> cells_;
};

/// Egocentric S x S three-channel map. The agent sits at (S/2, S/2) facing
/// row 0.
struct BevMap {
  int size = 0;
  std::vector<std::uint8_t> occupancy;
  std::vector<std::uint8_t> distance;
  std::vector<std::uint8_t> landmark;

  explicit BevMap(int s = 0);
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * size + col; }
  /// Throws IllegalChannelValue when a channel leaves its value set.
  void validate() const;
  bool operator==(const BevMap&) const = default;
};

/// World cell under BEV cell (row, col). For even S the agent cell is
/// (S/2, S/2), so the window extends one cell further ahead and left.
Coord bev_cell(const Pose& pose, int size, int row, int col);

std::vector<std::uint8_t> occupancy_channel(const World& world, const ObservedSet& observed,
                                            const Pose& pose, int size);

/// round(255 * min(d, d_max) / d_max); unreachable, obstacle and
/// off-world cells get 255. Throws GoalBlocked.
std::vector<std::uint8_t> distance_channel(const World& world, Coord goal, const Pose& pose,
                                           int size, int d_max);
std::vector<std::uint8_t> distance_channel(const world::DistanceField& field, const Pose& pose,
                                           int size, int d_max);
std::uint8_t normalize_distance(int d, int d_max);

std::vector<std::uint8_t> landmark_channel(const World& world, const world::Instruction& instruction,
                                           const Pose& pose, int size);

BevMap compose_bev(const World& world, const ObservedSet& observed, const Pose& pose, Coord goal,
                   const world::Instruction& instruction, int size, int d_max);
BevMap compose_bev(const World& world, const ObservedSet& observed, const Pose& pose,
                   const world::DistanceField& goal_field, const world::Instruction& instruction,
                   int size, int d_max);

/// Channel subset used for ablations. Disabled channels hold their
/// least-informative constants (occupancy 128, distance 255, landmark 0).
struct ChannelMask {
  bool occupancy = true;
  bool distance = true;
  bool landmark = true;

  bool any() const { return occupancy || distance || landmark; }
  bool operator==(const ChannelMask&) const = default;
};

/// Parses "all" or a comma list of occupancy/distance/landmark.
ChannelMask parse_channel_mask(std::string_view text);
std::string format_channel_mask(const ChannelMask& mask);
void apply_channel_mask(BevMap& map, const ChannelMask& mask);

/// Binary P6: R = occupancy, G = distance, B = landmark.
std::string to_ppm(const BevMap& map);
BevMap from_ppm(std::string_view bytes);
void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace mapnav::supervision
