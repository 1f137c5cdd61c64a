#pragma once

#include <climits>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mapnav::world {

enum class CellKind : std::uint8_t { Free, Obstacle, Landmark };

inline constexpr int kMaxLandmarkId = 25;
inline constexpr int kMinWorldSide = 4;
inline constexpr int kMaxWorldSide = 64;

struct Cell {
  CellKind kind = CellKind::Free;
  int landmark = -1;  // valid only for CellKind::Landmark

  static Cell free() { return {}; }
  static Cell obstacle() { return {CellKind::Obstacle, -1}; }
  static Cell landmark_cell(int id) { return {CellKind::Landmark, id}; }
  bool traversable() const { return kind != CellKind::Obstacle; }
  bool operator==(const Cell&) const = default;
};

struct Coord {
  int x = 0;
  int y = 0;
  auto operator<=>(const Coord&) const = default;
};

enum class Heading : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

struct Pose {
  int x = 0;
  int y = 0;
  Heading heading = Heading::North;
  Coord cell() const { return {x, y}; }
  bool operator==(const Pose&) const = default;
};

/// Integer codes are part of the serialized formats and must not change.
enum class Action : std::uint8_t { Stop = 0, Forward = 1, TurnLeft = 2, TurnRight = 3 };
inline constexpr int kNumActions = 4;

std::string_view action_name(Action a);
Heading turn_left(Heading h);
Heading turn_right(Heading h);
/// Unit step along the heading (North is -y).
Coord forward_vector(Heading h);
/// Unit step to the agent's right.
Coord right_vector(Heading h);

/// World-frame cell of a point given in the agent frame (forward, right).
Coord agent_to_world(const Pose& pose, int forward, int right);

/// Static closed grid world. Construction enforces the invariants: side
/// lengths in [4, 64], obstacle border, landmark ids in [0, 25] and each id
/// forming a single 4-connected cluster.
class World {
 public:
  World(int width, int height, std::vector<Cell> cells);

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(Coord c) const { return in_bounds(c.x, c.y); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
  const Cell& at(int x, int y) const { return cells_[index(x, y)]; }
  const Cell& at(Coord c) const { return at(c.x, c.y); }
  /// In bounds and not an obstacle.
  bool traversable(int x, int y) const { return in_bounds(x, y) && at(x, y).traversable(); }
  bool traversable(Coord c) const { return traversable(c.x, c.y); }
  bool valid_pose(const Pose& p) const { return traversable(p.x, p.y); }

  /// Ids present in the world, ascending.
  const std::vector<int>& landmark_ids() const { return landmark_ids_; }
  /// Cells of one landmark cluster, row-major order; empty if absent.
  std::vector<Coord> landmark_cells(int id) const;
  std::size_t free_count() const;

  bool operator==(const World& o) const {
    return width_ == o.width_ && height_ == o.height_ && cells_ == o.cells_;
  }

 private:
  int width_;
  int height_;
  std::vector<Cell> cells_;
  std::vector<int> landmark_ids_;
};

/// Parses the ASCII world format: one row per line, '.' free, '#' obstacle,
/// 'a'..'z' landmark 0..25. A trailing newline is accepted; trailing
/// whitespace is not. Throws RaggedGrid, IllegalChar, OpenBorder or
/// InvalidWorld.
World load_world(std::string_view text);
std::string format_world(const World& world);

/// Kinematics: turns rotate in place, Forward moves one cell unless the
/// target is an obstacle or off-grid (then the pose is unchanged), Stop is
/// a no-op.
Pose step(const World& world, const Pose& pose, Action action);

/// Cells in the agent's open 90-degree frontal cone (forward > |lateral|)
/// up to `range` cells ahead, with an unobstructed line of sight. The
/// line between two cells is traced by Bresenham from the lower endpoint
/// (in (y, x) order), so visibility is symmetric. Obstacles are visible and
/// block what lies behind them. The agent's own cell is always included.
/// Sorted ascending.
std::vector<Coord> visible_cells(const World& world, const Pose& pose, int range);

/// 4-connected shortest-path distances through traversable cells.
class DistanceField {
 public:
  static constexpr int kUnreachable = INT_MAX;

  DistanceField(int width, int height, std::vector<int> dist)
      : width_(width), height_(height), dist_(std::move(dist)) {}
  int width() const { return width_; }
  int height() const { return height_; }
  int at(int x, int y) const { return dist_[static_cast<std::size_t>(y) * width_ + x]; }
  int at(Coord c) const { return at(c.x, c.y); }
  bool reachable(Coord c) const { return at(c) != kUnreachable; }
  const std::vector<int>& raw() const { return dist_; }

 private:
  int width_;
  int height_;
  std::vector<int> dist_;
};

/// Breadth-first distances to `goal`. Throws GoalBlocked when the goal is
/// an obstacle (or off-grid).
DistanceField geodesic_field(const World& world, Coord goal);

/// Multi-source variant: distance to the nearest of `sources`.
DistanceField geodesic_field(const World& world, const std::vector<Coord>& sources);

/// Expert step towards the goal of `field`: Stop within `success_radius`,
/// otherwise the first action of a geodesic-optimal move, preferring
/// Forward, then TurnLeft, then TurnRight; a best neighbour behind the
/// agent yields TurnLeft. Throws Unreachable.
Action oracle_action(const World& world, const DistanceField& field, const Pose& pose,
                     int success_radius);

}  // namespace mapnav::world
