#include "mapnav/world/world.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <tuple>

#include "mapnav/error.hpp"

namespace mapnav::world {

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Stop: return "stop";
    case Action::Forward: return "forward";
    case Action::TurnLeft: return "left";
    case Action::TurnRight: return "right";
  }
  return "?";
}

Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

Coord forward_vector(Heading h) {
  switch (h) {
    case Heading::North: return {0, -1};
    case Heading::East: return {1, 0};
    case Heading::South: return {0, 1};
    case Heading::West: return {-1, 0};
  }
  return {0, 0};
}

Coord right_vector(Heading h) { return forward_vector(turn_right(h)); }

Coord agent_to_world(const Pose& pose, int forward, int right) {
  const Coord f = forward_vector(pose.heading);
  const Coord r = right_vector(pose.heading);
  return {pose.x + forward * f.x + right * r.x, pose.y + forward * f.y + right * r.y};
}

// ---------------------------------------------------------------- World

World::World(int width, int height, std::vector<Cell> cells)
    : width_(width), height_(height), cells_(std::move(cells)) {
  if (width < kMinWorldSide || height < kMinWorldSide || width > kMaxWorldSide ||
      height > kMaxWorldSide) {
    throw Error(ErrorCode::InvalidWorld, "world sides must lie in [4, 64], got " +
                                             std::to_string(width) + "x" + std::to_string(height));
  }
  if (cells_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidWorld, "cell count does not match dimensions");
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
      if (border && at(x, y).kind != CellKind::Obstacle) {
        throw Error(ErrorCode::OpenBorder,
                    "border cell (" + std::to_string(x) + "," + std::to_string(y) + ") is open");
      }
    }
  }
  // Each landmark id must form exactly one 4-connected cluster.
  std::vector<int> seen_clusters(kMaxLandmarkId + 1, 0);
  std::vector<bool> visited(cells_.size(), false);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Cell& c = at(x, y);
      if (c.kind != CellKind::Landmark || visited[index(x, y)]) continue;
      if (c.landmark < 0 || c.landmark > kMaxLandmarkId) {
        throw Error(ErrorCode::InvalidWorld, "landmark id out of range");
      }
      if (++seen_clusters[static_cast<std::size_t>(c.landmark)] > 1) {
        throw Error(ErrorCode::InvalidWorld,
                    "landmark " + std::string(1, static_cast<char>('a' + c.landmark)) +
                        " forms more than one cluster");
      }
      std::deque<Coord> queue{{x, y}};
      visited[index(x, y)] = true;
      while (!queue.empty()) {
        const Coord p = queue.front();
        queue.pop_front();
        constexpr int dx[] = {1, -1, 0, 0};
        constexpr int dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = p.x + dx[k], ny = p.y + dy[k];
          if (!in_bounds(nx, ny) || visited[index(nx, ny)]) continue;
          if (at(nx, ny) == c) {
            visited[index(nx, ny)] = true;
            queue.push_back({nx, ny});
          }
        }
      }
    }
  }
  for (int id = 0; id <= kMaxLandmarkId; ++id) {
    if (seen_clusters[static_cast<std::size_t>(id)] > 0) landmark_ids_.push_back(id);
  }
}

std::vector<Coord> World::landmark_cells(int id) const {
  std::vector<Coord> out;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (at(x, y).kind == CellKind::Landmark && at(x, y).landmark == id) out.push_back({x, y});
    }
  }
  return out;
}

std::size_t World::free_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const Cell& c) { return c.kind == CellKind::Free; }));
}

World load_world(std::string_view text) {
  std::vector<std::string_view> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    rows.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (rows.empty()) throw Error(ErrorCode::RaggedGrid, "empty world");
  const std::size_t width = rows.front().size();
  std::vector<Cell> cells;
  cells.reserve(width * rows.size());
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != width) {
      throw Error(ErrorCode::RaggedGrid, "row " + std::to_string(y) + " has length " +
                                             std::to_string(rows[y].size()) + ", expected " +
                                             std::to_string(width));
    }
    for (std::size_t x = 0; x < width; ++x) {
      const char ch = rows[y][x];
      if (ch == '.') {
        cells.push_back(Cell::free());
      } else if (ch == '#') {
        cells.push_back(Cell::obstacle());
      } else if (ch >= 'a' && ch <= 'z') {
        cells.push_back(Cell::landmark_cell(ch - 'a'));
      } else {
        throw Error(ErrorCode::IllegalChar, "character code " + std::to_string(static_cast<int>(
                                                                    static_cast<unsigned char>(ch))) +
                                                " at (" + std::to_string(x) + "," +
                                                std::to_string(y) + ")");
      }
    }
  }
  return World(static_cast<int>(width), static_cast<int>(rows.size()), std::move(cells));
}

std::string format_world(const World& world) {
  std::string out;
  out.reserve(static_cast<std::size_t>(world.width() + 1) * world.height());
  for (int y = 0; y < world.height(); ++y) {
    for (int x = 0; x < world.width(); ++x) {
      const Cell& c = world.at(x, y);
      switch (c.kind) {
        case CellKind::Free: out.push_back('.'); break;
        case CellKind::Obstacle: out.push_back('#'); break;
        case CellKind::Landmark: out.push_back(static_cast<char>('a' + c.landmark)); break;
      }
    }
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------- kinematics

Pose step(const World& world, const Pose& pose, Action action) {
  Pose next = pose;
  switch (action) {
    case Action::Stop: break;
    case Action::TurnLeft: next.heading = turn_left(pose.heading); break;
    case Action::TurnRight: next.heading = turn_right(pose.heading); break;
    case Action::Forward: {
      const Coord f = forward_vector(pose.heading);
      if (world.traversable(pose.x + f.x, pose.y + f.y)) {
        next.x += f.x;
        next.y += f.y;
      }
      break;
    }
  }
  return next;
}

// ---------------------------------------------------------------- visibility

namespace {

// True when every cell strictly between a and b on the Bresenham line is
// traversable.
bool clear_line(const World& world, Coord a, Coord b) {
  if (std::tie(b.y, b.x) < std::tie(a.y, a.x)) std::swap(a, b);
  const int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x, y = a.y;
  while (true) {
    if (x == b.x && y == b.y) return true;
    if (!(x == a.x && y == a.y) && !world.traversable(x, y)) return false;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

std::vector<Coord> visible_cells(const World& world, const Pose& pose, int range) {
  std::vector<Coord> out{pose.cell()};
  for (int f = 1; f <= range; ++f) {
    for (int l = -(f - 1); l <= f - 1; ++l) {
      const Coord c = agent_to_world(pose, f, l);
      if (!world.in_bounds(c)) continue;
      if (clear_line(world, pose.cell(), c)) out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- geodesics

DistanceField geodesic_field(const World& world, const std::vector<Coord>& sources) {
  std::vector<int> dist(static_cast<std::size_t>(world.width()) * world.height(),
                        DistanceField::kUnreachable);
  std::deque<Coord> queue;
  for (const Coord& s : sources) {
    if (!world.traversable(s)) {
      throw Error(ErrorCode::GoalBlocked,
                  "goal (" + std::to_string(s.x) + "," + std::to_string(s.y) + ") is not traversable");
    }
    if (dist[world.index(s.x, s.y)] != 0) {
      dist[world.index(s.x, s.y)] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const Coord p = queue.front();
    queue.pop_front();
    const int d = dist[world.index(p.x, p.y)];
    constexpr int dx[] = {1, -1, 0, 0};
    constexpr int dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = p.x + dx[k], ny = p.y + dy[k];
      if (!world.traversable(nx, ny)) continue;
      int& nd = dist[world.index(nx, ny)];
      if (nd == DistanceField::kUnreachable) {
        nd = d + 1;
        queue.push_back({nx, ny});
      }
    }
  }
  return DistanceField(world.width(), world.height(), std::move(dist));
}

DistanceField geodesic_field(const World& world, Coord goal) {
  return geodesic_field(world, std::vector<Coord>{goal});
}

Action oracle_action(const World& world, const DistanceField& field, const Pose& pose,
                     int success_radius) {
  const int here = field.at(pose.x, pose.y);
  if (here == DistanceField::kUnreachable) {
    throw Error(ErrorCode::Unreachable, "goal unreachable from (" + std::to_string(pose.x) + "," +
                                            std::to_string(pose.y) + ")");
  }
  if (here <= success_radius) return Action::Stop;
  auto improves = [&](Heading h) {
    const Coord f = forward_vector(h);
    const Coord n{pose.x + f.x, pose.y + f.y};
    return world.traversable(n) && field.at(n) == here - 1;
  };
  if (improves(pose.heading)) return Action::Forward;
  if (improves(turn_left(pose.heading))) return Action::TurnLeft;
  if (improves(turn_right(pose.heading))) return Action::TurnRight;
  return Action::TurnLeft;
}

}  // namespace mapnav::world
