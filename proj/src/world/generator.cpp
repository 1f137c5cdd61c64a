#include "mapnav/world/generator.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>

#include "mapnav/error.hpp"

namespace mapnav::world {

namespace {

class Grid {
 public:
  Grid(int w, int h) : w_(w), h_(h), cells_(static_cast<std::size_t>(w) * h, Cell::free()) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) at(x, y) = Cell::obstacle();
      }
    }
  }
  Cell& at(int x, int y) { return cells_[static_cast<std::size_t>(y) * w_ + x]; }
  bool interior(int x, int y) const { return x > 0 && y > 0 && x < w_ - 1 && y < h_ - 1; }
  int w() const { return w_; }
  int h() const { return h_; }
  std::vector<Cell>& cells() { return cells_; }

 private:
  int w_, h_;
  std::vector<Cell> cells_;
};

struct Rng {
  std::mt19937_64 eng;
  int uniform(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

void add_wall(Grid& g, Rng& rng) {
  const bool horizontal = rng.eng() & 1U;
  const int len = horizontal ? g.w() - 2 : g.h() - 2;
  const int across = horizontal ? g.h() - 2 : g.w() - 2;
  if (len < 3 || across < 3) return;
  const int line = rng.uniform(2, across - 1);
  const int first = rng.uniform(1, std::max(1, len / 3));
  const int last = rng.uniform(std::min(len, 2 * len / 3 + 1), len);
  const int door = rng.uniform(first, last);
  const int door_w = rng.uniform(1, 2);
  for (int i = first; i <= last; ++i) {
    if (i >= door && i < door + door_w) continue;
    if (horizontal) {
      g.at(i, line) = Cell::obstacle();
    } else {
      g.at(line, i) = Cell::obstacle();
    }
  }
}

void add_blob(Grid& g, Rng& rng) {
  const int bw = rng.uniform(1, 2), bh = rng.uniform(1, 2);
  const int x0 = rng.uniform(1, g.w() - 2), y0 = rng.uniform(1, g.h() - 2);
  for (int y = y0; y < y0 + bh; ++y) {
    for (int x = x0; x < x0 + bw; ++x) {
      if (g.interior(x, y)) g.at(x, y) = Cell::obstacle();
    }
  }
}

constexpr int kDx[] = {1, -1, 0, 0};
constexpr int kDy[] = {0, 0, 1, -1};

bool touches_other_landmark(Grid& g, int x, int y, int id) {
  for (int k = 0; k < 4; ++k) {
    const Cell& c = g.at(x + kDx[k], y + kDy[k]);
    if (c.kind == CellKind::Landmark && c.landmark != id) return true;
  }
  return false;
}

void add_landmark(Grid& g, Rng& rng, int id, int max_cells) {
  std::vector<Coord> free;
  for (int y = 1; y < g.h() - 1; ++y) {
    for (int x = 1; x < g.w() - 1; ++x) {
      if (g.at(x, y).kind == CellKind::Free && !touches_other_landmark(g, x, y, id)) {
        free.push_back({x, y});
      }
    }
  }
  if (free.empty()) return;
  std::vector<Coord> cluster{free[static_cast<std::size_t>(rng.eng() % free.size())]};
  g.at(cluster[0].x, cluster[0].y) = Cell::landmark_cell(id);
  const int target = rng.uniform(1, max_cells);
  while (static_cast<int>(cluster.size()) < target) {
    std::vector<Coord> frontier;
    for (const Coord& c : cluster) {
      for (int k = 0; k < 4; ++k) {
        const int nx = c.x + kDx[k], ny = c.y + kDy[k];
        if (g.interior(nx, ny) && g.at(nx, ny).kind == CellKind::Free &&
            !touches_other_landmark(g, nx, ny, id)) {
          frontier.push_back({nx, ny});
        }
      }
    }
    if (frontier.empty()) break;
    const Coord c = frontier[static_cast<std::size_t>(rng.eng() % frontier.size())];
    g.at(c.x, c.y) = Cell::landmark_cell(id);
    cluster.push_back(c);
  }
}

// Turns every traversable cell outside the largest 4-connected region into
// an obstacle.
void keep_largest_region(Grid& g) {
  std::vector<int> label(g.cells().size(), -1);
  std::vector<int> sizes;
  for (int y = 0; y < g.h(); ++y) {
    for (int x = 0; x < g.w(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.w() + x;
      if (label[i] >= 0 || !g.at(x, y).traversable()) continue;
      const int id = static_cast<int>(sizes.size());
      int n = 0;
      std::deque<Coord> queue{{x, y}};
      label[i] = id;
      while (!queue.empty()) {
        const Coord p = queue.front();
        queue.pop_front();
        ++n;
        for (int k = 0; k < 4; ++k) {
          const int nx = p.x + kDx[k], ny = p.y + kDy[k];
          const std::size_t j = static_cast<std::size_t>(ny) * g.w() + nx;
          if (label[j] < 0 && g.at(nx, ny).traversable()) {
            label[j] = id;
            queue.push_back({nx, ny});
          }
        }
      }
      sizes.push_back(n);
    }
  }
  if (sizes.empty()) return;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] >= 0 && label[i] != best) g.cells()[i] = Cell::obstacle();
  }
}

}  // namespace

World generate_world(std::uint64_t seed, const WorldGenParams& p) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (p.width < kMinWorldSide || p.height < kMinWorldSide || p.width > kMaxWorldSide ||
      p.height > kMaxWorldSide) {
    fail("world sides must lie in [4, 64]");
  }
  if (p.min_landmarks < 0 || p.max_landmarks < p.min_landmarks || p.max_landmarks > kMaxLandmarkId + 1) {
    fail("landmark count bounds must satisfy 0 <= min <= max <= 26");
  }
  if (p.max_cluster_cells < 1 || p.wall_segments < 0 || p.obstacle_blobs < 0) {
    fail("negative generator counts");
  }
  Rng rng{std::mt19937_64(seed)};
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Grid g(p.width, p.height);
    for (int i = 0; i < p.wall_segments; ++i) add_wall(g, rng);
    for (int i = 0; i < p.obstacle_blobs; ++i) add_blob(g, rng);
    std::vector<int> ids(kMaxLandmarkId + 1);
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = kMaxLandmarkId; i > 0; --i) std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(rng.uniform(0, i))]);
    const int n = rng.uniform(p.min_landmarks, p.max_landmarks);
    for (int i = 0; i < n; ++i) add_landmark(g, rng, ids[static_cast<std::size_t>(i)], p.max_cluster_cells);
    keep_largest_region(g);
    World w(p.width, p.height, std::move(g.cells()));
    if (static_cast<int>(w.landmark_ids().size()) >= p.min_landmarks && w.free_count() > 0) return w;
  }
  throw Error(ErrorCode::InvalidConfig,
              "could not place " + std::to_string(p.min_landmarks) + " landmarks in a " +
                  std::to_string(p.width) + "x" + std::to_string(p.height) + " world");
}

}  // namespace mapnav::world
