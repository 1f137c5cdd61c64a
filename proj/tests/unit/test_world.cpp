#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "doctest.h"
#include "mapnav/error.hpp"
#include "mapnav/world/episode.hpp"
#include "mapnav/world/generator.hpp"
#include "mapnav/world/observation.hpp"
#include "mapnav/world/world.hpp"

using namespace mapnav;
using namespace mapnav::world;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

const char* kRoom =
    "#######\n"
    "#.....#\n"
    "#.....#\n"
    "#.....#\n"
    "#.....#\n"
    "#.....#\n"
    "#######\n";

// Dijkstra with a binary heap and unit weights, written independently of the
// BFS under test.
std::vector<int> dijkstra(const World& w, Coord goal) {
  const int inf = DistanceField::kUnreachable;
  std::vector<int> dist(static_cast<std::size_t>(w.width()) * w.height(), inf);
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[w.index(goal.x, goal.y)] = 0;
  pq.push({0, static_cast<int>(w.index(goal.x, goal.y))});
  while (!pq.empty()) {
    auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(i)]) continue;
    const int x = i % w.width(), y = i / w.width();
    for (auto [nx, ny] : {std::pair{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}}) {
      if (!w.traversable(nx, ny)) continue;
      const std::size_t j = w.index(nx, ny);
      if (d + 1 < dist[j]) {
        dist[j] = d + 1;
        pq.push({d + 1, static_cast<int>(j)});
      }
    }
  }
  return dist;
}

// Cells on the segment between a and b by exact rational rounding from the
// (y, x)-lower endpoint a.
std::vector<Coord> rational_line(Coord a, Coord b) {
  if (std::tie(b.y, b.x) < std::tie(a.y, a.x)) std::swap(a, b);
  const int dx = b.x - a.x, dy = b.y - a.y;
  const int n = std::max(std::abs(dx), std::abs(dy));
  std::vector<Coord> out;
  for (int t = 0; t <= n; ++t) {
    auto round_frac = [&](int delta) {
      // round(t * delta / n) with halves rounded towards b.
      if (n == 0) return 0;
      const int mag = (2 * t * std::abs(delta) + n) / (2 * n);
      return delta < 0 ? -mag : mag;
    };
    out.push_back({a.x + round_frac(dx), a.y + round_frac(dy)});
  }
  return out;
}

std::set<Coord> visible_oracle(const World& w, const Pose& p, int range) {
  std::set<Coord> out{p.cell()};
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      const Coord f = forward_vector(p.heading), r = right_vector(p.heading);
      const int dx = x - p.x, dy = y - p.y;
      const int fwd = dx * f.x + dy * f.y, lat = dx * r.x + dy * r.y;
      if (fwd < 1 || fwd > range || std::abs(lat) >= fwd) continue;
      bool clear = true;
      for (const Coord& c : rational_line(p.cell(), {x, y})) {
        if (c == p.cell() || c == Coord{x, y}) continue;
        if (!w.traversable(c)) clear = false;
      }
      if (clear) out.insert({x, y});
    }
  }
  return out;
}

WorldGenParams gen16() { return WorldGenParams{}; }

}  // namespace

TEST_CASE("load_world examples and errors") {
  const World w = load_world("####\n#..#\n#..#\n####");
  CHECK(w.width() == 4);
  CHECK(w.free_count() == 4);

  const World l = load_world("#####\n#...#\n#.a.#\n#...#\n#####\n");
  CHECK(l.at(2, 2) == Cell::landmark_cell(0));
  CHECK(l.landmark_ids() == std::vector<int>{0});
  CHECK(format_world(l) == "#####\n#...#\n#.a.#\n#...#\n#####\n");

  CHECK(code_of([] { load_world("#####\n#####\n####"); }) == ErrorCode::RaggedGrid);
  CHECK(code_of([] { load_world("####\n#.?#\n#..#\n####"); }) == ErrorCode::IllegalChar);
  CHECK(code_of([] { load_world("####\n#..#\n#.A#\n####"); }) == ErrorCode::IllegalChar);
  CHECK(code_of([] { load_world("####\n#...\n#..#\n####"); }) == ErrorCode::OpenBorder);
  CHECK(code_of([] { load_world("######\n#a..a#\n#....#\n######"); }) == ErrorCode::InvalidWorld);
  CHECK(code_of([] { load_world("###\n#.#\n###"); }) == ErrorCode::InvalidWorld);
}

TEST_CASE("step kinematics") {
  const World w = load_world("#####\n#...#\n#...#\n#...#\n#####");
  CHECK(step(w, {2, 2, Heading::North}, Action::Forward) == Pose{2, 1, Heading::North});
  CHECK(step(w, {2, 1, Heading::North}, Action::Forward) == Pose{2, 1, Heading::North});
  CHECK(step(w, {2, 2, Heading::North}, Action::TurnRight) == Pose{2, 2, Heading::East});
  CHECK(step(w, {2, 2, Heading::North}, Action::TurnLeft) == Pose{2, 2, Heading::West});
  CHECK(step(w, {2, 2, Heading::West}, Action::Stop) == Pose{2, 2, Heading::West});

  for (std::uint64_t s = 0; s < 20; ++s) {
    const World g = generate_world(s, gen16());
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        if (!g.traversable(x, y)) continue;
        for (int h = 0; h < 4; ++h) {
          for (int a = 0; a < kNumActions; ++a) {
            CHECK(g.valid_pose(step(g, {x, y, static_cast<Heading>(h)}, static_cast<Action>(a))));
          }
        }
      }
    }
  }
}

TEST_CASE("visible_cells examples") {
  const World room = load_world(kRoom);
  const Pose p{3, 5, Heading::North};
  const auto vis = visible_cells(room, p, 4);
  CHECK(std::binary_search(vis.begin(), vis.end(), p.cell()));
  // Open cone: forward f contributes 2f-1 cells; f=1..4 clipped by the room.
  std::set<Coord> expect{p.cell()};
  for (int f = 1; f <= 4; ++f) {
    for (int l = -(f - 1); l <= f - 1; ++l) {
      const Coord c = agent_to_world(p, f, l);
      if (room.in_bounds(c)) expect.insert(c);
    }
  }
  CHECK(std::set<Coord>(vis.begin(), vis.end()) == expect);

  const auto wall = visible_cells(room, {3, 1, Heading::North}, 6);
  CHECK(wall == std::vector<Coord>{{3, 0}, {3, 1}});

  CHECK(visible_cells(room, {3, 3, Heading::East}, 0) == std::vector<Coord>{{3, 3}});
}

TEST_CASE("visible_cells matches ray oracle, range bound and monotonicity") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const World w = generate_world(100 + s, gen16());
    for (int y = 1; y < w.height() - 1; y += 2) {
      for (int x = 1; x < w.width() - 1; x += 2) {
        if (!w.traversable(x, y)) continue;
        for (int h = 0; h < 4; ++h) {
          const Pose p{x, y, static_cast<Heading>(h)};
          std::vector<Coord> prev;
          for (int r = 0; r <= 7; ++r) {
            const auto vis = visible_cells(w, p, r);
            const auto oracle = visible_oracle(w, p, r);
            CHECK(std::set<Coord>(vis.begin(), vis.end()) == oracle);
            for (const Coord& c : vis) {
              CHECK(std::max(std::abs(c.x - x), std::abs(c.y - y)) <= r);
            }
            CHECK(std::includes(vis.begin(), vis.end(), prev.begin(), prev.end()));
            prev = vis;
          }
        }
      }
    }
  }
}

TEST_CASE("geodesic_field examples and Dijkstra oracle") {
  const World room = load_world(kRoom);
  const DistanceField f = geodesic_field(room, {1, 1});
  CHECK(f.at(1, 1) == 0);
  CHECK(f.at(5, 5) == 8);  // Manhattan across a 5x5 interior
  for (int y = 1; y <= 5; ++y) {
    for (int x = 1; x <= 5; ++x) CHECK(f.at(x, y) == (x - 1) + (y - 1));
  }
  CHECK(f.at(0, 0) == DistanceField::kUnreachable);
  CHECK(code_of([&] { geodesic_field(room, {0, 3}); }) == ErrorCode::GoalBlocked);

  const World split = load_world("#######\n#..#..#\n#..#..#\n#######");
  const DistanceField g = geodesic_field(split, {1, 1});
  CHECK(g.at(4, 1) == DistanceField::kUnreachable);

  for (std::uint64_t s = 0; s < 100; ++s) {
    const World w = generate_world(1000 + s, gen16());
    Coord goal{-1, -1};
    for (int i = 0; goal.x < 0; ++i) {
      const int x = 1 + static_cast<int>((s * 7 + i * 13) % 14), y = 1 + static_cast<int>((s * 3 + i * 5) % 14);
      if (w.traversable(x, y)) goal = {x, y};
    }
    CHECK(geodesic_field(w, goal).raw() == dijkstra(w, goal));
  }
}

TEST_CASE("oracle_action against one-step lookahead") {
  const World room = load_world(kRoom);
  const DistanceField f = geodesic_field(room, {3, 1});
  CHECK(oracle_action(room, f, {3, 2, Heading::South}, 1) == Action::Stop);
  CHECK(oracle_action(room, f, {3, 5, Heading::North}, 1) == Action::Forward);
  CHECK(oracle_action(room, f, {3, 5, Heading::South}, 1) == Action::TurnLeft);
  CHECK(oracle_action(room, f, {3, 5, Heading::East}, 1) == Action::TurnLeft);
  CHECK(oracle_action(room, f, {3, 5, Heading::West}, 1) == Action::TurnRight);

  const World split = load_world("#######\n#..#..#\n#..#..#\n#######");
  const DistanceField g = geodesic_field(split, {1, 1});
  CHECK(code_of([&] { oracle_action(split, g, {4, 1, Heading::North}, 1); }) == ErrorCode::Unreachable);

  for (std::uint64_t s = 0; s < 20; ++s) {
    const World w = generate_world(2000 + s, gen16());
    const Coord goal = w.landmark_cells(w.landmark_ids().front()).front();
    const DistanceField d = geodesic_field(w, goal);
    for (int y = 0; y < w.height(); ++y) {
      for (int x = 0; x < w.width(); ++x) {
        if (!w.traversable(x, y)) continue;
        for (int h = 0; h < 4; ++h) {
          const Pose p{x, y, static_cast<Heading>(h)};
          const Action a = oracle_action(w, d, p, 1);
          if (d.at(x, y) <= 1) {
            CHECK(a == Action::Stop);
            continue;
          }
          auto better = [&](Heading hh) {
            const Pose n = step(w, {x, y, hh}, Action::Forward);
            return d.at(n.x, n.y) < d.at(x, y);
          };
          Action expect = Action::TurnLeft;
          if (better(p.heading)) {
            expect = Action::Forward;
          } else if (better(turn_left(p.heading))) {
            expect = Action::TurnLeft;
          } else if (better(turn_right(p.heading))) {
            expect = Action::TurnRight;
          }
          CHECK(a == expect);
        }
      }
    }
  }
}

TEST_CASE("instruction grammar") {
  const Instruction a = parse_instruction("go to the sofa");
  CHECK(a.landmark_ids == std::vector<int>{2});
  CHECK(a.text() == "go to the sofa");
  const Instruction b = parse_instruction("walk past the chair then stop at the tv");
  CHECK(b.landmark_ids == std::vector<int>{0, 18});
  const Instruction c = parse_instruction("turn left at the lamp and go to the bed");
  CHECK(c.landmark_ids == std::vector<int>{4, 3});
  CHECK(instruction_from_tokens(c.tokens) == c);
  CHECK(code_of([] { parse_instruction("go to sofa"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_instruction("go to the banana"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_instruction("turn up at the lamp and go to the bed"); }) == ErrorCode::ParseError);
  CHECK(kNumWords <= 64);
  for (int i = 0; i < kNumWords; ++i) CHECK(word_id(word_text(i)) == i);
}

TEST_CASE("make_episode contract") {
  const World w = generate_world(7, gen16());
  const Episode e1 = make_episode(w, "w7", 42);
  const Episode e2 = make_episode(w, "w7", 42);
  CHECK(e1 == e2);
  CHECK(episode_to_json(e1) == episode_to_json(e2));
  CHECK(episode_from_json(episode_to_json(e1)) == e1);

  const World empty = load_world("######\n#....#\n#....#\n######");
  CHECK(code_of([&] { make_episode(empty, "e", 1); }) == ErrorCode::NoValidEpisode);

  const EpisodeParams params;
  std::set<std::size_t> templates;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const World world = generate_world(s, gen16());
    const Episode e = make_episode(world, "w", s, params);
    REQUIRE(!e.oracle_path.empty());
    CHECK(static_cast<int>(e.oracle_path.size()) <= params.max_steps);
    CHECK(std::count(e.oracle_path.begin(), e.oracle_path.end(), Action::Stop) == 1);
    CHECK(e.oracle_path.back() == Action::Stop);
    Pose p = e.start;
    for (Action a : e.oracle_path) p = step(world, p, a);
    CHECK(geodesic_field(world, e.goal).at(p.x, p.y) <= params.success_radius);

    const int d0 = geodesic_field(world, e.goal).at(e.start.x, e.start.y);
    CHECK(d0 >= params.min_length);
    CHECK(d0 <= params.max_length);
    CHECK(world.at(e.goal).kind == CellKind::Free);
    const int target = e.instruction.landmark_ids.back();
    bool adjacent = false;
    for (const Coord& c : world.landmark_cells(target)) {
      adjacent |= std::abs(c.x - e.goal.x) + std::abs(c.y - e.goal.y) == 1;
    }
    CHECK(adjacent);
    CHECK(e.instruction.landmark_ids.size() >= 1);
    CHECK(e.instruction.landmark_ids.size() <= 3);
    templates.insert(e.instruction.tokens.size());
  }
  CHECK(templates.size() == 3);
}

TEST_CASE("observation window") {
  const World room = load_world(
      "#######\n"
      "#.....#\n"
      "#..a..#\n"
      "#.....#\n"
      "#.....#\n"
      "#.....#\n"
      "#######\n");
  const Pose p{3, 4, Heading::North};
  const Observation o = observe(room, p, 5, 6);
  CHECK(o.delta.initial);
  CHECK(o.at(4, 2) == kClassFree);                   // agent cell
  CHECK(o.at(2, 2) == kClassLandmarkBase + 0);       // two cells ahead
  CHECK(o.at(4, 0) == kClassUnseen);                 // beside the agent, outside the cone
  CHECK(o.at(0, 2) == kClassObstacle);               // north border
  CHECK(window_cell(p, 5, 4, 2) == p.cell());

  const Pose east{3, 4, Heading::East};
  CHECK(window_cell(east, 5, 3, 2) == Coord{4, 4});
  CHECK(window_cell(east, 5, 4, 3) == Coord{3, 5});  // right of an east-facing agent is south

  const Observation moved = observe(room, {3, 3, Heading::North}, 5, 6, p);
  CHECK(moved.delta == PoseDelta{false, 1, 0, 0});
  CHECK(relative_delta(p, east) == PoseDelta{false, 0, 0, 1});
  CHECK(relative_delta(p, {3, 4, Heading::West}) == PoseDelta{false, 0, 0, -1});
  CHECK(relative_delta(east, {4, 4, Heading::East}) == PoseDelta{false, 1, 0, 0});
  CHECK(code_of([&] { observe(room, p, 4, 6); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("generate_world invariants") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const World w = generate_world(s, gen16());
    CHECK(w == generate_world(s, gen16()));
    CHECK(static_cast<int>(w.landmark_ids().size()) >= 4);
    CHECK(load_world(format_world(w)) == w);
    // Single open region.
    Coord any{-1, -1};
    std::size_t open = 0;
    for (int y = 0; y < w.height(); ++y) {
      for (int x = 0; x < w.width(); ++x) {
        if (w.traversable(x, y)) {
          ++open;
          any = {x, y};
        }
      }
    }
    const DistanceField f = geodesic_field(w, any);
    std::size_t reached = 0;
    for (int d : f.raw()) reached += d != DistanceField::kUnreachable;
    CHECK(reached == open);
  }
  CHECK(code_of([] { generate_world(1, WorldGenParams{3, 16}); }) == ErrorCode::InvalidConfig);
}
