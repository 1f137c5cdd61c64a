#include <algorithm>

#include "doctest.h"
#include "mapnav/error.hpp"
#include "mapnav/supervision/bev.hpp"
#include "mapnav/world/generator.hpp"

using namespace mapnav;
using namespace mapnav::supervision;
using world::Heading;
using world::Instruction;

namespace {

const char* kFixture =
    "#######\n"
    "#.....#\n"
    "#..#..#\n"
    "#.....#\n"
    "#.a...#\n"
    "#...b.#\n"
    "#######\n";

ObservedSet everything(const World& w) {
  ObservedSet o;
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) o.add(Coord{x, y});
  }
  return o;
}

}  // namespace

TEST_CASE("occupancy channel") {
  const World w = world::load_world(kFixture);
  const Pose p{3, 3, Heading::North};
  ObservedSet none;
  const auto blank = occupancy_channel(w, none, p, 5);
  CHECK(std::all_of(blank.begin(), blank.end(), [](auto v) { return v == kOccUnknown; }));

  ObservedSet seen;
  seen.add(world::visible_cells(w, p, 6));
  const auto occ = occupancy_channel(w, seen, p, 3);
  // 3x3 window, centre (1,1): the wall at (3,2) is one row up.
  CHECK(occ[0 * 3 + 1] == kOccObstacle);
  CHECK(occ[1 * 3 + 1] == kOccFree);
  CHECK(occ[1 * 3 + 0] == kOccUnknown);  // beside the agent, never in the cone
  CHECK(occ[2 * 3 + 1] == kOccUnknown);  // behind the agent

  // Off-world cells stay unknown even when "observed".
  const auto edge = occupancy_channel(w, everything(w), {1, 1, Heading::North}, 5);
  CHECK(edge[0] == kOccUnknown);
  CHECK(edge[1 * 5 + 2] == kOccObstacle);
}

TEST_CASE("distance channel") {
  const World w = world::load_world(kFixture);
  const Coord goal{5, 1};
  const auto d = distance_channel(w, goal, {5, 3, Heading::North}, 5, 32);
  CHECK(d[0 * 5 + 2] == 0);              // goal two rows ahead
  CHECK(d[1 * 5 + 2] == normalize_distance(1, 32));
  CHECK(d[0 * 5 + 3] == 255);            // east border wall
  CHECK(normalize_distance(16, 32) == 128);
  CHECK(normalize_distance(32, 32) == 255);
  CHECK(normalize_distance(99, 32) == 255);
  CHECK(normalize_distance(0, 32) == 0);

  const World split = world::load_world("#######\n#..#..#\n#..#..#\n#######");
  const auto s = distance_channel(split, {1, 1}, {2, 1, Heading::East}, 3, 32);
  CHECK(s[0 * 3 + 1] == 255);  // the partition wall
  CHECK(s[1 * 3 + 1] == normalize_distance(1, 32));
  const auto far = distance_channel(split, {1, 1}, {4, 1, Heading::East}, 3, 32);
  CHECK(far[1 * 3 + 1] == 255);  // walled off from the goal
  CHECK_THROWS_AS(distance_channel(split, {3, 1}, {1, 1, Heading::North}, 3, 32), Error);
}

TEST_CASE("landmark channel") {
  const World w = world::load_world(kFixture);
  const Instruction only_a = world::parse_instruction("go to the chair");
  const Pose p{2, 3, Heading::North};
  const auto lm = landmark_channel(w, only_a, p, 5);
  // 'a' at (2,4) sits one row behind the agent, 'b' at (4,5) is not referenced.
  CHECK(lm[3 * 5 + 2] == kLmOn);
  CHECK(std::count(lm.begin(), lm.end(), kLmOn) == 1);
  const Instruction both = world::parse_instruction("walk past the table then stop at the chair");
  const auto lm2 = landmark_channel(w, both, p, 5);
  CHECK(std::count(lm2.begin(), lm2.end(), kLmOn) == 2);
  const auto tiny = landmark_channel(w, only_a, {5, 1, Heading::North}, 3);
  CHECK(std::all_of(tiny.begin(), tiny.end(), [](auto v) { return v == kLmOff; }));
}

TEST_CASE("compose_bev invariants over random worlds") {
  int checked = 0;
  for (std::uint64_t s = 0; checked < 1000; ++s) {
    const World w = world::generate_world(s);
    const world::Episode e = world::make_episode(w, "w", s);
    ObservedSet obs;
    Pose p = e.start;
    for (world::Action a : e.oracle_path) {
      const std::size_t before_unknown = [&] {
        const auto occ = occupancy_channel(w, obs, p, 15);
        return static_cast<std::size_t>(std::count(occ.begin(), occ.end(), kOccUnknown));
      }();
      obs.add(world::visible_cells(w, p, 6));
      const BevMap m = compose_bev(w, obs, p, e.goal, e.instruction, 15, 32);
      CHECK_NOTHROW(m.validate());
      CHECK(static_cast<std::size_t>(std::count(m.occupancy.begin(), m.occupancy.end(), kOccUnknown)) <=
            before_unknown);
      CHECK(m.occupancy[m.index(7, 7)] == kOccFree);
      ++checked;
      p = world::step(w, p, a);
    }
  }
}

TEST_CASE("rotation equivariance on a fully observed world") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const World w = world::generate_world(50 + s);
    const world::Episode e = world::make_episode(w, "w", s);
    const ObservedSet all = everything(w);
    const int S = 9;
    for (int h = 0; h < 4; ++h) {
      const Pose a{e.start.x, e.start.y, static_cast<Heading>(h)};
      const Pose b{a.x, a.y, world::turn_right(a.heading)};
      const BevMap ma = compose_bev(w, all, a, e.goal, e.instruction, S, 32);
      const BevMap mb = compose_bev(w, all, b, e.goal, e.instruction, S, 32);
      // Turning right by 90° rotates the map content counter-clockwise.
      for (int r = 0; r < S; ++r) {
        for (int c = 0; c < S; ++c) {
          const std::size_t ib = mb.index(r, c), ia = ma.index(c, S - 1 - r);
          CHECK(mb.occupancy[ib] == ma.occupancy[ia]);
          CHECK(mb.distance[ib] == ma.distance[ia]);
          CHECK(mb.landmark[ib] == ma.landmark[ia]);
        }
      }
    }
  }
}

TEST_CASE("degenerate S=1 and even sizes") {
  const World w = world::load_world(kFixture);
  ObservedSet obs;
  const Pose p{1, 1, Heading::South};
  obs.add(world::visible_cells(w, p, 6));
  const BevMap m = compose_bev(w, obs, p, {5, 5}, world::parse_instruction("go to the chair"), 1, 32);
  CHECK(m.occupancy == std::vector<std::uint8_t>{kOccFree});
  CHECK(m.distance == std::vector<std::uint8_t>{normalize_distance(8, 32)});
  const BevMap even = compose_bev(w, obs, {3, 3, Heading::North}, {5, 5},
                                  world::parse_instruction("go to the chair"), 4, 32);
  CHECK(bev_cell({3, 3, Heading::North}, 4, 2, 2) == Coord{3, 3});
  CHECK(even.distance[even.index(2, 2)] == normalize_distance(4, 32));
}

TEST_CASE("channel mask and PPM") {
  BevMap m(2);
  m.occupancy = {0, 128, 255, 255};
  m.distance = {0, 10, 200, 255};
  m.landmark = {0, 255, 0, 0};
  const std::string ppm = to_ppm(m);
  const std::string golden = std::string("P6\n2 2\n255\n") +
                             std::string("\x00\x00\x00\x80\x0a\xff\xff\xc8\x00\xff\xff\x00", 12);
  CHECK(ppm == golden);
  CHECK(from_ppm(ppm) == m);
  CHECK(to_ppm(BevMap(15)).rfind("P6\n15 15\n255\n", 0) == 0);
  CHECK(to_ppm(BevMap(15)).size() == 13 + 15 * 15 * 3);

  BevMap d = m;
  apply_channel_mask(d, parse_channel_mask("distance"));
  CHECK(d.distance == m.distance);
  CHECK(d.occupancy == std::vector<std::uint8_t>(4, kOccUnknown));
  CHECK(d.landmark == std::vector<std::uint8_t>(4, kLmOff));
  CHECK(parse_channel_mask("all") == ChannelMask{});
  CHECK(format_channel_mask(parse_channel_mask("landmark,occupancy")) == "occupancy,landmark");
  CHECK_THROWS_AS(parse_channel_mask("depth"), Error);

  BevMap bad = m;
  bad.occupancy[0] = 17;
  CHECK_THROWS_AS(bad.validate(), Error);
}
