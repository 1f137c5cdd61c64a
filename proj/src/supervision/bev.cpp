#include "mapnav/supervision/bev.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mapnav/error.hpp"

namespace mapnav::supervision {

BevMap::BevMap(int s)
    : size(s),
      occupancy(static_cast<std::size_t>(s) * s, kOccUnknown),
      distance(static_cast<std::size_t>(s) * s, kDistFar),
      landmark(static_cast<std::size_t>(s) * s, kLmOff) {}

void BevMap::validate() const {
  const std::size_t n = static_cast<std::size_t>(size) * size;
  if (occupancy.size() != n || distance.size() != n || landmark.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "BEV channel sizes do not match S*S");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t o = occupancy[i];
    if (o != kOccObstacle && o != kOccUnknown && o != kOccFree) {
      throw Error(ErrorCode::IllegalChannelValue, "occupancy value " + std::to_string(o));
    }
    if (landmark[i] != kLmOff && landmark[i] != kLmOn) {
      throw Error(ErrorCode::IllegalChannelValue, "landmark value " + std::to_string(landmark[i]));
    }
  }
}

Coord bev_cell(const Pose& pose, int size, int row, int col) {
  const int c = size / 2;
  return world::agent_to_world(pose, c - row, col - c);
}

namespace {

void check_size(int size) {
  if (size < 1) throw Error(ErrorCode::InvalidConfig, "map size must be positive");
}

}  // namespace

std::vector<std::uint8_t> occupancy_channel(const World& world, const ObservedSet& observed,
                                            const Pose& pose, int size) {
  check_size(size);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(size) * size, kOccUnknown);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Coord w = bev_cell(pose, size, r, c);
      if (!world.in_bounds(w) || !observed.contains(w)) continue;
      out[static_cast<std::size_t>(r) * size + c] = world.traversable(w) ? kOccFree : kOccObstacle;
    }
  }
  return out;
}

std::uint8_t normalize_distance(int d, int d_max) {
  if (d_max < 1) throw Error(ErrorCode::InvalidConfig, "d_max must be positive");
  if (d == world::DistanceField::kUnreachable) return kDistFar;
  const int m = std::min(d, d_max);
  return static_cast<std::uint8_t>(std::lround(255.0 * m / d_max));
}

std::vector<std::uint8_t> distance_channel(const world::DistanceField& field, const Pose& pose,
                                           int size, int d_max) {
  check_size(size);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(size) * size, kDistFar);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Coord w = bev_cell(pose, size, r, c);
      if (w.x < 0 || w.y < 0 || w.x >= field.width() || w.y >= field.height()) continue;
      out[static_cast<std::size_t>(r) * size + c] = normalize_distance(field.at(w), d_max);
    }
  }
  return out;
}

std::vector<std::uint8_t> distance_channel(const World& world, Coord goal, const Pose& pose,
                                           int size, int d_max) {
  return distance_channel(world::geodesic_field(world, goal), pose, size, d_max);
}

std::vector<std::uint8_t> landmark_channel(const World& world, const world::Instruction& instruction,
                                           const Pose& pose, int size) {
  check_size(size);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(size) * size, kLmOff);
  const auto& ids = instruction.landmark_ids;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Coord w = bev_cell(pose, size, r, c);
      if (!world.in_bounds(w)) continue;
      const world::Cell& cell = world.at(w);
      if (cell.kind == world::CellKind::Landmark &&
          std::find(ids.begin(), ids.end(), cell.landmark) != ids.end()) {
        out[static_cast<std::size_t>(r) * size + c] = kLmOn;
      }
    }
  }
  return out;
}

BevMap compose_bev(const World& world, const ObservedSet& observed, const Pose& pose,
                   const world::DistanceField& goal_field, const world::Instruction& instruction,
                   int size, int d_max) {
  BevMap m(size);
  m.occupancy = occupancy_channel(world, observed, pose, size);
  m.distance = distance_channel(goal_field, pose, size, d_max);
  m.landmark = landmark_channel(world, instruction, pose, size);
  return m;
}

BevMap compose_bev(const World& world, const ObservedSet& observed, const Pose& pose, Coord goal,
                   const world::Instruction& instruction, int size, int d_max) {
  return compose_bev(world, observed, pose, world::geodesic_field(world, goal), instruction, size,
                     d_max);
}

ChannelMask parse_channel_mask(std::string_view text) {
  if (text == "all") return {};
  ChannelMask m{false, false, false};
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    if (item == "occupancy") {
      m.occupancy = true;
    } else if (item == "distance") {
      m.distance = true;
    } else if (item == "landmark") {
      m.landmark = true;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown channel '" + item + "'");
    }
  }
  if (!m.any()) throw Error(ErrorCode::ConfigError, "channel mask must be nonempty");
  return m;
}

std::string format_channel_mask(const ChannelMask& m) {
  if (m.occupancy && m.distance && m.landmark) return "all";
  std::string out;
  auto put = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  put(m.occupancy, "occupancy");
  put(m.distance, "distance");
  put(m.landmark, "landmark");
  return out;
}

void apply_channel_mask(BevMap& map, const ChannelMask& mask) {
  if (!mask.any()) throw Error(ErrorCode::ConfigError, "channel mask must be nonempty");
  if (!mask.occupancy) std::fill(map.occupancy.begin(), map.occupancy.end(), kOccUnknown);
  if (!mask.distance) std::fill(map.distance.begin(), map.distance.end(), kDistFar);
  if (!mask.landmark) std::fill(map.landmark.begin(), map.landmark.end(), kLmOff);
}

std::string to_ppm(const BevMap& map) {
  std::string out = "P6\n" + std::to_string(map.size) + " " + std::to_string(map.size) + "\n255\n";
  const std::size_t n = static_cast<std::size_t>(map.size) * map.size;
  out.reserve(out.size() + 3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(static_cast<char>(map.occupancy[i]));
    out.push_back(static_cast<char>(map.distance[i]));
    out.push_back(static_cast<char>(map.landmark[i]));
  }
  return out;
}

BevMap from_ppm(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P6" || w != h || w < 1 || maxval != 255) {
    throw Error(ErrorCode::ParseError, "not a square 8-bit P6 image");
  }
  in.get();
  BevMap m(w);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::string px(3 * n, '\0');
  if (!in.read(px.data(), static_cast<std::streamsize>(px.size()))) {
    throw Error(ErrorCode::ParseError, "truncated P6 pixel data");
  }
  for (std::size_t i = 0; i < n; ++i) {
    m.occupancy[i] = static_cast<std::uint8_t>(px[3 * i]);
    m.distance[i] = static_cast<std::uint8_t>(px[3 * i + 1]);
    m.landmark[i] = static_cast<std::uint8_t>(px[3 * i + 2]);
  }
  return m;
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mapnav::supervision
