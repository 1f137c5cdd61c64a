#include "mapnav/harness/render.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "mapnav/error.hpp"
#include "mapnav/mapgen/vocab.hpp"

namespace mapnav::harness {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kFree{255, 255, 255};
constexpr Rgb kObstacle{0, 0, 0};
constexpr Rgb kLandmark{230, 200, 0};
constexpr Rgb kGoal{0, 0, 255};
constexpr Rgb kStart{0, 170, 0};
constexpr Rgb kPath{220, 0, 0};

}  // namespace

std::string render_bev(const supervision::BevMap& map) { return supervision::to_ppm(map); }

std::string render_trajectory(const world::World& world, const std::vector<world::Pose>& trajectory,
                              world::Coord goal) {
  const int w = world.width(), h = world.height();
  std::vector<Rgb> px(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const world::Cell& c = world.at(x, y);
      px[world.index(x, y)] = c.kind == world::CellKind::Obstacle   ? kObstacle
                              : c.kind == world::CellKind::Landmark ? kLandmark
                                                                    : kFree;
    }
  }
  if (world.in_bounds(goal)) px[world.index(goal.x, goal.y)] = kGoal;
  if (!trajectory.empty()) {
    px[world.index(trajectory.front().x, trajectory.front().y)] = kStart;
    for (std::size_t i = 1; i < trajectory.size(); ++i) {
      const world::Pose& a = trajectory[i - 1];
      const world::Pose& b = trajectory[i];
      if (a.x != b.x || a.y != b.y) px[world.index(b.x, b.y)] = kPath;
    }
  }
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (const Rgb& p : px) out.append(reinterpret_cast<const char*>(p.data()), 3);
  return out;
}

std::vector<std::string> render_map_dump(const std::string& jsonl, int dist_bins,
                                         const std::string& out_dir) {
  const mapgen::Vocab vocab(dist_bins);
  const mapgen::Codebook cb(dist_bins);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> written;
  std::istringstream in(jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    std::vector<int> tokens;
    std::string episode;
    int step = 0;
    try {
      j = nlohmann::json::parse(line);
      tokens = j.at("tokens").get<std::vector<int>>();
      episode = j.value("episode_id", std::string("map"));
      step = j.value("step", lineno - 1);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(tokens.size()))));
    if (s < 1 || s * s != static_cast<int>(tokens.size())) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": token count is not square");
    }
    std::vector<int> codes;
    for (int t : tokens) codes.push_back(vocab.map_code(t));
    std::string name = episode + "_" + std::to_string(step) + ".ppm";
    for (char& c : name) {
      if (c == '/' || c == '\\') c = '_';
    }
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    supervision::write_file(path, render_bev(mapgen::detokenize_bev(codes, s, cb)));
    written.push_back(path);
  }
  return written;
}

}  // namespace mapnav::harness
