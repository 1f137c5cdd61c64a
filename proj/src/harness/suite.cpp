#include "mapnav/harness/suite.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mapnav/error.hpp"
#include "mapnav/supervision/bev.hpp"

namespace mapnav::harness {

namespace fs = std::filesystem;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string Suite::episode_id(std::size_t episode) const {
  return world_ids[static_cast<std::size_t>(episode_world[episode])] + "/e" + std::to_string(episode);
}

Suite make_suite(const std::string& prefix, int n_worlds, int episodes_per_world, std::uint64_t seed,
                 const world::WorldGenParams& world_params,
                 const world::EpisodeParams& episode_params) {
  if (n_worlds < 1 || episodes_per_world < 1) {
    throw Error(ErrorCode::InvalidConfig, "suite needs at least one world and one episode");
  }
  Suite s;
  std::uint64_t attempt = 0;
  for (int w = 0; w < n_worlds; ++w) {
    for (int tries = 0;; ++tries, ++attempt) {
      if (tries >= 64) throw Error(ErrorCode::NoValidEpisode, "no usable world for " + prefix);
      const std::uint64_t wseed = mix_seed(seed, attempt);
      world::World wd = world::generate_world(wseed, world_params);
      const std::string id = prefix + "_" + std::to_string(w);
      std::vector<world::Episode> eps;
      try {
        for (int e = 0; e < episodes_per_world; ++e) {
          eps.push_back(world::make_episode(wd, id, mix_seed(wseed, static_cast<std::uint64_t>(e) + 1),
                                            episode_params));
        }
      } catch (const Error& err) {
        if (err.code() != ErrorCode::NoValidEpisode) throw;
        continue;
      }
      ++attempt;
      s.worlds.push_back(std::move(wd));
      s.world_ids.push_back(id);
      for (auto& ep : eps) {
        s.episodes.push_back(std::move(ep));
        s.episode_world.push_back(w);
      }
      break;
    }
  }
  return s;
}

void save_suite(const Suite& suite, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "worlds", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
  for (std::size_t i = 0; i < suite.worlds.size(); ++i) {
    supervision::write_file((fs::path(dir) / "worlds" / (suite.world_ids[i] + ".txt")).string(),
                            world::format_world(suite.worlds[i]));
  }
  std::string lines;
  for (const auto& e : suite.episodes) lines += world::episode_to_json(e) + "\n";
  supervision::write_file((fs::path(dir) / "episodes.jsonl").string(), lines);
}

Suite load_suite(const std::string& dir) {
  Suite s;
  std::map<std::string, int> index;
  std::istringstream in(supervision::read_file((fs::path(dir) / "episodes.jsonl").string()));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    world::Episode e = world::episode_from_json(line);
    auto it = index.find(e.world_id);
    if (it == index.end()) {
      const std::string path = (fs::path(dir) / "worlds" / (e.world_id + ".txt")).string();
      s.worlds.push_back(world::load_world(supervision::read_file(path)));
      s.world_ids.push_back(e.world_id);
      it = index.emplace(e.world_id, static_cast<int>(s.worlds.size()) - 1).first;
    }
    s.episode_world.push_back(it->second);
    s.episodes.push_back(std::move(e));
  }
  if (s.episodes.empty()) throw Error(ErrorCode::ParseError, dir + " holds no episodes");
  return s;
}

}  // namespace mapnav::harness
