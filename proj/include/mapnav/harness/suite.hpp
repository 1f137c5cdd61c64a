#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapnav/world/episode.hpp"
#include "mapnav/world/generator.hpp"

namespace mapnav::harness {

/// Worlds plus episodes over them; `episode_world[i]` indexes `worlds`.
struct Suite {
  std::vector<world::World> worlds;
  std::vector<std::string> world_ids;
  std::vector<world::Episode> episodes;
  std::vector<int> episode_world;

  const world::World& world_of(std::size_t episode) const {
    return worlds[static_cast<std::size_t>(episode_world[episode])];
  }
  std::string episode_id(std::size_t episode) const;
};

/// Deterministic in (prefix, seed). World i is generated from a seed
/// derived from (seed, i); a world that yields no valid episode is
/// replaced by the next derived seed.
Suite make_suite(const std::string& prefix, int n_worlds, int episodes_per_world, std::uint64_t seed,
                 const world::WorldGenParams& world_params = {},
                 const world::EpisodeParams& episode_params = {});

/// Writes `<dir>/worlds/<id>.txt` and `<dir>/episodes.jsonl`.
void save_suite(const Suite& suite, const std::string& dir);
/// Inverse of save_suite. Throws IoError, ParseError.
Suite load_suite(const std::string& dir);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mapnav::harness
