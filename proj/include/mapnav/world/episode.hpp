#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mapnav/world/world.hpp"

namespace mapnav::world {

/// Fixed instruction vocabulary: function words first, then one noun per
/// landmark id (word id = kFirstLandmarkWord + landmark id).
inline constexpr int kFirstLandmarkWord = 12;
inline constexpr int kNumWords = kFirstLandmarkWord + kMaxLandmarkId + 1;
/// Longest sentence the grammar can produce.
inline constexpr int kMaxInstructionWords = 10;

std::string_view word_text(int word_id);
/// -1 when the word is not in the vocabulary.
int word_id(std::string_view word);
std::string_view landmark_name(int landmark_id);

struct Instruction {
  std::vector<int> tokens;        // word ids
  std::vector<int> landmark_ids;  // referenced landmarks, in sentence order

  std::string text() const;
  bool operator==(const Instruction&) const = default;
};

/// Parses a sentence of the grammar
///   go to the <lm>
///   walk past the <lm> then stop at the <lm>
///   turn <left|right> at the <lm> and go to the <lm>
/// Throws ParseError for anything else.
Instruction parse_instruction(std::string_view text);
Instruction instruction_from_tokens(const std::vector<int>& tokens);

struct EpisodeParams {
  int success_radius = 1;
  int min_length = 6;    // geodesic cells, inclusive
  int max_length = 24;   // geodesic cells, inclusive
  int max_steps = 60;    // K_max: oracle path length bound, Stop included
  int max_retries = 200;
};

struct Episode {
  std::string world_id;
  Pose start;
  Coord goal;
  Instruction instruction;
  std::vector<Action> oracle_path;  // ends with the only Stop

  bool operator==(const Episode&) const = default;
};

/// Samples a start, a goal cell next to one landmark cluster and a
/// templated instruction; deterministic in `seed`. The goal is the free
/// neighbour of the target cluster nearest to the start, so the
/// instruction pins it down. Throws NoValidEpisode when fewer than two
/// landmark clusters exist or no episode satisfies the bounds within the
/// retry budget.
Episode make_episode(const World& world, std::string world_id, std::uint64_t seed,
                     const EpisodeParams& params = {});

/// Iterates oracle_action from `start`; throws NoValidEpisode when the path
/// would exceed `max_steps`.
std::vector<Action> oracle_path(const World& world, const Pose& start, Coord goal,
                                int success_radius, int max_steps);

/// One JSON object per line:
/// {"world_id", "start":[x,y,h], "goal":[x,y], "instruction_tokens":[...],
///  "instruction_text", "oracle_actions":[...]}
std::string episode_to_json(const Episode& e);
Episode episode_from_json(std::string_view line);

}  // namespace mapnav::world
