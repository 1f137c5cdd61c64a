#include "mapnav/world/episode.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mapnav/error.hpp"

namespace mapnav::world {

namespace {

constexpr std::array<std::string_view, kNumWords> kWords = {
    "go",     "to",     "the",    "walk",   "past",    "then",    "stop",     "at",
    "turn",   "left",   "right",  "and",    "chair",   "table",   "sofa",     "bed",
    "lamp",   "plant",  "door",   "window", "shelf",   "desk",    "sink",     "stove",
    "fridge", "clock",  "piano",  "mirror", "rug",     "vase",    "tv",       "bench",
    "cabinet", "toilet", "bathtub", "dresser", "painting", "fireplace"};

enum Word : int { kGo, kTo, kThe, kWalk, kPast, kThen, kStop, kAt, kTurn, kLeft, kRight, kAnd };

int lm_word(int landmark) { return kFirstLandmarkWord + landmark; }

std::vector<int> split_words(std::string_view text) {
  std::vector<int> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    const int id = word_id(w);
    if (id < 0) throw Error(ErrorCode::ParseError, "unknown word '" + w + "'");
    out.push_back(id);
  }
  return out;
}

bool is_landmark_word(int w) { return w >= kFirstLandmarkWord && w < kNumWords; }

int chebyshev(Coord a, Coord b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

}  // namespace

std::string_view word_text(int id) {
  if (id < 0 || id >= kNumWords) throw Error(ErrorCode::ParseError, "word id out of range");
  return kWords[static_cast<std::size_t>(id)];
}

int word_id(std::string_view word) {
  for (int i = 0; i < kNumWords; ++i) {
    if (kWords[static_cast<std::size_t>(i)] == word) return i;
  }
  return -1;
}

std::string_view landmark_name(int landmark_id) { return word_text(lm_word(landmark_id)); }

std::string Instruction::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out.append(word_text(tokens[i]));
  }
  return out;
}

Instruction instruction_from_tokens(const std::vector<int>& t) {
  auto lm = [&](std::size_t i) {
    if (i >= t.size() || !is_landmark_word(t[i])) {
      throw Error(ErrorCode::ParseError, "expected a landmark noun");
    }
    return t[i] - kFirstLandmarkWord;
  };
  auto match = [&](std::initializer_list<int> prefix, std::size_t at) {
    if (at + prefix.size() > t.size()) return false;
    return std::equal(prefix.begin(), prefix.end(), t.begin() + static_cast<std::ptrdiff_t>(at));
  };
  Instruction ins;
  ins.tokens = t;
  if (t.size() == 4 && match({kGo, kTo, kThe}, 0)) {
    ins.landmark_ids = {lm(3)};
  } else if (t.size() == 9 && match({kWalk, kPast, kThe}, 0) && match({kThen, kStop, kAt, kThe}, 4)) {
    ins.landmark_ids = {lm(3), lm(8)};
  } else if (t.size() == 10 && t[0] == kTurn && (t[1] == kLeft || t[1] == kRight) &&
             match({kAt, kThe}, 2) && match({kAnd, kGo, kTo, kThe}, 5)) {
    ins.landmark_ids = {lm(4), lm(9)};
  } else {
    std::string text;
    for (int w : t) text += std::string(word_text(w)) + " ";
    throw Error(ErrorCode::ParseError, "sentence outside the grammar: " + text);
  }
  return ins;
}

Instruction parse_instruction(std::string_view text) { return instruction_from_tokens(split_words(text)); }

std::vector<Action> oracle_path(const World& world, const Pose& start, Coord goal,
                                int success_radius, int max_steps) {
  const DistanceField field = geodesic_field(world, goal);
  std::vector<Action> path;
  Pose pose = start;
  while (static_cast<int>(path.size()) < max_steps) {
    const Action a = oracle_action(world, field, pose, success_radius);
    path.push_back(a);
    if (a == Action::Stop) return path;
    pose = step(world, pose, a);
  }
  throw Error(ErrorCode::NoValidEpisode, "oracle path exceeds " + std::to_string(max_steps) + " steps");
}

Episode make_episode(const World& world, std::string world_id, std::uint64_t seed,
                     const EpisodeParams& params) {
  const std::vector<int>& ids = world.landmark_ids();
  if (ids.size() < 2) {
    throw Error(ErrorCode::NoValidEpisode,
                "world " + world_id + " has " + std::to_string(ids.size()) + " landmark clusters");
  }
  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    const int target = ids[pick(ids.size())];
    std::set<Coord> nbr_set;
    for (const Coord& c : world.landmark_cells(target)) {
      const Coord around[] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (const Coord& n : around) {
        if (world.in_bounds(n) && world.at(n).kind == CellKind::Free) nbr_set.insert(n);
      }
    }
    if (nbr_set.empty()) continue;
    const std::vector<Coord> nbrs(nbr_set.begin(), nbr_set.end());
    const DistanceField near = geodesic_field(world, nbrs);

    std::vector<Coord> starts;
    for (int y = 0; y < world.height(); ++y) {
      for (int x = 0; x < world.width(); ++x) {
        const int d = near.at(x, y);
        if (world.at(x, y).kind == CellKind::Free && d >= params.min_length &&
            d <= params.max_length) {
          starts.push_back({x, y});
        }
      }
    }
    if (starts.empty()) continue;
    const Coord s = starts[pick(starts.size())];
    const Pose start{s.x, s.y, static_cast<Heading>(rng() % 4)};

    const DistanceField from_start = geodesic_field(world, s);
    Coord goal = nbrs.front();
    for (const Coord& n : nbrs) {
      if (from_start.at(n) < from_start.at(goal)) goal = n;
    }

    std::vector<Action> path;
    try {
      path = oracle_path(world, start, goal, params.success_radius, params.max_steps);
    } catch (const Error&) {
      continue;
    }

    // Landmarks passed along the way and landmarks next to real turns.
    std::vector<int> passed;
    std::vector<std::pair<int, Action>> turns;
    Pose pose = start;
    for (std::size_t i = 0; i < path.size(); ++i) {
      for (int id : ids) {
        if (id == target) continue;
        for (const Coord& c : world.landmark_cells(id)) {
          const int dist = chebyshev(c, pose.cell());
          if (dist <= 1 && std::find(passed.begin(), passed.end(), id) == passed.end()) {
            passed.push_back(id);
          }
          const bool real_turn = (path[i] == Action::TurnLeft || path[i] == Action::TurnRight) &&
                                 i + 1 < path.size() && path[i + 1] == Action::Forward;
          if (real_turn && dist <= 2 &&
              std::find(turns.begin(), turns.end(), std::make_pair(id, path[i])) == turns.end()) {
            turns.emplace_back(id, path[i]);
          }
        }
      }
      pose = step(world, pose, path[i]);
    }

    std::vector<int> templates{0};
    if (!passed.empty()) templates.push_back(1);
    if (!turns.empty()) templates.push_back(2);
    const int tpl = templates[pick(templates.size())];
    std::vector<int> tokens;
    if (tpl == 0) {
      tokens = {kGo, kTo, kThe, lm_word(target)};
    } else if (tpl == 1) {
      const int via = passed[pick(passed.size())];
      tokens = {kWalk, kPast, kThe, lm_word(via), kThen, kStop, kAt, kThe, lm_word(target)};
    } else {
      const auto [via, dir] = turns[pick(turns.size())];
      tokens = {kTurn, dir == Action::TurnLeft ? kLeft : kRight, kAt, kThe, lm_word(via),
                kAnd, kGo, kTo, kThe, lm_word(target)};
    }
    return Episode{std::move(world_id), start, goal, instruction_from_tokens(tokens), std::move(path)};
  }
  throw Error(ErrorCode::NoValidEpisode, "no episode within " + std::to_string(params.max_retries) +
                                             " attempts in world " + world_id);
}

std::string episode_to_json(const Episode& e) {
  nlohmann::json j;
  j["world_id"] = e.world_id;
  j["start"] = {e.start.x, e.start.y, static_cast<int>(e.start.heading)};
  j["goal"] = {e.goal.x, e.goal.y};
  j["instruction_tokens"] = e.instruction.tokens;
  j["instruction_text"] = e.instruction.text();
  std::vector<int> codes;
  for (Action a : e.oracle_path) codes.push_back(static_cast<int>(a));
  j["oracle_actions"] = codes;
  return j.dump();
}

Episode episode_from_json(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    Episode e;
    e.world_id = j.at("world_id").get<std::string>();
    const auto s = j.at("start").get<std::vector<int>>();
    const auto g = j.at("goal").get<std::vector<int>>();
    if (s.size() != 3 || g.size() != 2 || s[2] < 0 || s[2] > 3) {
      throw Error(ErrorCode::ParseError, "malformed start/goal");
    }
    e.start = Pose{s[0], s[1], static_cast<Heading>(s[2])};
    e.goal = Coord{g[0], g[1]};
    e.instruction = instruction_from_tokens(j.at("instruction_tokens").get<std::vector<int>>());
    for (int code : j.at("oracle_actions").get<std::vector<int>>()) {
      if (code < 0 || code >= kNumActions) throw Error(ErrorCode::ParseError, "bad action code");
      e.oracle_path.push_back(static_cast<Action>(code));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, ex.what());
  }
}

}  // namespace mapnav::world
