#pragma once

#include <optional>
#include <vector>

#include "mapnav/mapgen/vocab.hpp"
#include "mapnav/supervision/bev.hpp"
#include "mapnav/world/episode.hpp"
#include "mapnav/world/observation.hpp"

namespace mapnav::policy {

using world::Action;
using world::Pose;

/// Live episode state: pose, observation memory and bookkeeping for the
/// metrics. The world and episode must outlive the state.
struct EnvState {
  const world::World* world = nullptr;
  const world::Episode* episode = nullptr;
  mapgen::Layout layout;
  world::DistanceField goal_field{0, 0, {}};

  Pose pose;
  supervision::ObservedSet observed;
  mapgen::ObservationHistory history;
  world::Observation current;  // o_t at `pose`

  int steps = 0;
  int path_length = 0;  // cells actually moved
  int min_goal_distance = 0;
  bool done = false;
  bool stopped = false;
  std::vector<Pose> trajectory;  // poses visited, start included
  std::vector<Action> actions;   // actions applied, Stop included

  int goal_distance() const { return goal_field.at(pose.x, pose.y); }
};

/// Observes the start pose.
EnvState reset_env(const world::World& world, const world::Episode& episode,
                   const mapgen::Layout& layout);

/// Applies one action: the current frame moves into the history, the agent
/// steps, and the new pose is observed. Stop ends the episode, as does
/// reaching `max_steps`. No-op once done.
void advance(EnvState& state, Action action, int max_steps);

/// Ground-truth BEV at the current state.
supervision::BevMap ground_truth_bev(const EnvState& state);

std::vector<int> map_context(const EnvState& state);
std::vector<int> policy_context(const EnvState& state, std::span<const int> map_tokens);

/// The expert's next N actions from the current pose, padded with Stop.
std::vector<Action> oracle_window(const EnvState& state, int success_radius);

}  // namespace mapnav::policy
