#include "mapnav/policy/env.hpp"

#include <algorithm>

#include "mapnav/error.hpp"

namespace mapnav::policy {

EnvState reset_env(const world::World& world, const world::Episode& episode,
                   const mapgen::Layout& layout) {
  layout.validate();
  EnvState s;
  s.world = &world;
  s.episode = &episode;
  s.layout = layout;
  s.goal_field = world::geodesic_field(world, episode.goal);
  s.pose = episode.start;
  s.history = mapgen::ObservationHistory(layout.history);
  s.observed.add(world::visible_cells(world, s.pose, layout.range));
  s.current = world::observe(world, s.pose, layout.obs_size, layout.range);
  s.min_goal_distance = s.goal_distance();
  s.trajectory.push_back(s.pose);
  return s;
}

void advance(EnvState& s, Action action, int max_steps) {
  if (s.done) return;
  ++s.steps;
  s.actions.push_back(action);
  if (action == Action::Stop) {
    s.done = true;
    s.stopped = true;
    return;
  }
  const Pose prev = s.pose;
  s.pose = world::step(*s.world, prev, action);
  if (s.pose.x != prev.x || s.pose.y != prev.y) ++s.path_length;
  s.history.push(std::move(s.current));
  s.observed.add(world::visible_cells(*s.world, s.pose, s.layout.range));
  s.current = world::observe(*s.world, s.pose, s.layout.obs_size, s.layout.range, prev);
  s.min_goal_distance = std::min(s.min_goal_distance, s.goal_distance());
  s.trajectory.push_back(s.pose);
  if (s.steps >= max_steps) s.done = true;
}

supervision::BevMap ground_truth_bev(const EnvState& s) {
  return supervision::compose_bev(*s.world, s.observed, s.pose, s.goal_field,
                                  s.episode->instruction, s.layout.map_size, s.layout.d_max);
}

std::vector<int> map_context(const EnvState& s) {
  return mapgen::map_context(s.layout, s.episode->instruction, s.history, s.current);
}

std::vector<int> policy_context(const EnvState& s, std::span<const int> map_tokens) {
  return mapgen::policy_context(s.layout, s.episode->instruction, s.history, s.current, map_tokens);
}

std::vector<Action> oracle_window(const EnvState& s, int success_radius) {
  std::vector<Action> out;
  Pose p = s.pose;
  while (static_cast<int>(out.size()) < s.layout.n_actions) {
    const Action a = world::oracle_action(*s.world, s.goal_field, p, success_radius);
    out.push_back(a);
    if (a == Action::Stop) break;
    p = world::step(*s.world, p, a);
  }
  out.resize(static_cast<std::size_t>(s.layout.n_actions), Action::Stop);
  return out;
}

}  // namespace mapnav::policy
