#pragma once

#include <span>
#include <string>

namespace mapnav::harness {

struct EpisodeResult {
  bool success = false;
  bool stopped = false;
  int path_length = 0;        // cells moved
  int shortest_length = 0;    // geodesic start to goal
  int min_goal_distance = 0;  // geodesic, minimum along the path
  int final_goal_distance = 0;
  double final_euclidean = 0.0;  // cell units
  int steps = 0;
  int malformed = 0;  // decisions that did not parse
};

struct Metrics {
  double ne = 0.0;
  double osr = 0.0;
  double sr = 0.0;
  double spl = 0.0;
  int n_episodes = 0;
};

/// success * l / max(p, l). Throws DegenerateEpisode when l <= 0.
double spl(bool success, int shortest_length, int path_length);

/// Means over episodes; OSR counts min_goal_distance <= success_radius.
/// Throws EmptySet.
Metrics aggregate(std::span<const EpisodeResult> results, int success_radius);

inline constexpr const char* kMetricsHeader = "NE,OSR,SR,SPL";
std::string metrics_csv_row(const Metrics& m);

}  // namespace mapnav::harness
