#include "mapnav/harness/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "mapnav/error.hpp"

namespace mapnav::harness {

double spl(bool success, int shortest_length, int path_length) {
  if (shortest_length <= 0) {
    throw Error(ErrorCode::DegenerateEpisode, "shortest path length must be positive");
  }
  if (!success) return 0.0;
  return static_cast<double>(shortest_length) / std::max(path_length, shortest_length);
}

Metrics aggregate(std::span<const EpisodeResult> results, int success_radius) {
  if (results.empty()) throw Error(ErrorCode::EmptySet, "no episode results");
  Metrics m;
  for (const EpisodeResult& r : results) {
    m.ne += r.final_euclidean;
    m.osr += r.min_goal_distance <= success_radius ? 1.0 : 0.0;
    m.sr += r.success ? 1.0 : 0.0;
    m.spl += spl(r.success, r.shortest_length, r.path_length);
  }
  const double n = static_cast<double>(results.size());
  m.ne /= n;
  m.osr /= n;
  m.sr /= n;
  m.spl /= n;
  m.n_episodes = static_cast<int>(results.size());
  return m;
}

std::string metrics_csv_row(const Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f", m.ne, m.osr, m.sr, m.spl);
  return buf;
}

}  // namespace mapnav::harness
