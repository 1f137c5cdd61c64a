#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapnav/harness/metrics.hpp"
#include "mapnav/harness/suite.hpp"
#include "mapnav/mapgen/map_module.hpp"
#include "mapnav/policy/policy.hpp"
#include "mapnav/supervision/bev.hpp"

namespace mapnav::harness {

/// Where the policy's map tokens come from.
enum class MapSource { GroundTruth, Generated, Constant };

MapSource parse_map_source(std::string_view text);
std::string_view map_source_name(MapSource s);

/// S*S copies of the least-informative code (unknown, far, no landmark).
std::vector<int> constant_map_tokens(const mapgen::Layout& layout);

/// Ground-truth BEV tokens at the state with the channel mask applied.
std::vector<int> ground_truth_map_tokens(const policy::EnvState& state,
                                         const supervision::ChannelMask& mask);

class Agent {
 public:
  virtual ~Agent() = default;
  /// Decision at `state`; `decision` counts calls within the episode.
  virtual policy::ActionSequence act(const policy::EnvState& state, int decision) = 0;
  /// Called once per episode before the first decision.
  virtual void begin_episode(std::uint64_t /*episode_seed*/, const std::string& /*episode_id*/ = {}) {}
};

/// The learned pipeline: map from `phi` (or ground truth / constant), then
/// N actions from `theta`.
class ModelAgent : public Agent {
 public:
  ModelAgent(const tensor::Model& theta, const tensor::Model* phi, MapSource source,
             supervision::ChannelMask mask, tensor::SampleOptions opts = {true, 1.0, 0});

  policy::ActionSequence act(const policy::EnvState& state, int decision) override;
  void begin_episode(std::uint64_t episode_seed, const std::string& episode_id = {}) override {
    episode_seed_ = episode_seed;
    episode_id_ = episode_id;
  }
  /// When set, every decision appends a map dump line for its map.
  void set_map_log(std::vector<std::string>* log) { map_log_ = log; }

  std::vector<int> map_tokens(const policy::EnvState& state, std::uint64_t seed) const;

 private:
  mapgen::GeneratedMap make_map(const policy::EnvState& state, std::uint64_t seed) const;

  const tensor::Model& theta_;
  const tensor::Model* phi_;
  MapSource source_;
  supervision::ChannelMask mask_;
  tensor::SampleOptions opts_;
  std::uint64_t episode_seed_ = 0;
  std::string episode_id_;
  std::vector<std::string>* map_log_ = nullptr;
};

/// Expert substitute: emits the oracle's next N actions.
class OracleAgent : public Agent {
 public:
  explicit OracleAgent(int success_radius) : radius_(success_radius) {}
  policy::ActionSequence act(const policy::EnvState& state, int decision) override;

 private:
  int radius_;
};

struct EvalConfig {
  int max_steps = 60;  // K_max
  int success_radius = 1;
  int execute_steps = 1;  // m
};

/// Full inference loop. A decision that does not parse costs one step
/// without movement. `log`, when given, receives one JSON line per decision.
EpisodeResult run_episode(Agent& agent, const world::World& world, const world::Episode& episode,
                          const mapgen::Layout& layout, const EvalConfig& cfg,
                          const std::string& episode_id = {}, std::vector<std::string>* log = nullptr,
                          policy::EnvState* final_state = nullptr);

/// Runs every episode of the suite in order.
std::vector<EpisodeResult> evaluate(Agent& agent, const Suite& suite, const mapgen::Layout& layout,
                                    const EvalConfig& cfg, std::vector<std::string>* log = nullptr);

}  // namespace mapnav::harness
