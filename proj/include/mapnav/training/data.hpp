#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapnav/harness/runner.hpp"
#include "mapnav/harness/suite.hpp"
#include "mapnav/policy/env.hpp"
#include "mapnav/supervision/bev.hpp"

namespace mapnav::training {

using world::Action;

/// One supervised decision point.
struct Sample {
  int episode = 0;  // index into the suite
  int step = 0;
  bool on_path = true;          // false for DAgger states off the expert path
  std::vector<int> map_ctx;     // BOS_MAP ... SEP
  std::vector<int> bev_tokens;  // ground-truth map, channel mask applied
  std::vector<Action> gt_actions;
  std::vector<Action> prefix;   // actions executed since the start
};

/// Policy context for `s` with the given S*S map tokens.
std::vector<int> policy_context(const Sample& s, std::span<const int> map_tokens);

Sample make_sample(const policy::EnvState& state, int episode, int step, bool on_path,
                   const supervision::ChannelMask& mask, int success_radius);

/// Replays every expert path: one sample per step, labels from the
/// expert's next N actions (Stop-padded).
std::vector<Sample> collect_oracle_data(const harness::Suite& suite, const mapgen::Layout& layout,
                                        const supervision::ChannelMask& mask, int success_radius);

struct DaggerConfig {
  int max_steps = 60;
  int success_radius = 1;
  /// Probability of executing the expert action instead of the policy's.
  double expert_mix = 0.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Rolls `agent` (sampled decisions) and labels every visited state with
/// the expert's next N actions from that state. A decision that does not
/// parse is replaced by a uniformly random movement action so rollouts
/// keep exploring.
std::vector<Sample> collect_dagger_data(const harness::Suite& suite, const mapgen::Layout& layout,
                                        harness::Agent& agent, const supervision::ChannelMask& mask,
                                        const DaggerConfig& cfg);

/// Map tokens for the policy at every sample. Generated maps are greedy
/// decodes of `phi`.
std::vector<std::vector<int>> policy_maps(std::span<const Sample> samples, harness::MapSource source,
                                          const tensor::Model* phi, const mapgen::Layout& layout);

/// Rebuilds the environment state of a sample (for RFT batches).
policy::EnvState replay_state(const harness::Suite& suite, const mapgen::Layout& layout,
                              const Sample& sample);

/// One JSON object per line.
void save_samples(std::span<const Sample> samples, const std::string& path);
/// Throws IoError, ParseError.
std::vector<Sample> load_samples(const std::string& path);

}  // namespace mapnav::training
