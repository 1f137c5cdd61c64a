#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mapnav/harness/runner.hpp"
#include "mapnav/mapgen/vocab.hpp"
#include "mapnav/rft/rft.hpp"
#include "mapnav/supervision/bev.hpp"
#include "mapnav/training/stage1.hpp"
#include "mapnav/world/generator.hpp"

namespace mapnav::training {

struct WorldSection {
  world::WorldGenParams gen;
  int train_worlds = 200;
  int train_episodes_per_world = 2;
  int eval_worlds = 40;
  int eval_episodes_per_world = 5;
  int min_length = 6;
  int max_length = 24;
};

struct ModelSection {
  mapgen::Layout layout;
  int d_model = 32;
  int n_heads = 4;
  int n_layers = 2;
};

struct PolicySection {
  TrainConfig train;
  harness::MapSource map_source = harness::MapSource::Generated;
  /// DAgger samples collected per oracle sample (single round).
  double dagger_ratio = 0.5;
  /// Extra steps on the oracle + DAgger mixture after the oracle phase.
  int dagger_steps = 1000;
  double dagger_expert_mix = 0.0;
};

struct Stage2Section {
  rft::RftConfig rft;
  /// Share of RFT states drawn from DAgger (off-path) samples.
  double dagger_state_share = 1.0 / 3.0;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  supervision::ChannelMask channels;
  WorldSection world;
  ModelSection model;
  TrainConfig stage1_map;
  PolicySection stage1_policy;
  Stage2Section stage2;
  harness::EvalConfig eval;

  PipelineConfig();

  world::EpisodeParams episode_params() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Applies one "section.key" = value assignment. Throws ConfigError for
/// unknown keys and malformed values.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// Applies "section.key=value".
void apply_override(PipelineConfig& cfg, std::string_view assignment);

/// INI text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Starts from the defaults. Throws ConfigError.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::string& path);

/// Every key with its current value, in parse_config syntax.
std::string format_config(const PipelineConfig& cfg);

}  // namespace mapnav::training
