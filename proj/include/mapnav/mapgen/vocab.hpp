#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "mapnav/supervision/bev.hpp"
#include "mapnav/world/episode.hpp"
#include "mapnav/world/observation.hpp"

namespace mapnav::mapgen {

/// Shared token space of the map module and the policy. Ranges, in order:
/// control, instruction words, observation cell classes, pose deltas, map
/// codes, actions. Size is 80 + 6B for B distance bins (128 at B = 8).
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBosMap = 1;
  static constexpr int kBosPol = 2;
  static constexpr int kSep = 3;
  static constexpr int kWordBase = 4;
  static constexpr int kObsBase = kWordBase + world::kNumWords;
  static constexpr int kDeltaBase = kObsBase + world::kNumCellClasses;
  static constexpr int kNumDeltas = 5;  // start, still, forward, left, right
  static constexpr int kMapBase = kDeltaBase + kNumDeltas;

  explicit Vocab(int dist_bins = 8);
  /// Distance bins implied by a vocabulary size. Throws InvalidConfig.
  static int vocab_bins(int vocab_size);

  int dist_bins() const { return dist_bins_; }
  int n_map_codes() const { return 6 * dist_bins_; }
  int map_end() const { return kMapBase + n_map_codes(); }
  int action_base() const { return map_end(); }
  int action_end() const { return action_base() + world::kNumActions; }
  int size() const { return action_end(); }

  bool is_map_token(int t) const { return t >= kMapBase && t < map_end(); }
  bool is_action_token(int t) const { return t >= action_base() && t < action_end(); }

  static int word_token(int word_id) { return kWordBase + word_id; }
  static int obs_token(int cell_class) { return kObsBase + cell_class; }
  /// Throws InvalidConfig for displacements no single action produces.
  static int delta_token(const world::PoseDelta& d);
  int map_token(int code) const;
  int map_code(int token) const;
  int action_token(world::Action a) const { return action_base() + static_cast<int>(a); }
  world::Action token_action(int token) const;

  /// Human-readable token name for logs.
  std::string describe(int token) const;

 private:
  int dist_bins_;
};

/// Per-cell product codebook: code = occ * (2B) + bin * 2 + lm with occ in
/// {0, 1, 2} for {0, 128, 255}, bin = floor(v * B / 256), lm in {0, 1}.
class Codebook {
 public:
  explicit Codebook(int dist_bins = 8);
  int dist_bins() const { return bins_; }
  int size() const { return 6 * bins_; }
  int encode(std::uint8_t occupancy, std::uint8_t distance, std::uint8_t landmark) const;
  /// Distance decodes to the upper-middle integer of its bin, so the error
  /// is at most half a bin width when B divides 256 and at most half a
  /// width plus 1/2 otherwise.
  void decode(int code, std::uint8_t& occupancy, std::uint8_t& distance,
              std::uint8_t& landmark) const;
  double bin_width() const { return 256.0 / bins_; }

 private:
  int bins_;
};

/// Row-major codes; throws IllegalChannelValue.
std::vector<int> tokenize_bev(const supervision::BevMap& map, const Codebook& codebook);
supervision::BevMap detokenize_bev(std::span<const int> codes, int size, const Codebook& codebook);

/// Sizes shared by both sequence layouts.
struct Layout {
  int obs_size = 5;   // D, odd
  int history = 4;    // H
  int map_size = 15;  // S
  int dist_bins = 8;  // B
  int n_actions = 3;  // N
  int range = 6;      // R
  int d_max = 32;

  void validate() const;
  int frame_tokens() const { return obs_size * obs_size + 1; }
  int map_tokens() const { return map_size * map_size; }
  /// BOS + padded instruction + H history frames + current frame + SEP.
  int map_prefix_len() const;
  int map_sequence_len() const { return map_prefix_len() + map_tokens(); }
  int policy_prefix_len() const { return map_prefix_len() + map_tokens(); }
  int policy_sequence_len() const { return policy_prefix_len() + n_actions; }
};

/// FIFO of past frames, oldest first; keeps at most `capacity`.
class ObservationHistory {
 public:
  explicit ObservationHistory(int capacity = 4) : capacity_(capacity) {}
  void push(world::Observation obs);
  const std::deque<world::Observation>& frames() const { return frames_; }
  int capacity() const { return capacity_; }
  void clear() { frames_.clear(); }

 private:
  int capacity_;
  std::deque<world::Observation> frames_;
};

/// Delta token followed by D*D cell-class tokens.
std::vector<int> encode_frame(const world::Observation& obs);

/// Fixed-length prefix. Instructions are right-padded to the longest
/// sentence and missing history frames are filled with PAD, so every
/// segment starts at the same position in every sample.
std::vector<int> map_context(const Layout& layout, const world::Instruction& instruction,
                             const ObservationHistory& history, const world::Observation& current);

/// Same segments as map_context, opened by BOS_POL, with the S*S map tokens
/// inserted before SEP.
std::vector<int> policy_context(const Layout& layout, const world::Instruction& instruction,
                                const ObservationHistory& history, const world::Observation& current,
                                std::span<const int> map_tokens);

}  // namespace mapnav::mapgen
