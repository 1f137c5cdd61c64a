#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapnav/mapgen/vocab.hpp"
#include "mapnav/tensor/sampling.hpp"
#include "mapnav/tensor/tensor.hpp"
#include "mapnav/tensor/transformer.hpp"

namespace mapnav::mapgen {

using tensor::Graph;
using tensor::Model;
using tensor::Var;

/// Mean teacher-forced NLL of `target` (map tokens) after `ctx`, with the
/// softmax restricted to the map-code range. Throws NotAMapCode,
/// ContextOverflow.
Var map_loss(Graph& g, Model& model, const Vocab& vocab, std::span<const int> ctx,
             std::span<const int> target);

/// Sum of masked log-probabilities of `tokens`; differentiable.
Var map_logprob(Graph& g, Model& model, const Vocab& vocab, std::span<const int> ctx,
                std::span<const int> tokens);

/// Teacher-forced masked argmax at every map position.
std::vector<int> map_predictions(Model& model, const Vocab& vocab, std::span<const int> ctx,
                                 std::span<const int> target);

struct GeneratedMap {
  std::vector<int> tokens;  // vocabulary ids in the map range
  double logprob = 0.0;     // under the untempered masked distribution
  supervision::BevMap bev;
};

/// Samples S*S map tokens (masked to map codes) after `ctx`. `logprob` is
/// scored at temperature 1 so it matches map_logprob. Throws
/// ContextOverflow.
GeneratedMap generate_map(const Model& model, const Vocab& vocab, std::span<const int> ctx,
                          int map_size, const tensor::SampleOptions& opts);

/// {"episode_id", "step", "tokens", "logprob"}
std::string map_dump_line(const std::string& episode_id, int step, const GeneratedMap& map);

}  // namespace mapnav::mapgen
