#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mapnav::tensor {

struct SampleOptions {
  bool greedy = false;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double unit_uniform(std::mt19937_64& rng);

/// Draws an index in [lo, hi) from softmax(logits[lo:hi] / temperature), or
/// the first argmax when greedy. Throws InvalidConfig for temperature <= 0.
int sample_index(std::span<const double> logits, int lo, int hi, const SampleOptions& opts,
                 std::mt19937_64& rng);

}  // namespace mapnav::tensor
