#include "mapnav/tensor/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mapnav/error.hpp"

namespace mapnav::tensor {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int sample_index(std::span<const double> logits, int lo, int hi, const SampleOptions& opts,
                 std::mt19937_64& rng) {
  if (lo >= hi || hi > static_cast<int>(logits.size())) {
    throw Error(ErrorCode::ShapeMismatch, "empty or out-of-range sampling window");
  }
  if (opts.greedy) {
    return static_cast<int>(std::max_element(logits.begin() + lo, logits.begin() + hi) -
                            logits.begin());
  }
  if (!(opts.temperature > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sampling temperature must be positive");
  }
  const double mx = *std::max_element(logits.begin() + lo, logits.begin() + hi);
  std::vector<double> p(static_cast<std::size_t>(hi - lo));
  double z = 0.0;
  for (int i = lo; i < hi; ++i) {
    p[static_cast<std::size_t>(i - lo)] = std::exp((logits[i] - mx) / opts.temperature);
    z += p[static_cast<std::size_t>(i - lo)];
  }
  double u = unit_uniform(rng) * z;
  for (int i = lo; i < hi; ++i) {
    u -= p[static_cast<std::size_t>(i - lo)];
    if (u < 0.0) return i;
  }
  // Rounding left u marginally above zero: take the last index with mass.
  for (int i = hi - 1; i >= lo; --i) {
    if (p[static_cast<std::size_t>(i - lo)] > 0.0) return i;
  }
  return hi - 1;
}

}  // namespace mapnav::tensor
