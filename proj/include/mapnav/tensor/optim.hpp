#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mapnav/tensor/transformer.hpp"

namespace mapnav::tensor {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction. Moments are keyed by
/// parameter name so one optimizer instance serves one model.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the gradients stored on the model's
  /// parameters. Throws NonFiniteGradient before touching any parameter.
  void step(Model& model, double lr);

  std::int64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }

  struct Moments {
    Matrix m;
    Matrix v;
  };
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void restore(std::int64_t steps, std::map<std::string, Moments> moments);

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

/// Global L2 norm over all parameter gradients of a model.
double grad_norm(const Model& model);

/// Scales gradients so their global norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_grad_norm(Model& model, double max_norm);

}  // namespace mapnav::tensor
