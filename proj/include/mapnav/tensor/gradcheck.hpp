#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mapnav/tensor/transformer.hpp"

namespace mapnav::tensor {

struct GradProbe {
  int model = 0;
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<double> max_rel_err_per_model;
  std::vector<GradProbe> probes;
  bool pass = false;
};

struct GradCheckOptions {
  int n_probes = 32;
  double tol = 1e-4;
  double step = 1e-5;
  /// Denominator floor: rel_err = |a - n| / max(|a|, |n|, floor). Keeps
  /// probes whose true gradient is ~0 from reporting pure rounding noise.
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Builds a fresh graph with `loss_fn` for every evaluation.
using LossFn = std::function<Var(Graph&)>;

/// Compares reverse-mode gradients against central differences on randomly
/// chosen parameter entries. Probes are dealt round-robin over `models` so
/// each model is exercised. Parameter gradients are zeroed first and hold
/// the analytic gradient afterwards. `pass` requires max_rel_err < tol
/// (strictly), so tol = 0 never passes.
GradCheckReport finite_diff_check(std::span<Model* const> models, const LossFn& loss_fn,
                                  const GradCheckOptions& options);

GradCheckReport finite_diff_check(Model& model, const LossFn& loss_fn,
                                  const GradCheckOptions& options);

}  // namespace mapnav::tensor
