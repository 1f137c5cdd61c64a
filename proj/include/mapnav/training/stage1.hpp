#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mapnav/tensor/optim.hpp"
#include "mapnav/training/data.hpp"

namespace mapnav::training {

struct TrainConfig {
  double lr = 1e-4;
  int steps = 5000;
  int batch = 8;
  std::uint64_t seed = 0;
  double max_grad_norm = 1.0;  // 0 disables clipping
  bool cosine_decay = false;   // lr * (1 + cos(pi * step / steps)) / 2

  double lr_at(int step) const;
};

/// A model with its optimizer; the optimizer's step counter is the
/// training step, so a restored pair resumes exactly.
struct Trainee {
  tensor::Model model;
  tensor::Adam adam;

  explicit Trainee(tensor::Model m) : model(std::move(m)) {}
  int step() const { return static_cast<int>(adam.step_count()); }

  /// `<prefix>.ckpt` and `<prefix>.adam`.
  void save(const std::string& prefix) const;
  static Trainee load(const std::string& prefix);
};

/// Called after every step with (step just completed, loss). Returning
/// false stops training early.
using StepCallback = std::function<bool(int, double)>;

/// Sample indices of the batch for `step`; depends only on (seed, step).
std::vector<std::size_t> batch_indices(std::uint64_t seed, int step, std::size_t n, int batch);

/// Minimises map_loss until `cfg.steps` total steps. Returns per-step losses.
std::vector<double> stage1_train_map(Trainee& t, std::span<const Sample> samples,
                                     const TrainConfig& cfg, const StepCallback& cb = {});

/// Minimises action_loss with the given per-sample map tokens.
std::vector<double> stage1_train_policy(Trainee& t, std::span<const Sample> samples,
                                        std::span<const std::vector<int>> maps,
                                        const TrainConfig& cfg, const StepCallback& cb = {});

/// Teacher-forced token accuracy of the map module over `samples`.
double map_token_accuracy(tensor::Model& phi, std::span<const Sample> samples);

struct PolicyAccuracy {
  double next_action = 0.0;   // greedy first action equals the label
  double format_valid = 0.0;  // greedy decode parses
};
PolicyAccuracy policy_accuracy(const tensor::Model& theta, std::span<const Sample> samples,
                               std::span<const std::vector<int>> maps);

/// Model shapes for the map module and the policy.
tensor::TransformerConfig map_model_config(const mapgen::Layout& layout, int d_model, int n_heads,
                                           int n_layers, std::uint64_t seed);
tensor::TransformerConfig policy_model_config(const mapgen::Layout& layout, int d_model, int n_heads,
                                              int n_layers, std::uint64_t seed);

}  // namespace mapnav::training
