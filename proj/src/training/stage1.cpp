#include "mapnav/training/stage1.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mapnav/error.hpp"
#include "mapnav/mapgen/map_module.hpp"
#include "mapnav/policy/policy.hpp"
#include "mapnav/tensor/checkpoint.hpp"

namespace mapnav::training {

namespace {

using LossOf = std::function<tensor::Var(tensor::Graph&, std::size_t)>;

std::vector<double> train_loop(Trainee& t, std::size_t n, const TrainConfig& cfg, const LossOf& loss_of,
                               const StepCallback& cb) {
  if (n == 0) throw Error(ErrorCode::EmptySet, "no training samples");
  if (cfg.batch < 1 || cfg.steps < 0) throw Error(ErrorCode::InvalidConfig, "batch >= 1, steps >= 0");
  std::vector<double> losses;
  while (t.step() < cfg.steps) {
    const int step = t.step();
    t.model.zero_grad();
    tensor::Graph g;
    std::vector<tensor::Var> terms;
    for (std::size_t i : batch_indices(cfg.seed, step, n, cfg.batch)) terms.push_back(loss_of(g, i));
    tensor::Var loss = tensor::scale(tensor::add_n(terms), 1.0 / static_cast<double>(terms.size()));
    const double value = loss.item();
    g.backward(loss);
    if (cfg.max_grad_norm > 0.0) tensor::clip_grad_norm(t.model, cfg.max_grad_norm);
    t.adam.step(t.model, cfg.lr_at(step));
    losses.push_back(value);
    if (cb && !cb(t.step(), value)) break;
  }
  return losses;
}

tensor::TransformerConfig make_config(int vocab, int context, int d_model, int n_heads, int n_layers,
                                      std::uint64_t seed) {
  tensor::TransformerConfig c;
  c.vocab_size = vocab;
  c.context_len = context;
  c.d_model = d_model;
  c.n_heads = n_heads;
  c.n_layers = n_layers;
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

double TrainConfig::lr_at(int step) const {
  if (!cosine_decay || steps <= 0) return lr;
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / steps));
}

void Trainee::save(const std::string& prefix) const {
  tensor::save_checkpoint(model, prefix + ".ckpt");
  tensor::save_optimizer(adam, prefix + ".adam");
}

Trainee Trainee::load(const std::string& prefix) {
  Trainee t(tensor::load_checkpoint(prefix + ".ckpt"));
  t.adam = tensor::load_optimizer(prefix + ".adam");
  return t;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, int step, std::size_t n, int batch) {
  std::mt19937_64 rng(harness::mix_seed(seed, static_cast<std::uint64_t>(step)));
  std::vector<std::size_t> out(static_cast<std::size_t>(batch));
  for (std::size_t& i : out) i = static_cast<std::size_t>(rng() % n);
  return out;
}

std::vector<double> stage1_train_map(Trainee& t, std::span<const Sample> samples,
                                     const TrainConfig& cfg, const StepCallback& cb) {
  const mapgen::Vocab vocab(mapgen::Vocab::vocab_bins(t.model.config().vocab_size));
  return train_loop(
      t, samples.size(), cfg,
      [&](tensor::Graph& g, std::size_t i) {
        return mapgen::map_loss(g, t.model, vocab, samples[i].map_ctx, samples[i].bev_tokens);
      },
      cb);
}

std::vector<double> stage1_train_policy(Trainee& t, std::span<const Sample> samples,
                                        std::span<const std::vector<int>> maps,
                                        const TrainConfig& cfg, const StepCallback& cb) {
  if (maps.size() != samples.size()) throw Error(ErrorCode::ShapeMismatch, "one map per sample");
  const mapgen::Vocab vocab(mapgen::Vocab::vocab_bins(t.model.config().vocab_size));
  return train_loop(
      t, samples.size(), cfg,
      [&](tensor::Graph& g, std::size_t i) {
        const Sample& s = samples[i];
        return policy::action_loss(g, t.model, vocab, policy_context(s, maps[i]), s.gt_actions,
                                   static_cast<int>(s.gt_actions.size()));
      },
      cb);
}

double map_token_accuracy(tensor::Model& phi, std::span<const Sample> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptySet, "no samples");
  const mapgen::Vocab vocab(mapgen::Vocab::vocab_bins(phi.config().vocab_size));
  std::size_t hit = 0, total = 0;
  for (const Sample& s : samples) {
    const std::vector<int> pred = mapgen::map_predictions(phi, vocab, s.map_ctx, s.bev_tokens);
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == s.bev_tokens[i] ? 1 : 0;
    total += pred.size();
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

PolicyAccuracy policy_accuracy(const tensor::Model& theta, std::span<const Sample> samples,
                               std::span<const std::vector<int>> maps) {
  if (samples.empty()) throw Error(ErrorCode::EmptySet, "no samples");
  const mapgen::Vocab vocab(mapgen::Vocab::vocab_bins(theta.config().vocab_size));
  PolicyAccuracy acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const policy::ActionSequence a =
        policy::predict_actions(theta, vocab, policy_context(s, maps[i]),
                                static_cast<int>(s.gt_actions.size()), {true, 1.0, 0});
    if (a.valid()) {
      acc.format_valid += 1.0;
      if (a.parsed->front() == s.gt_actions.front()) acc.next_action += 1.0;
    }
  }
  acc.format_valid /= static_cast<double>(samples.size());
  acc.next_action /= static_cast<double>(samples.size());
  return acc;
}

tensor::TransformerConfig map_model_config(const mapgen::Layout& layout, int d_model, int n_heads,
                                           int n_layers, std::uint64_t seed) {
  return make_config(mapgen::Vocab(layout.dist_bins).size(), layout.map_sequence_len(), d_model,
                     n_heads, n_layers, seed);
}

tensor::TransformerConfig policy_model_config(const mapgen::Layout& layout, int d_model, int n_heads,
                                              int n_layers, std::uint64_t seed) {
  return make_config(mapgen::Vocab(layout.dist_bins).size(), layout.policy_sequence_len(), d_model,
                     n_heads, n_layers, seed);
}

}  // namespace mapnav::training
