#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapnav/mapgen/vocab.hpp"
#include "mapnav/policy/env.hpp"
#include "mapnav/tensor/sampling.hpp"
#include "mapnav/tensor/tensor.hpp"
#include "mapnav/tensor/transformer.hpp"

namespace mapnav::policy {

using tensor::Graph;
using tensor::Model;
using tensor::Var;

struct ActionSequence {
  std::vector<int> raw_tokens;
  std::optional<std::vector<Action>> parsed;  // present iff every token is an action
  double logprob = 0.0;                       // untempered, filled by predict_actions

  bool valid() const { return parsed.has_value(); }
};

ActionSequence parse_actions(const mapgen::Vocab& vocab, std::vector<int> raw_tokens);

/// Mean NLL of the N ground-truth action tokens over the full vocabulary.
/// Throws ArityMismatch, ContextOverflow.
Var action_loss(Graph& g, Model& model, const mapgen::Vocab& vocab, std::span<const int> ctx,
                std::span<const Action> gt, int n_actions);

/// Sum of full-vocabulary log-probabilities of `raw_tokens`; differentiable.
Var action_logprob(Graph& g, Model& model, std::span<const int> ctx,
                   std::span<const int> raw_tokens, int n_actions);

/// Decodes exactly N tokens over the full vocabulary (no masking).
ActionSequence predict_actions(const Model& model, const mapgen::Vocab& vocab,
                               std::span<const int> ctx, int n_actions,
                               const tensor::SampleOptions& opts);

/// Executes up to `m` parsed actions, stopping early at Stop or when the
/// episode ends. Returns the actions applied. Throws MalformedPlan.
std::vector<Action> execute_plan(EnvState& state, const ActionSequence& plan, int m, int max_steps);

/// {"episode_id", "step", "raw_tokens", "parsed", "pose_after", "reward"}
std::string trajectory_log_line(const std::string& episode_id, int step, const ActionSequence& seq,
                                const Pose& pose_after, double r_act, double r_fmt);

}  // namespace mapnav::policy
