#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapnav/mapgen/map_module.hpp"
#include "mapnav/policy/policy.hpp"
#include "mapnav/tensor/optim.hpp"

namespace mapnav::rft {

using policy::Action;
using policy::ActionSequence;
using tensor::Graph;
using tensor::Model;
using tensor::Var;

struct RewardBreakdown {
  int r_act = 0;  // longest correct prefix, in [0, N]
  int r_fmt = 0;  // 1 iff every token is an action
  int total() const { return r_act + r_fmt; }
};

/// Length of the longest prefix of `pred` that matches `gt`; 0 for an
/// unparseable prediction.
int action_reward(const std::optional<std::vector<Action>>& pred, std::span<const Action> gt);
int format_reward(const ActionSequence& seq);
RewardBreakdown score(const ActionSequence& seq, std::span<const Action> gt);

/// (r - mean) / (std + 1e-8) with the population std; all zeros when the
/// group is degenerate (std < 1e-8).
std::vector<double> group_advantages(std::span<const double> rewards);

/// exp((nav_new - nav_old) + (bev_new - bev_old)). Throws NonFinite.
double coupled_ratio(double logp_nav_new, double logp_nav_old, double logp_bev_new,
                     double logp_bev_old);
/// Differentiable through both new log-probabilities. Throws NonFinite.
Var coupled_ratio(Var logp_nav_new, double logp_nav_old, Var logp_bev_new, double logp_bev_old);

/// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
double clipped_term(double rho, double advantage, double eps);
/// -mean_k clipped_term(rho_k, A_k, eps) over 1x1 ratio nodes.
Var clipped_objective(std::span<const Var> ratios, std::span<const double> advantages, double eps);

struct RftConfig {
  int group_size = 8;
  double clip_eps = 0.28;
  double kl_coeff = 0.0;
  double lr = 1e-6;
  int steps = 2000;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int sync_every = 1;
  int batch_states = 4;
  double max_grad_norm = 0.0;  // 0 disables clipping
  int success_radius = 1;

  /// Throws InvalidConfig.
  void validate() const;
};

struct RolloutCandidate {
  mapgen::GeneratedMap map;
  ActionSequence actions;
  std::vector<int> map_ctx;
  std::vector<int> policy_ctx;
  double logp_nav_old = 0.0;
  double logp_bev_old = 0.0;
  RewardBreakdown reward;
  double advantage = 0.0;
};

/// Samples G (map, actions) candidates at one state under the old models.
/// Candidate k draws its map with seed ^ k and its actions with a seed
/// derived from that; all share the same observations, instruction and
/// oracle labels.
std::vector<RolloutCandidate> group_rollout(const Model& theta_old, const Model& phi_old,
                                            const mapgen::Vocab& vocab,
                                            const policy::EnvState& state, const RftConfig& cfg,
                                            std::uint64_t seed);

/// Fills `advantage` on every candidate of a group from r_total.
void assign_advantages(std::span<RolloutCandidate> group);

/// GRPO loss with fresh log-probabilities under (theta, phi). Candidates
/// with zero advantage contribute exactly zero and are not re-scored.
/// `clip_frac`, when given, receives the fraction of clipped ratios.
Var grpo_loss(Graph& g, Model& theta, Model& phi, const mapgen::Vocab& vocab,
              std::span<const RolloutCandidate> candidates, const RftConfig& cfg,
              double* clip_frac = nullptr);

struct RftStats {
  int step = 0;
  double mean_r_act = 0.0;
  double mean_r_fmt = 0.0;
  double loss = 0.0;
  double clip_frac = 0.0;
  double grad_norm_theta = 0.0;
  double grad_norm_phi = 0.0;
};

/// The trainable pair, its rollout snapshots and optimizers.
struct RftState {
  Model theta;
  Model phi;
  Model theta_old;
  Model phi_old;
  tensor::Adam opt_theta;
  tensor::Adam opt_phi;
  int step = 0;

  RftState(Model policy, Model map_model);
};

/// One GRPO update: a group per state, one joint optimizer step on both
/// models, then the old snapshots are refreshed every sync_every steps.
RftStats rft_step(RftState& st, const mapgen::Vocab& vocab,
                  std::span<const policy::EnvState> states, const RftConfig& cfg);

std::string stats_log_line(const RftStats& s);

}  // namespace mapnav::rft
