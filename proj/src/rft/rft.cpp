#include "mapnav/rft/rft.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "mapnav/error.hpp"

namespace mapnav::rft {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, std::string(what) + " is not finite");
}

}  // namespace

int action_reward(const std::optional<std::vector<Action>>& pred, std::span<const Action> gt) {
  if (!pred) return 0;
  int r = 0;
  while (r < static_cast<int>(gt.size()) && r < static_cast<int>(pred->size()) &&
         (*pred)[static_cast<std::size_t>(r)] == gt[static_cast<std::size_t>(r)]) {
    ++r;
  }
  return r;
}

int format_reward(const ActionSequence& seq) { return seq.valid() ? 1 : 0; }

RewardBreakdown score(const ActionSequence& seq, std::span<const Action> gt) {
  return {action_reward(seq.parsed, gt), format_reward(seq)};
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  const double n = static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (sd < 1e-8) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / (sd + 1e-8);
  return out;
}

double coupled_ratio(double nav_new, double nav_old, double bev_new, double bev_old) {
  for (double v : {nav_new, nav_old, bev_new, bev_old}) check_finite(v, "log-probability");
  const double rho = std::exp((nav_new - nav_old) + (bev_new - bev_old));
  check_finite(rho, "ratio");
  return rho;
}

Var coupled_ratio(Var nav_new, double nav_old, Var bev_new, double bev_old) {
  coupled_ratio(nav_new.item(), nav_old, bev_new.item(), bev_old);
  return tensor::exp(tensor::add_scalar(tensor::add(nav_new, bev_new), -(nav_old + bev_old)));
}

double clipped_term(double rho, double a, double eps) {
  return std::min(rho * a, std::clamp(rho, 1.0 - eps, 1.0 + eps) * a);
}

Var clipped_objective(std::span<const Var> ratios, std::span<const double> adv, double eps) {
  if (ratios.size() != adv.size() || ratios.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "ratios and advantages differ in length");
  }
  std::vector<Var> terms;
  terms.reserve(ratios.size());
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    Var surr = tensor::scale(ratios[k], adv[k]);
    Var clipped = tensor::scale(tensor::clamp(ratios[k], 1.0 - eps, 1.0 + eps), adv[k]);
    terms.push_back(tensor::minimum(surr, clipped));
  }
  return tensor::scale(tensor::mean(tensor::stack_scalars(terms)), -1.0);
}

void RftConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (group_size < 2) bad("group_size must be >= 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) bad("clip_eps must lie in (0, 1)");
  if (kl_coeff != 0.0) bad("kl_coeff must be 0 (KL regularisation is not supported)");
  if (!(lr >= 0.0)) bad("lr must be >= 0");
  if (steps < 0) bad("steps must be >= 0");
  if (!(temperature > 0.0)) bad("temperature must be > 0");
  if (sync_every < 1) bad("sync_every must be >= 1");
  if (batch_states < 1) bad("batch_states must be >= 1");
  if (max_grad_norm < 0.0) bad("max_grad_norm must be >= 0");
  if (success_radius < 0) bad("success_radius must be >= 0");
}

std::vector<RolloutCandidate> group_rollout(const Model& theta_old, const Model& phi_old,
                                            const mapgen::Vocab& vocab,
                                            const policy::EnvState& state, const RftConfig& cfg,
                                            std::uint64_t seed) {
  cfg.validate();
  const std::vector<int> map_ctx = policy::map_context(state);
  const std::vector<Action> gt = policy::oracle_window(state, cfg.success_radius);
  std::vector<RolloutCandidate> group;
  group.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int k = 0; k < cfg.group_size; ++k) {
    const std::uint64_t map_seed = seed ^ static_cast<std::uint64_t>(k);
    RolloutCandidate c;
    c.map = mapgen::generate_map(phi_old, vocab, map_ctx, state.layout.map_size,
                                 {false, cfg.temperature, map_seed});
    c.map_ctx = map_ctx;
    c.policy_ctx = policy::policy_context(state, c.map.tokens);
    c.actions = policy::predict_actions(theta_old, vocab, c.policy_ctx, state.layout.n_actions,
                                        {false, cfg.temperature, splitmix(map_seed)});
    c.logp_bev_old = c.map.logprob;
    c.logp_nav_old = c.actions.logprob;
    c.reward = score(c.actions, gt);
    group.push_back(std::move(c));
  }
  assign_advantages(group);
  return group;
}

void assign_advantages(std::span<RolloutCandidate> group) {
  std::vector<double> r;
  for (const auto& c : group) r.push_back(c.reward.total());
  const std::vector<double> a = group_advantages(r);
  for (std::size_t k = 0; k < group.size(); ++k) group[k].advantage = a[k];
}

Var grpo_loss(Graph& g, Model& theta, Model& phi, const mapgen::Vocab& vocab,
              std::span<const RolloutCandidate> candidates, const RftConfig& cfg,
              double* clip_frac) {
  std::vector<Var> ratios;
  std::vector<double> adv;
  int clipped = 0;
  for (const RolloutCandidate& c : candidates) {
    check_finite(c.advantage, "advantage");
    if (c.advantage == 0.0) {
      ratios.push_back(g.scalar(1.0));
    } else {
      Var nav = policy::action_logprob(g, theta, c.policy_ctx, c.actions.raw_tokens,
                                       static_cast<int>(c.actions.raw_tokens.size()));
      Var bev = mapgen::map_logprob(g, phi, vocab, c.map_ctx, c.map.tokens);
      ratios.push_back(coupled_ratio(nav, c.logp_nav_old, bev, c.logp_bev_old));
    }
    const double rho = ratios.back().item();
    if (rho < 1.0 - cfg.clip_eps || rho > 1.0 + cfg.clip_eps) ++clipped;
    adv.push_back(c.advantage);
  }
  if (clip_frac) *clip_frac = candidates.empty() ? 0.0 : double(clipped) / double(candidates.size());
  return clipped_objective(ratios, adv, cfg.clip_eps);
}

RftState::RftState(Model policy, Model map_model)
    : theta(std::move(policy)), phi(std::move(map_model)), theta_old(theta), phi_old(phi) {}

RftStats rft_step(RftState& st, const mapgen::Vocab& vocab,
                  std::span<const policy::EnvState> states, const RftConfig& cfg) {
  cfg.validate();
  RftStats stats;
  stats.step = st.step;
  std::vector<RolloutCandidate> batch;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::uint64_t seed =
        splitmix(cfg.seed ^ splitmix(static_cast<std::uint64_t>(st.step) * 1000003ULL + i));
    for (RolloutCandidate& c : group_rollout(st.theta_old, st.phi_old, vocab, states[i], cfg, seed)) {
      batch.push_back(std::move(c));
    }
  }
  for (const RolloutCandidate& c : batch) {
    stats.mean_r_act += c.reward.r_act;
    stats.mean_r_fmt += c.reward.r_fmt;
  }
  if (!batch.empty()) {
    stats.mean_r_act /= static_cast<double>(batch.size());
    stats.mean_r_fmt /= static_cast<double>(batch.size());

    st.theta.zero_grad();
    st.phi.zero_grad();
    Graph g;
    Var loss = grpo_loss(g, st.theta, st.phi, vocab, batch, cfg, &stats.clip_frac);
    stats.loss = loss.item();
    g.backward(loss);
    stats.grad_norm_theta = tensor::grad_norm(st.theta);
    stats.grad_norm_phi = tensor::grad_norm(st.phi);
    if (cfg.max_grad_norm > 0.0) {
      tensor::clip_grad_norm(st.theta, cfg.max_grad_norm);
      tensor::clip_grad_norm(st.phi, cfg.max_grad_norm);
    }
    st.opt_theta.step(st.theta, cfg.lr);
    st.opt_phi.step(st.phi, cfg.lr);
  }
  ++st.step;
  if (st.step % cfg.sync_every == 0) {
    st.theta_old = st.theta;
    st.phi_old = st.phi;
  }
  return stats;
}

std::string stats_log_line(const RftStats& s) {
  nlohmann::json j;
  j["step"] = s.step;
  j["mean_r_act"] = s.mean_r_act;
  j["mean_r_fmt"] = s.mean_r_fmt;
  j["loss"] = s.loss;
  j["clip_frac"] = s.clip_frac;
  j["grad_norms"] = {{"theta", s.grad_norm_theta}, {"phi", s.grad_norm_phi}};
  return j.dump();
}

}  // namespace mapnav::rft
