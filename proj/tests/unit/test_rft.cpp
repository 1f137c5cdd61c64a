#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "mapnav/error.hpp"
#include "mapnav/rft/rft.hpp"
#include "mapnav/tensor/gradcheck.hpp"
#include "mapnav/world/generator.hpp"

using namespace mapnav;
using namespace mapnav::rft;
using mapgen::Layout;
using mapgen::Vocab;

namespace {

// Independent oracle: the number of i for which pred[0..i] == gt[0..i].
int prefix_oracle(const std::vector<Action>& pred, const std::vector<Action>& gt) {
  int total = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    bool all = true;
    for (std::size_t j = 0; j <= i; ++j) all = all && pred[j] == gt[j];
    total += all ? 1 : 0;
  }
  return total;
}

std::vector<Action> triple(int code) {
  return {static_cast<Action>(code % 4), static_cast<Action>((code / 4) % 4),
          static_cast<Action>(code / 16)};
}

Layout small_layout() {
  Layout l;
  l.obs_size = 3;
  l.history = 1;
  l.map_size = 2;
  return l;
}

tensor::TransformerConfig cfg_for(int context_len, std::uint64_t seed) {
  tensor::TransformerConfig c;
  c.vocab_size = Vocab(8).size();
  c.context_len = context_len;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.seed = seed;
  return c;
}

struct Setup {
  world::World world = world::generate_world(3);
  world::Episode episode = world::make_episode(world, "w", 3);
  Layout layout = small_layout();
  Vocab vocab{8};
  tensor::Model theta{cfg_for(layout.policy_sequence_len(), 1)};
  tensor::Model phi{cfg_for(layout.map_sequence_len(), 2)};
};

// A group with a non-degenerate reward vector, forced if sampling alone
// produces equal rewards.
std::vector<RolloutCandidate> nondegenerate_group(Setup& s, const RftConfig& cfg) {
  const policy::EnvState st = policy::reset_env(s.world, s.episode, s.layout);
  std::vector<RolloutCandidate> group = group_rollout(s.theta, s.phi, s.vocab, st, cfg, 77);
  for (std::size_t k = 0; k < group.size(); ++k) {
    group[k].reward = {static_cast<int>(k % 4), static_cast<int>(k % 2)};
  }
  assign_advantages(group);
  return group;
}

}  // namespace

TEST_CASE("action_reward matches the prefix oracle on all pairs") {
  for (int p = 0; p < 64; ++p) {
    for (int q = 0; q < 64; ++q) {
      const std::vector<Action> pred = triple(p), gt = triple(q);
      REQUIRE(action_reward(pred, gt) == prefix_oracle(pred, gt));
    }
  }
  const std::vector<Action> gt = {Action::Forward, Action::TurnLeft, Action::Forward};
  CHECK(action_reward(gt, gt) == 3);
  CHECK(action_reward(std::vector<Action>{Action::Forward, Action::Stop, Action::Forward}, gt) == 1);
  CHECK(action_reward(std::vector<Action>{Action::Stop, Action::TurnLeft, Action::Forward}, gt) == 0);
  CHECK(action_reward(std::nullopt, gt) == 0);
}

TEST_CASE("format_reward and breakdown") {
  const Vocab v(8);
  const int b = v.action_base();
  const std::vector<Action> gt = {Action::Forward, Action::Forward, Action::Stop};
  const RewardBreakdown ok = score(policy::parse_actions(v, {b + 1, b + 1, b}), gt);
  CHECK(ok.r_fmt == 1);
  CHECK(ok.r_act == 3);
  CHECK(ok.total() == 4);
  const RewardBreakdown bad = score(policy::parse_actions(v, {b + 1, 7, b}), gt);
  CHECK(bad.r_fmt == 0);
  CHECK(bad.r_act == 0);
}

TEST_CASE("group_advantages") {
  const std::vector<double> a = group_advantages(std::vector<double>{1, 2, 3, 4});
  const double expect[] = {-1.3416, -0.4472, 0.4472, 1.3416};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a[static_cast<std::size_t>(i)] - expect[i]) < 1e-3);
  for (double x : group_advantages(std::vector<double>{2, 2, 2})) CHECK(x == 0.0);

  std::mt19937_64 rng(3);
  for (int it = 0; it < 1000; ++it) {
    const std::size_t n = 2 + rng() % 63;
    std::vector<double> r(n);
    for (double& x : r) x = static_cast<double>(rng() % 5);
    r[0] = 0.0;
    r[1] = 4.0;
    const std::vector<double> adv = group_advantages(r);
    double mean = 0.0, var = 0.0;
    for (double x : adv) mean += x;
    mean /= static_cast<double>(n);
    for (double x : adv) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(var / static_cast<double>(n)) - 1.0) <= 1e-6);
    std::vector<double> shifted = r;
    for (double& x : shifted) x += 17.5;
    const std::vector<double> adv2 = group_advantages(shifted);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(adv[i] - adv2[i]) <= 1e-9);
  }
}

TEST_CASE("coupled_ratio and clipped objective identities") {
  CHECK(coupled_ratio(-3.0, -3.0, -10.0, -10.0) == 1.0);
  CHECK(std::abs(coupled_ratio(std::log(0.2), std::log(0.1), std::log(0.3), std::log(0.6)) - 1.0) < 1e-12);
  CHECK(coupled_ratio(-1.0, -2.0, -1.0, -1.0) > coupled_ratio(-1.5, -2.0, -1.0, -1.0));
  CHECK_THROWS_AS(coupled_ratio(NAN, 0.0, 0.0, 0.0), Error);
  CHECK_THROWS_AS(coupled_ratio(0.0, -1000.0, 0.0, 0.0), Error);

  CHECK(std::abs(-clipped_term(2.0, 1.0, 0.28) - (-1.28)) < 1e-12);
  CHECK(std::abs(-clipped_term(0.5, -1.0, 0.28) - 0.72) < 1e-12);

  Graph g;
  std::vector<Var> rhos = {g.scalar(2.0), g.scalar(0.5)};
  const std::vector<double> adv = {1.0, -1.0};
  CHECK(std::abs(clipped_objective(rhos, adv, 0.28).item() - (-1.28 + 0.72) / 2.0) < 1e-12);

  std::vector<Var> ones = {g.scalar(1.0), g.scalar(1.0), g.scalar(1.0)};
  const std::vector<double> norm = group_advantages(std::vector<double>{0, 1, 3});
  CHECK(std::abs(clipped_objective(ones, norm, 0.28).item()) < 1e-9);

  // Per-candidate bound: the term never exceeds either branch.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double rho = std::exp(u(rng)), a = u(rng);
    const double t = clipped_term(rho, a, 0.28);
    CHECK(t <= rho * a + 1e-15);
    CHECK(t <= std::clamp(rho, 0.72, 1.28) * a + 1e-15);
  }
}

TEST_CASE("RftConfig validation") {
  RftConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.group_size == 8);
  CHECK(c.clip_eps == 0.28);
  CHECK(c.kl_coeff == 0.0);
  c.group_size = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.clip_eps = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("group_rollout determinism and shared labels") {
  Setup s;
  RftConfig cfg;
  const policy::EnvState st = policy::reset_env(s.world, s.episode, s.layout);
  const auto a = group_rollout(s.theta, s.phi, s.vocab, st, cfg, 5);
  const auto b = group_rollout(s.theta, s.phi, s.vocab, st, cfg, 5);
  REQUIRE(a.size() == 8);
  bool maps_differ = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].map.tokens == b[k].map.tokens);
    CHECK(a[k].actions.raw_tokens == b[k].actions.raw_tokens);
    CHECK(a[k].logp_nav_old == b[k].logp_nav_old);
    CHECK(a[k].logp_bev_old == b[k].logp_bev_old);
    CHECK(a[k].map_ctx == a[0].map_ctx);
    CHECK(a[k].logp_nav_old <= 0.0);
    CHECK(a[k].logp_bev_old <= 0.0);
    CHECK(std::isfinite(a[k].advantage));
    maps_differ = maps_differ || a[k].map.tokens != a[0].map.tokens;
  }
  CHECK(maps_differ);
}

TEST_CASE("grpo_loss at the rollout snapshot: zero value, policy-gradient direction") {
  Setup s;
  RftConfig cfg;
  const auto group = nondegenerate_group(s, cfg);
  s.theta.zero_grad();
  s.phi.zero_grad();
  Graph g;
  double clip_frac = -1.0;
  Var loss = grpo_loss(g, s.theta, s.phi, s.vocab, group, cfg, &clip_frac);
  CHECK(std::abs(loss.item()) < 1e-9);
  CHECK(clip_frac == 0.0);
  g.backward(loss);
  CHECK(tensor::grad_norm(s.theta) > 0.0);
  CHECK(tensor::grad_norm(s.phi) > 0.0);

  // Reference: -mean_k A_k * grad(logp_nav + logp_bev).
  tensor::Model theta_ref = s.theta, phi_ref = s.phi;
  theta_ref.zero_grad();
  phi_ref.zero_grad();
  Graph gr;
  std::vector<Var> terms;
  for (const auto& c : group) {
    Var lp = tensor::add(policy::action_logprob(gr, theta_ref, c.policy_ctx, c.actions.raw_tokens, 3),
                         mapgen::map_logprob(gr, phi_ref, s.vocab, c.map_ctx, c.map.tokens));
    terms.push_back(tensor::scale(lp, -c.advantage / static_cast<double>(group.size())));
  }
  gr.backward(tensor::add_n(terms));
  for (std::size_t i = 0; i < s.theta.params().size(); ++i) {
    const auto& ga = s.theta.params()[i].grad.data;
    const auto& gb = theta_ref.params()[i].grad.data;
    for (std::size_t j = 0; j < ga.size(); ++j) REQUIRE(std::abs(ga[j] - gb[j]) < 1e-9);
  }
}

TEST_CASE("reward shift leaves loss and gradients unchanged") {
  Setup s;
  RftConfig cfg;
  auto group = nondegenerate_group(s, cfg);
  // Move away from the snapshot so ratios differ from 1.
  for (auto& p : s.theta.params()) {
    for (double& x : p.value.data) x *= 1.05;
  }
  auto eval = [&](const std::vector<RolloutCandidate>& grp, std::vector<double>& grads) {
    s.theta.zero_grad();
    s.phi.zero_grad();
    Graph g;
    Var l = grpo_loss(g, s.theta, s.phi, s.vocab, grp, cfg);
    g.backward(l);
    grads.clear();
    for (const auto* m : {&s.theta, &s.phi}) {
      for (const auto& p : m->params()) grads.insert(grads.end(), p.grad.data.begin(), p.grad.data.end());
    }
    return l.item();
  };
  std::vector<double> g1, g2;
  const double l1 = eval(group, g1);
  std::vector<double> rewards;
  for (const auto& c : group) rewards.push_back(c.reward.total() + 3.25);
  const std::vector<double> adv = group_advantages(rewards);
  auto shifted = group;
  for (std::size_t k = 0; k < shifted.size(); ++k) shifted[k].advantage = adv[k];
  const double l2 = eval(shifted, g2);
  CHECK(std::abs(l1 - l2) < 1e-9);
  for (std::size_t i = 0; i < g1.size(); ++i) REQUIRE(std::abs(g1[i] - g2[i]) < 1e-9);
}

TEST_CASE("grpo_loss gradient check on both models") {
  Setup s;
  RftConfig cfg;
  cfg.group_size = 4;
  auto group = nondegenerate_group(s, cfg);
  for (auto& p : s.phi.params()) {
    for (double& x : p.value.data) x *= 1.02;
  }
  std::vector<tensor::Model*> models = {&s.theta, &s.phi};
  tensor::GradCheckOptions opts;
  opts.n_probes = 60;
  opts.seed = 11;
  const auto report = tensor::finite_diff_check(
      models, [&](Graph& g) { return grpo_loss(g, s.theta, s.phi, s.vocab, group, cfg); }, opts);
  MESSAGE("grpo max rel err theta " << report.max_rel_err_per_model[0] << " phi "
                                    << report.max_rel_err_per_model[1]);
  CHECK(report.pass);
}

TEST_CASE("rft_step plumbing") {
  Setup s;
  RftConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_states = 2;
  std::vector<policy::EnvState> states;
  states.push_back(policy::reset_env(s.world, s.episode, s.layout));
  policy::EnvState next = states[0];
  policy::advance(next, s.episode.oracle_path[0], 100);
  states.push_back(next);

  RftState a(s.theta, s.phi), b(s.theta, s.phi);
  const RftStats sa = rft_step(a, s.vocab, states, cfg);
  const RftStats sb = rft_step(b, s.vocab, states, cfg);
  CHECK(sa.loss == sb.loss);
  CHECK(std::abs(sa.loss) < 1e-9);
  CHECK(sa.clip_frac == 0.0);
  CHECK(sa.mean_r_fmt >= 0.0);
  CHECK(sa.mean_r_fmt <= 1.0);
  CHECK(a.step == 1);
  CHECK(a.theta.params()[0].value.data == b.theta.params()[0].value.data);
  CHECK(a.theta_old.params()[0].value.data == a.theta.params()[0].value.data);
  const nlohmann::json j = nlohmann::json::parse(stats_log_line(sa));
  CHECK(j.contains("grad_norms"));
  CHECK(j["step"] == 0);
}

TEST_CASE("all-equal rewards give a zero gradient") {
  Setup s;
  RftConfig cfg;
  const policy::EnvState st = policy::reset_env(s.world, s.episode, s.layout);
  auto group = group_rollout(s.theta, s.phi, s.vocab, st, cfg, 1);
  for (auto& c : group) c.reward = {1, 1};
  assign_advantages(group);
  s.theta.zero_grad();
  s.phi.zero_grad();
  Graph g;
  Var l = grpo_loss(g, s.theta, s.phi, s.vocab, group, cfg);
  g.backward(l);
  CHECK(l.item() == 0.0);
  CHECK(tensor::grad_norm(s.theta) == 0.0);
  CHECK(tensor::grad_norm(s.phi) == 0.0);
}
