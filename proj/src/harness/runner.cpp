#include "mapnav/harness/runner.hpp"

#include <cmath>

#include "mapnav/error.hpp"
#include "mapnav/mapgen/map_module.hpp"
#include "mapnav/rft/rft.hpp"

namespace mapnav::harness {

MapSource parse_map_source(std::string_view text) {
  if (text == "ground_truth") return MapSource::GroundTruth;
  if (text == "generated") return MapSource::Generated;
  if (text == "constant" || text == "none") return MapSource::Constant;
  throw Error(ErrorCode::ConfigError, "unknown map_source '" + std::string(text) + "'");
}

std::string_view map_source_name(MapSource s) {
  switch (s) {
    case MapSource::GroundTruth: return "ground_truth";
    case MapSource::Generated: return "generated";
    case MapSource::Constant: return "constant";
  }
  return "?";
}

std::vector<int> constant_map_tokens(const mapgen::Layout& layout) {
  const mapgen::Vocab vocab(layout.dist_bins);
  const mapgen::Codebook cb(layout.dist_bins);
  const int code = cb.encode(supervision::kOccUnknown, supervision::kDistFar, supervision::kLmOff);
  return std::vector<int>(static_cast<std::size_t>(layout.map_tokens()), vocab.map_token(code));
}

std::vector<int> ground_truth_map_tokens(const policy::EnvState& state,
                                         const supervision::ChannelMask& mask) {
  const mapgen::Vocab vocab(state.layout.dist_bins);
  supervision::BevMap bev = policy::ground_truth_bev(state);
  supervision::apply_channel_mask(bev, mask);
  std::vector<int> out;
  for (int c : mapgen::tokenize_bev(bev, mapgen::Codebook(state.layout.dist_bins))) {
    out.push_back(vocab.map_token(c));
  }
  return out;
}

ModelAgent::ModelAgent(const tensor::Model& theta, const tensor::Model* phi, MapSource source,
                       supervision::ChannelMask mask, tensor::SampleOptions opts)
    : theta_(theta), phi_(phi), source_(source), mask_(mask), opts_(opts) {
  if (source == MapSource::Generated && phi == nullptr) {
    throw Error(ErrorCode::InvalidConfig, "generated maps need a map model");
  }
}

mapgen::GeneratedMap ModelAgent::make_map(const policy::EnvState& state, std::uint64_t seed) const {
  mapgen::GeneratedMap g;
  switch (source_) {
    case MapSource::GroundTruth: g.tokens = ground_truth_map_tokens(state, mask_); return g;
    case MapSource::Constant: g.tokens = constant_map_tokens(state.layout); return g;
    case MapSource::Generated: break;
  }
  const mapgen::Vocab vocab(state.layout.dist_bins);
  tensor::SampleOptions o = opts_;
  o.seed = seed;
  return mapgen::generate_map(*phi_, vocab, policy::map_context(state), state.layout.map_size, o);
}

std::vector<int> ModelAgent::map_tokens(const policy::EnvState& state, std::uint64_t seed) const {
  return make_map(state, seed).tokens;
}

policy::ActionSequence ModelAgent::act(const policy::EnvState& state, int decision) {
  const std::uint64_t seed = mix_seed(mix_seed(opts_.seed, episode_seed_), static_cast<std::uint64_t>(decision));
  mapgen::GeneratedMap g = make_map(state, seed);
  if (map_log_) map_log_->push_back(mapgen::map_dump_line(episode_id_, state.steps, g));
  const std::vector<int> map = std::move(g.tokens);
  const mapgen::Vocab vocab(state.layout.dist_bins);
  tensor::SampleOptions o = opts_;
  o.seed = mix_seed(seed, 1);
  return policy::predict_actions(theta_, vocab, policy::policy_context(state, map),
                                 state.layout.n_actions, o);
}

policy::ActionSequence OracleAgent::act(const policy::EnvState& state, int) {
  const mapgen::Vocab vocab(state.layout.dist_bins);
  std::vector<int> raw;
  for (world::Action a : policy::oracle_window(state, radius_)) raw.push_back(vocab.action_token(a));
  return policy::parse_actions(vocab, std::move(raw));
}

EpisodeResult run_episode(Agent& agent, const world::World& world, const world::Episode& episode,
                          const mapgen::Layout& layout, const EvalConfig& cfg,
                          const std::string& episode_id, std::vector<std::string>* log,
                          policy::EnvState* final_state) {
  policy::EnvState s = policy::reset_env(world, episode, layout);
  EpisodeResult r;
  r.shortest_length = s.goal_distance();
  int decision = 0;
  while (!s.done) {
    const policy::ActionSequence seq = agent.act(s, decision);
    const int step = s.steps;
    rft::RewardBreakdown reward;
    if (log) reward = rft::score(seq, policy::oracle_window(s, cfg.success_radius));
    if (seq.valid()) {
      policy::execute_plan(s, seq, cfg.execute_steps, cfg.max_steps);
    } else {
      ++r.malformed;
      ++s.steps;
      if (s.steps >= cfg.max_steps) s.done = true;
    }
    if (log) {
      log->push_back(policy::trajectory_log_line(episode_id, step, seq, s.pose, reward.r_act,
                                                 reward.r_fmt));
    }
    ++decision;
  }
  r.stopped = s.stopped;
  r.path_length = s.path_length;
  r.steps = s.steps;
  r.final_goal_distance = s.goal_distance();
  r.min_goal_distance = s.min_goal_distance;
  r.success = s.stopped && r.final_goal_distance <= cfg.success_radius;
  r.final_euclidean = std::hypot(static_cast<double>(s.pose.x - episode.goal.x),
                                 static_cast<double>(s.pose.y - episode.goal.y));
  if (final_state) *final_state = std::move(s);
  return r;
}

std::vector<EpisodeResult> evaluate(Agent& agent, const Suite& suite, const mapgen::Layout& layout,
                                    const EvalConfig& cfg, std::vector<std::string>* log) {
  std::vector<EpisodeResult> out;
  out.reserve(suite.episodes.size());
  for (std::size_t i = 0; i < suite.episodes.size(); ++i) {
    agent.begin_episode(static_cast<std::uint64_t>(i), suite.episode_id(i));
    out.push_back(run_episode(agent, suite.world_of(i), suite.episodes[i], layout, cfg,
                              suite.episode_id(i), log));
  }
  return out;
}

}  // namespace mapnav::harness
