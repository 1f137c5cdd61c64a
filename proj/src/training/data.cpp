#include "mapnav/training/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "json.hpp"

#include "mapnav/error.hpp"
#include "mapnav/mapgen/map_module.hpp"
#include "mapnav/tensor/sampling.hpp"

namespace mapnav::training {

std::vector<int> policy_context(const Sample& s, std::span<const int> map_tokens) {
  std::vector<int> out;
  out.reserve(s.map_ctx.size() + map_tokens.size());
  out.push_back(mapgen::Vocab::kBosPol);
  out.insert(out.end(), s.map_ctx.begin() + 1, s.map_ctx.end() - 1);
  out.insert(out.end(), map_tokens.begin(), map_tokens.end());
  out.push_back(mapgen::Vocab::kSep);
  return out;
}

Sample make_sample(const policy::EnvState& state, int episode, int step, bool on_path,
                   const supervision::ChannelMask& mask, int success_radius) {
  Sample s;
  s.episode = episode;
  s.step = step;
  s.on_path = on_path;
  s.map_ctx = policy::map_context(state);
  s.bev_tokens = harness::ground_truth_map_tokens(state, mask);
  s.gt_actions = policy::oracle_window(state, success_radius);
  s.prefix = state.actions;
  return s;
}

std::vector<Sample> collect_oracle_data(const harness::Suite& suite, const mapgen::Layout& layout,
                                        const supervision::ChannelMask& mask, int success_radius) {
  std::vector<Sample> out;
  for (std::size_t e = 0; e < suite.episodes.size(); ++e) {
    const world::Episode& ep = suite.episodes[e];
    policy::EnvState st = policy::reset_env(suite.world_of(e), ep, layout);
    const int n = static_cast<int>(ep.oracle_path.size());
    for (int i = 0; i < n; ++i) {
      out.push_back(make_sample(st, static_cast<int>(e), i, true, mask, success_radius));
      policy::advance(st, ep.oracle_path[static_cast<std::size_t>(i)], n + 1);
    }
  }
  return out;
}

std::vector<Sample> collect_dagger_data(const harness::Suite& suite, const mapgen::Layout& layout,
                                        harness::Agent& agent, const supervision::ChannelMask& mask,
                                        const DaggerConfig& cfg) {
  std::vector<Sample> out;
  for (std::size_t e = 0; e < suite.episodes.size(); ++e) {
    const world::Episode& ep = suite.episodes[e];
    const world::World& w = suite.world_of(e);
    std::vector<world::Pose> expert_poses{ep.start};
    for (Action a : ep.oracle_path) expert_poses.push_back(world::step(w, expert_poses.back(), a));

    std::mt19937_64 rng(harness::mix_seed(cfg.seed, e));
    agent.begin_episode(harness::mix_seed(cfg.seed, e + 0x5151));
    policy::EnvState st = policy::reset_env(w, ep, layout);
    int decision = 0;
    while (!st.done) {
      const bool on_path =
          std::find(expert_poses.begin(), expert_poses.end(), st.pose) != expert_poses.end();
      Sample s = make_sample(st, static_cast<int>(e), st.steps, on_path, mask, cfg.success_radius);
      const policy::ActionSequence seq = agent.act(st, decision++);
      Action a;
      if (tensor::unit_uniform(rng) < cfg.expert_mix) {
        a = s.gt_actions.front();
      } else if (seq.valid()) {
        a = seq.parsed->front();
      } else {
        a = static_cast<Action>(1 + rng() % 3);
      }
      out.push_back(std::move(s));
      policy::advance(st, a, cfg.max_steps);
    }
  }
  return out;
}

std::vector<std::vector<int>> policy_maps(std::span<const Sample> samples, harness::MapSource source,
                                          const tensor::Model* phi, const mapgen::Layout& layout) {
  std::vector<std::vector<int>> out;
  out.reserve(samples.size());
  const std::vector<int> constant = harness::constant_map_tokens(layout);
  const mapgen::Vocab vocab(layout.dist_bins);
  if (source == harness::MapSource::Generated && phi == nullptr) {
    throw Error(ErrorCode::InvalidConfig, "generated maps need a map model");
  }
  for (const Sample& s : samples) {
    switch (source) {
      case harness::MapSource::GroundTruth: out.push_back(s.bev_tokens); break;
      case harness::MapSource::Constant: out.push_back(constant); break;
      case harness::MapSource::Generated:
        out.push_back(mapgen::generate_map(*phi, vocab, s.map_ctx, layout.map_size, {true, 1.0, 0}).tokens);
        break;
    }
  }
  return out;
}

policy::EnvState replay_state(const harness::Suite& suite, const mapgen::Layout& layout,
                              const Sample& sample) {
  const std::size_t e = static_cast<std::size_t>(sample.episode);
  policy::EnvState st = policy::reset_env(suite.world_of(e), suite.episodes[e], layout);
  const int bound = static_cast<int>(sample.prefix.size()) + 1;
  for (Action a : sample.prefix) policy::advance(st, a, bound);
  return st;
}

void save_samples(std::span<const Sample> samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (const Sample& s : samples) {
    nlohmann::json j;
    j["episode"] = s.episode;
    j["step"] = s.step;
    j["on_path"] = s.on_path;
    j["map_ctx"] = s.map_ctx;
    j["bev"] = s.bev_tokens;
    j["gt"] = s.gt_actions;
    j["prefix"] = s.prefix;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::vector<Sample> load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      Sample s;
      s.episode = j.at("episode").get<int>();
      s.step = j.at("step").get<int>();
      s.on_path = j.at("on_path").get<bool>();
      s.map_ctx = j.at("map_ctx").get<std::vector<int>>();
      s.bev_tokens = j.at("bev").get<std::vector<int>>();
      s.gt_actions = j.at("gt").get<std::vector<Action>>();
      s.prefix = j.at("prefix").get<std::vector<Action>>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mapnav::training
