#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mapnav/error.hpp"
#include "mapnav/training/config.hpp"
#include "mapnav/training/pipeline.hpp"

using namespace mapnav;
using namespace mapnav::training;
namespace fs = std::filesystem;

namespace {

mapgen::Layout small_layout() {
  mapgen::Layout l;
  l.obs_size = 3;
  l.history = 1;
  l.map_size = 5;
  return l;
}

const harness::Suite& fixture_suite() {
  static const harness::Suite s = harness::make_suite("t", 4, 3, 11);
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mapnav_" + name);
  fs::remove_all(p);
  return p;
}

// Walks the label window from the sample state: every Forward lowers the
// geodesic distance by one and Stop only appears inside the radius.
void check_oracle_consistent(const harness::Suite& suite, const mapgen::Layout& layout, const Sample& s,
                             int radius) {
  const policy::EnvState st = replay_state(suite, layout, s);
  const world::World& w = *st.world;
  const world::DistanceField field = world::geodesic_field(w, st.episode->goal);
  world::Pose p = st.pose;
  int turns = 0;
  for (Action a : s.gt_actions) {
    const int before = field.at(p.x, p.y);
    if (a == Action::Stop) {
      CHECK(before <= radius);
      break;
    }
    CHECK(before > radius);
    p = world::step(w, p, a);
    if (a == Action::Forward) {
      CHECK(field.at(p.x, p.y) == before - 1);
      turns = 0;
    } else {
      CHECK(++turns <= 2);
    }
  }
}

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.world.train_worlds = 3;
  c.world.train_episodes_per_world = 1;
  c.world.eval_worlds = 2;
  c.world.eval_episodes_per_world = 1;
  c.model.layout = small_layout();
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.n_layers = 1;
  c.stage1_map.steps = 6;
  c.stage1_map.lr = 3e-3;
  c.stage1_map.batch = 2;
  c.stage1_policy.train.steps = 6;
  c.stage1_policy.train.lr = 3e-3;
  c.stage1_policy.train.batch = 2;
  c.stage1_policy.dagger_steps = 3;
  c.stage2.rft.steps = 2;
  c.stage2.rft.lr = 1e-3;
  c.stage2.rft.group_size = 2;
  c.stage2.rft.batch_states = 1;
  c.eval.max_steps = 8;
  return c;
}

}  // namespace

TEST_CASE("oracle data: one sample per step, Stop-padded final window") {
  const mapgen::Layout layout = small_layout();
  const harness::Suite& suite = fixture_suite();
  const std::vector<Sample> samples = collect_oracle_data(suite, layout, {}, 1);
  std::size_t expected = 0;
  for (const auto& e : suite.episodes) expected += e.oracle_path.size();
  REQUIRE(samples.size() == expected);

  std::size_t i = 0;
  for (std::size_t e = 0; e < suite.episodes.size(); ++e) {
    const std::size_t n = suite.episodes[e].oracle_path.size();
    for (std::size_t k = 0; k < n; ++k, ++i) {
      CHECK(samples[i].episode == static_cast<int>(e));
      CHECK(samples[i].step == static_cast<int>(k));
      CHECK(samples[i].prefix.size() == k);
      CHECK(samples[i].gt_actions.front() == suite.episodes[e].oracle_path[k]);
    }
    CHECK(samples[i - 1].gt_actions == std::vector<Action>(3, Action::Stop));
  }

  const mapgen::Vocab vocab(layout.dist_bins);
  for (const Sample& s : samples) {
    CHECK(static_cast<int>(s.map_ctx.size()) == layout.map_prefix_len());
    REQUIRE(static_cast<int>(s.bev_tokens.size()) == layout.map_tokens());
    for (int t : s.bev_tokens) CHECK(vocab.is_map_token(t));
    check_oracle_consistent(suite, layout, s, 1);
  }
  CHECK(collect_oracle_data(suite, layout, {}, 1).size() == samples.size());
  const std::vector<Sample> again = collect_oracle_data(suite, layout, {}, 1);
  for (std::size_t k = 0; k < samples.size(); ++k) CHECK(again[k].bev_tokens == samples[k].bev_tokens);
}

TEST_CASE("oracle data: a 7-step episode yields 7 samples") {
  const mapgen::Layout layout = small_layout();
  const harness::Suite big = harness::make_suite("seven", 12, 4, 5);
  harness::Suite one;
  for (std::size_t e = 0; e < big.episodes.size(); ++e) {
    if (big.episodes[e].oracle_path.size() == 7) {
      one.worlds.push_back(big.world_of(e));
      one.world_ids.push_back(big.world_ids[static_cast<std::size_t>(big.episode_world[e])]);
      one.episodes.push_back(big.episodes[e]);
      one.episode_world.push_back(0);
      break;
    }
  }
  REQUIRE(one.episodes.size() == 1);
  const std::vector<Sample> s = collect_oracle_data(one, layout, {}, 1);
  REQUIRE(s.size() == 7);
  CHECK(s.back().gt_actions == std::vector<Action>{Action::Stop, Action::Stop, Action::Stop});
}

TEST_CASE("dagger data: untrained policy leaves the expert path, labels stay optimal") {
  const mapgen::Layout layout = small_layout();
  const harness::Suite& suite = fixture_suite();
  const tensor::Model theta(policy_model_config(layout, 16, 2, 1, 3));
  harness::ModelAgent agent(theta, nullptr, harness::MapSource::Constant, {}, {false, 1.0, 9});
  DaggerConfig cfg;
  cfg.seed = 4;
  cfg.max_steps = 12;
  const std::vector<Sample> samples = collect_dagger_data(suite, layout, agent, {}, cfg);
  int off = 0;
  for (const Sample& s : samples) {
    off += s.on_path ? 0 : 1;
    CHECK(s.step < cfg.max_steps);
    check_oracle_consistent(suite, layout, s, cfg.success_radius);
  }
  CHECK(off >= 1);

  const std::vector<Sample> again = collect_dagger_data(suite, layout, agent, {}, cfg);
  REQUIRE(again.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(again[i].prefix == samples[i].prefix);

  cfg.max_steps = 3;
  for (const Sample& s : collect_dagger_data(suite, layout, agent, {}, cfg)) CHECK(s.step < 3);
}

TEST_CASE("samples round-trip through JSONL") {
  const std::vector<Sample> samples = collect_oracle_data(fixture_suite(), small_layout(), {}, 1);
  const fs::path dir = temp_dir("samples");
  fs::create_directories(dir);
  save_samples(samples, (dir / "s.jsonl").string());
  const std::vector<Sample> back = load_samples((dir / "s.jsonl").string());
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].episode == samples[i].episode);
    CHECK(back[i].step == samples[i].step);
    CHECK(back[i].on_path == samples[i].on_path);
    CHECK(back[i].map_ctx == samples[i].map_ctx);
    CHECK(back[i].bev_tokens == samples[i].bev_tokens);
    CHECK(back[i].gt_actions == samples[i].gt_actions);
    CHECK(back[i].prefix == samples[i].prefix);
  }
  supervision::write_file((dir / "bad.jsonl").string(), "{\"episode\": 1}\n");
  CHECK_THROWS_AS(load_samples((dir / "bad.jsonl").string()), Error);
}

TEST_CASE("stage1 map: loss below ln 48 after 100 steps, resume reproduces losses") {
  const mapgen::Layout layout = small_layout();
  const std::vector<Sample> samples = collect_oracle_data(fixture_suite(), layout, {}, 1);
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.steps = 100;
  cfg.batch = 4;
  cfg.seed = 2;
  Trainee t(tensor::Model(map_model_config(layout, 16, 2, 1, 1)));
  const std::vector<double> losses = stage1_train_map(t, samples, cfg);
  REQUIRE(losses.size() == 100);
  CHECK(losses.back() < std::log(48.0));
  CHECK(t.step() == 100);

  Trainee a(tensor::Model(map_model_config(layout, 16, 2, 1, 1)));
  cfg.steps = 20;
  const std::vector<double> full = stage1_train_map(a, samples, cfg);
  Trainee b(tensor::Model(map_model_config(layout, 16, 2, 1, 1)));
  cfg.steps = 10;
  stage1_train_map(b, samples, cfg);
  const fs::path dir = temp_dir("resume");
  fs::create_directories(dir);
  b.save((dir / "m").string());
  Trainee c = Trainee::load((dir / "m").string());
  cfg.steps = 20;
  const std::vector<double> rest = stage1_train_map(c, samples, cfg);
  REQUIRE(rest.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(rest[i] == full[10 + i]);
}

TEST_CASE("stage1 policy trains with a distance-only channel mask") {
  const mapgen::Layout layout = small_layout();
  supervision::ChannelMask mask = supervision::parse_channel_mask("distance");
  const std::vector<Sample> samples = collect_oracle_data(fixture_suite(), layout, mask, 1);
  for (const Sample& s : samples) {
    const mapgen::Vocab vocab(layout.dist_bins);
    const mapgen::Codebook cb(layout.dist_bins);
    for (int t : s.bev_tokens) {
      std::uint8_t occ = 0, dist = 0, lm = 0;
      cb.decode(vocab.map_code(t), occ, dist, lm);
      CHECK(occ == supervision::kOccUnknown);
      CHECK(lm == supervision::kLmOff);
    }
  }
  Trainee phi(tensor::Model(map_model_config(layout, 16, 2, 1, 1)));
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.steps = 10;
  cfg.batch = 2;
  stage1_train_map(phi, samples, cfg);
  const auto maps = policy_maps(samples, harness::MapSource::Generated, &phi.model, layout);
  Trainee theta(tensor::Model(policy_model_config(layout, 16, 2, 1, 2)));
  const std::vector<double> losses = stage1_train_policy(theta, samples, maps, cfg);
  CHECK(losses.size() == 10);
  for (double l : losses) CHECK(std::isfinite(l));
  const PolicyAccuracy acc = policy_accuracy(theta.model, samples, maps);
  CHECK(acc.next_action >= 0.0);
  CHECK(acc.format_valid <= 1.0);
}

TEST_CASE("config: parse, format, overrides, errors") {
  const PipelineConfig def;
  const std::string text = format_config(def);
  CHECK(format_config(parse_config(text)) == text);

  const PipelineConfig c = parse_config(
      "# comment\n[run]\nseed = 7\nchannels = distance,landmark\n\n[model]\nmap_size = 9 ; trailing\n"
      "[stage1_policy]\nmap_source = ground_truth\ncosine_decay = true\n[stage2]\nlr = 2.5e-4\n");
  CHECK(c.seed == 7);
  CHECK(c.channels == supervision::parse_channel_mask("distance,landmark"));
  CHECK(c.model.layout.map_size == 9);
  CHECK(c.stage1_policy.map_source == harness::MapSource::GroundTruth);
  CHECK(c.stage1_policy.train.cosine_decay);
  CHECK(c.stage2.rft.lr == 2.5e-4);

  PipelineConfig o = def;
  apply_override(o, "eval.max_steps = 33");
  CHECK(o.eval.max_steps == 33);

  auto config_error = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConfigError;
    }
    return false;
  };
  CHECK(config_error([] { parse_config("[world]\nbogus = 1\n"); }));
  CHECK(config_error([] { parse_config("[nosuch]\nseed = 1\n"); }));
  CHECK(config_error([] { parse_config("seed = 1\n"); }));
  CHECK(config_error([] { parse_config("[run]\nseed = x\n"); }));
  CHECK(config_error([] { parse_config("[eval]\nmax_steps = 3.5\n"); }));
  CHECK(config_error([] { parse_config("[stage1_map]\ncosine_decay = maybe\n"); }));
  CHECK(config_error([] { parse_config("[run\n"); }));
  CHECK(config_error([&] { apply_override(o, "eval.max_steps"); }));
  CHECK(config_error([] { load_config("/nonexistent/c.ini"); }));
  CHECK(config_error([] { parse_config("[stage2]\nkl_coeff = 0.1\n").validate(); }));
  CHECK_NOTHROW(def.validate());
}

TEST_CASE("pipeline: bit-identical reruns and paired ablation suites") {
  const PipelineConfig cfg = tiny_config();
  const fs::path a = temp_dir("pipe_a"), b = temp_dir("pipe_b");
  const PipelineResult ra = run_pipeline(cfg, {a.string()}, false);
  const PipelineResult rb = run_pipeline(cfg, {b.string()}, false);
  CHECK(harness::metrics_csv_row(ra.stage2) == harness::metrics_csv_row(rb.stage2));
  for (const char* f : {"map.ckpt", "policy.ckpt", "rft_policy.ckpt", "rft_map.ckpt", "rft.jsonl",
                        "oracle.jsonl", "dagger.jsonl"}) {
    CAPTURE(f);
    CHECK(supervision::read_file((a / f).string()) == supervision::read_file((b / f).string()));
  }
  CHECK(ra.stage2.spl <= ra.stage2.sr);
  CHECK(ra.stage2.osr >= ra.stage2.sr);

  const fs::path root = temp_dir("ablate");
  const auto rows = run_ablation(AblationSuite::Staged, cfg, {1}, root.string(), false);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].arm == "no-map");
  CHECK(rows[2].arm == "SPT+RFT");
  const harness::Suite s0 = harness::load_suite((root / "s1/S5-all-constant/eval").string());
  const harness::Suite s1 = harness::load_suite((root / "s1/S5-all-generated/eval").string());
  REQUIRE(s0.episodes.size() == s1.episodes.size());
  for (std::size_t i = 0; i < s0.episodes.size(); ++i) {
    CHECK(s0.episode_id(i) == s1.episode_id(i));
    CHECK(s0.episodes[i] == s1.episodes[i]);
  }
  CHECK(ablation_csv_row(rows[0]).rfind("no-map,1,25,", 0) == 0);
}
