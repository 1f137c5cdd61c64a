#include "mapnav/training/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>

#include "mapnav/error.hpp"
#include "mapnav/tensor/checkpoint.hpp"

namespace mapnav::training {

namespace fs = std::filesystem;

namespace {

// Sub-seed streams derived from the run seed.
enum Stream : std::uint64_t {
  kTrainSuite = 1,
  kEvalSuite,
  kMapInit,
  kMapBatches,
  kPolicyInit,
  kPolicyBatches,
  kDagger,
  kRft,
  kRftStates,
};

std::uint64_t sub_seed(const PipelineConfig& cfg, Stream s) { return harness::mix_seed(cfg.seed, s); }

void say(const Progress& p, const std::string& msg) {
  if (p) p(msg);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool exists(const std::string& path) { return fs::exists(path); }

tensor::Model load_model(const std::string& path) {
  if (!exists(path)) throw Error(ErrorCode::IoError, "missing checkpoint " + path);
  return tensor::load_checkpoint(path);
}

// Logs every 250 steps and the last one.
StepCallback progress_callback(const Progress& p, const char* what, int total) {
  if (!p) return {};
  return [p, what, total](int step, double loss) {
    if (step % 250 == 0 || step == total) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s step %d/%d loss %.5f", what, step, total, loss);
      p(buf);
    }
    return true;
  };
}

bool uses_map_model(const PipelineConfig& cfg) {
  return cfg.stage1_policy.map_source == harness::MapSource::Generated;
}

}  // namespace

EvalStage parse_eval_stage(std::string_view text) {
  if (text == "stage1" || text == "sft") return EvalStage::Stage1;
  if (text == "stage2" || text == "rft") return EvalStage::Stage2;
  throw Error(ErrorCode::ConfigError, "unknown stage '" + std::string(text) + "' (stage1|stage2)");
}

void gen_worlds(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress) {
  cfg.validate();
  fs::create_directories(paths.dir);
  const world::EpisodeParams ep = cfg.episode_params();
  const harness::Suite train =
      harness::make_suite("train", cfg.world.train_worlds, cfg.world.train_episodes_per_world,
                          sub_seed(cfg, kTrainSuite), cfg.world.gen, ep);
  const harness::Suite eval =
      harness::make_suite("eval", cfg.world.eval_worlds, cfg.world.eval_episodes_per_world,
                          sub_seed(cfg, kEvalSuite), cfg.world.gen, ep);
  harness::save_suite(train, paths.train_suite());
  harness::save_suite(eval, paths.eval_suite());
  say(progress, "worlds: " + std::to_string(train.episodes.size()) + " train episodes, " +
                    std::to_string(eval.episodes.size()) + " held-out episodes");
}

void gen_data(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress) {
  cfg.validate();
  const harness::Suite train = harness::load_suite(paths.train_suite());
  const std::vector<Sample> samples =
      collect_oracle_data(train, cfg.model.layout, cfg.channels, cfg.eval.success_radius);
  save_samples(samples, paths.oracle_samples());
  say(progress, "data: " + std::to_string(samples.size()) + " oracle samples");
}

void pretrain_map(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress) {
  cfg.validate();
  const std::vector<Sample> samples = load_samples(paths.oracle_samples());
  Trainee t = exists(paths.map_model() + ".ckpt")
                  ? Trainee::load(paths.map_model())
                  : Trainee(tensor::Model(map_model_config(cfg.model.layout, cfg.model.d_model,
                                                           cfg.model.n_heads, cfg.model.n_layers,
                                                           sub_seed(cfg, kMapInit))));
  TrainConfig tc = cfg.stage1_map;
  tc.seed = sub_seed(cfg, kMapBatches);
  stage1_train_map(t, samples, tc, progress_callback(progress, "map", tc.steps));
  t.save(paths.map_model());
}

void pretrain_policy(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress) {
  cfg.validate();
  const PolicySection& pc = cfg.stage1_policy;
  const mapgen::Layout& layout = cfg.model.layout;
  const std::vector<Sample> oracle = load_samples(paths.oracle_samples());
  std::optional<tensor::Model> phi;
  if (uses_map_model(cfg)) phi = load_model(paths.map_model() + ".ckpt");
  const tensor::Model* phi_ptr = phi ? &*phi : nullptr;

  Trainee t(tensor::Model(policy_model_config(layout, cfg.model.d_model, cfg.model.n_heads,
                                              cfg.model.n_layers, sub_seed(cfg, kPolicyInit))));
  TrainConfig tc = pc.train;
  tc.seed = sub_seed(cfg, kPolicyBatches);
  const std::vector<std::vector<int>> oracle_maps = policy_maps(oracle, pc.map_source, phi_ptr, layout);
  stage1_train_policy(t, oracle, oracle_maps, tc, progress_callback(progress, "policy", tc.steps));

  const auto want = static_cast<std::size_t>(pc.dagger_ratio * static_cast<double>(oracle.size()));
  if (pc.dagger_steps == 0 || want == 0) {
    t.save(paths.policy_model());
    save_samples({}, paths.dagger_samples());
    return;
  }

  // One DAgger round with the oracle-phase policy, sampled decisions.
  const harness::Suite train = harness::load_suite(paths.train_suite());
  DaggerConfig dc;
  dc.max_steps = cfg.eval.max_steps;
  dc.success_radius = cfg.eval.success_radius;
  dc.expert_mix = pc.dagger_expert_mix;
  dc.seed = sub_seed(cfg, kDagger);
  harness::ModelAgent agent(t.model, phi_ptr, pc.map_source, cfg.channels, {false, 1.0, dc.seed});
  std::vector<Sample> dagger = collect_dagger_data(train, layout, agent, cfg.channels, dc);
  std::mt19937_64 rng(dc.seed);
  std::shuffle(dagger.begin(), dagger.end(), rng);
  if (dagger.size() > want) dagger.resize(want);
  save_samples(dagger, paths.dagger_samples());
  const auto off_path = std::count_if(dagger.begin(), dagger.end(), [](const Sample& s) { return !s.on_path; });
  say(progress, "dagger: " + std::to_string(dagger.size()) + " samples, " + std::to_string(off_path) +
                    " off the expert path");

  std::vector<Sample> mixture = oracle;
  mixture.insert(mixture.end(), dagger.begin(), dagger.end());
  std::vector<std::vector<int>> maps = oracle_maps;
  for (auto& m : policy_maps(dagger, pc.map_source, phi_ptr, layout)) maps.push_back(std::move(m));
  // Continues the optimizer; the cosine schedule is stretched over both phases.
  tc.steps = pc.train.steps + pc.dagger_steps;
  stage1_train_policy(t, mixture, maps, tc, progress_callback(progress, "policy+dagger", tc.steps));
  t.save(paths.policy_model());
}

void run_rft(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress) {
  cfg.validate();
  if (!uses_map_model(cfg)) {
    throw Error(ErrorCode::ConfigError, "joint fine-tuning needs stage1_policy.map_source = generated");
  }
  const mapgen::Layout& layout = cfg.model.layout;
  const harness::Suite train = harness::load_suite(paths.train_suite());
  const std::vector<Sample> oracle = load_samples(paths.oracle_samples());
  const std::vector<Sample> dagger =
      exists(paths.dagger_samples()) ? load_samples(paths.dagger_samples()) : std::vector<Sample>{};

  rft::RftConfig rc = cfg.stage2.rft;
  rc.seed = sub_seed(cfg, kRft);
  rc.success_radius = cfg.eval.success_radius;
  rft::RftState st(load_model(paths.policy_model() + ".ckpt"), load_model(paths.map_model() + ".ckpt"));
  const mapgen::Vocab vocab(layout.dist_bins);
  const double dagger_share = dagger.empty() ? 0.0 : cfg.stage2.dagger_state_share;

  std::string log;
  for (int step = 0; step < rc.steps; ++step) {
    std::mt19937_64 rng(harness::mix_seed(sub_seed(cfg, kRftStates), static_cast<std::uint64_t>(step)));
    std::vector<policy::EnvState> states;
    for (int i = 0; i < rc.batch_states; ++i) {
      const bool from_dagger = tensor::unit_uniform(rng) < dagger_share;
      const std::vector<Sample>& pool = from_dagger ? dagger : oracle;
      states.push_back(replay_state(train, layout, pool[rng() % pool.size()]));
    }
    const rft::RftStats s = rft::rft_step(st, vocab, states, rc);
    log += rft::stats_log_line(s) + "\n";
    if (progress && ((step + 1) % 10 == 0 || step + 1 == rc.steps)) {
      progress("rft step " + std::to_string(step + 1) + "/" + std::to_string(rc.steps) +
               fmt(" r_act %.3f r_fmt %.3f clip %.3f", s.mean_r_act, s.mean_r_fmt, s.clip_frac));
    }
  }
  supervision::write_file(paths.rft_log(), log);
  tensor::save_checkpoint(st.theta, paths.rft_policy());
  tensor::save_checkpoint(st.phi, paths.rft_map());
}

EvalOutput run_eval(const PipelineConfig& cfg, const RunPaths& paths, EvalStage stage,
                    const Progress& progress, bool dump_maps) {
  cfg.validate();
  const harness::Suite suite = harness::load_suite(paths.eval_suite());
  const bool s2 = stage == EvalStage::Stage2;
  const tensor::Model theta = load_model(s2 ? paths.rft_policy() : paths.policy_model() + ".ckpt");
  std::optional<tensor::Model> phi;
  if (uses_map_model(cfg)) phi = load_model(s2 ? paths.rft_map() : paths.map_model() + ".ckpt");
  harness::ModelAgent agent(theta, phi ? &*phi : nullptr, cfg.stage1_policy.map_source, cfg.channels);

  EvalOutput out;
  if (dump_maps) agent.set_map_log(&out.map_log);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<harness::EpisodeResult> results =
      harness::evaluate(agent, suite, cfg.model.layout, cfg.eval, &out.log);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.decisions = static_cast<int>(out.log.size());
  out.metrics = harness::aggregate(results, cfg.eval.success_radius);
  say(progress, std::string("eval ") + (s2 ? "stage2" : "stage1") +
                    fmt(": SR %.4f SPL %.4f NE %.3f", out.metrics.sr, out.metrics.spl, out.metrics.ne));
  return out;
}

std::string write_eval(const RunPaths& paths, EvalStage stage, const EvalOutput& out) {
  const std::string tag = stage == EvalStage::Stage2 ? "stage2" : "stage1";
  const std::string csv =
      std::string(harness::kMetricsHeader) + "\n" + harness::metrics_csv_row(out.metrics) + "\n";
  supervision::write_file(paths.dir + "/eval_" + tag + ".csv", csv);
  std::string log;
  for (const std::string& l : out.log) log += l + "\n";
  supervision::write_file(paths.dir + "/eval_" + tag + ".jsonl", log);
  return csv;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const RunPaths& paths, bool reuse,
                            const Progress& progress) {
  cfg.validate();
  fs::create_directories(paths.dir);
  const std::string text = format_config(cfg);
  if (reuse && (!exists(paths.config()) || supervision::read_file(paths.config()) != text)) reuse = false;
  supervision::write_file(paths.config(), text);
  auto have = [&](const std::string& p) { return reuse && exists(p); };

  if (!have(paths.eval_suite() + "/episodes.jsonl")) gen_worlds(cfg, paths, progress);
  if (!have(paths.oracle_samples())) gen_data(cfg, paths, progress);
  if (uses_map_model(cfg) && !have(paths.map_model() + ".ckpt")) {
    fs::remove(paths.map_model() + ".ckpt");
    fs::remove(paths.map_model() + ".adam");
    pretrain_map(cfg, paths, progress);
  }
  if (!have(paths.policy_model() + ".ckpt")) pretrain_policy(cfg, paths, progress);

  PipelineResult r;
  const EvalOutput e1 = run_eval(cfg, paths, EvalStage::Stage1, progress);
  write_eval(paths, EvalStage::Stage1, e1);
  r.stage1 = e1.metrics;
  r.stage2 = r.stage1;
  if (uses_map_model(cfg) && cfg.stage2.rft.steps > 0) {
    if (!have(paths.rft_policy())) run_rft(cfg, paths, progress);
    const EvalOutput e2 = run_eval(cfg, paths, EvalStage::Stage2, progress);
    write_eval(paths, EvalStage::Stage2, e2);
    r.stage2 = e2.metrics;
  }
  return r;
}

AblationSuite parse_ablation_suite(std::string_view text) {
  if (text == "staged") return AblationSuite::Staged;
  if (text == "channels") return AblationSuite::Channels;
  if (text == "resolution") return AblationSuite::Resolution;
  throw Error(ErrorCode::ConfigError, "unknown ablation suite '" + std::string(text) + "'");
}

namespace {

std::string arm_dir(const std::string& root, const PipelineConfig& cfg) {
  std::string mask = supervision::format_channel_mask(cfg.channels);
  std::replace(mask.begin(), mask.end(), ',', '+');
  return root + "/s" + std::to_string(cfg.seed) + "/S" + std::to_string(cfg.model.layout.map_size) + "-" +
         mask + "-" + std::string(harness::map_source_name(cfg.stage1_policy.map_source));
}

std::string channel_arm_name(const supervision::ChannelMask& m) {
  if (m.occupancy && m.distance && m.landmark) return "All";
  if (m.distance && !m.occupancy && !m.landmark) return "Distance";
  if (m.landmark && !m.occupancy && !m.distance) return "Landmark";
  if (m.occupancy && !m.distance && !m.landmark) return "Occupancy";
  return supervision::format_channel_mask(m);
}

AblationRow row(std::string arm, const PipelineConfig& cfg, const harness::Metrics& m) {
  AblationRow r;
  r.arm = std::move(arm);
  r.seed = cfg.seed;
  r.map_tokens = cfg.model.layout.map_tokens();
  r.metrics = m;
  return r;
}

}  // namespace

std::vector<AblationRow> run_ablation(AblationSuite suite, const PipelineConfig& base,
                                      const std::vector<std::uint64_t>& seeds, const std::string& root,
                                      bool reuse, const Progress& progress) {
  if (seeds.empty()) throw Error(ErrorCode::ConfigError, "ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    PipelineConfig cfg = base;
    cfg.seed = seed;
    switch (suite) {
      case AblationSuite::Staged: {
        PipelineConfig nomap = cfg;
        nomap.stage1_policy.map_source = harness::MapSource::Constant;
        const PipelineResult a = run_pipeline(nomap, {arm_dir(root, nomap)}, reuse, progress);
        cfg.stage1_policy.map_source = harness::MapSource::Generated;
        const PipelineResult b = run_pipeline(cfg, {arm_dir(root, cfg)}, reuse, progress);
        rows.push_back(row("no-map", nomap, a.stage1));
        rows.push_back(row("SPT", cfg, b.stage1));
        rows.push_back(row("SPT+RFT", cfg, b.stage2));
        break;
      }
      case AblationSuite::Channels: {
        cfg.stage1_policy.map_source = harness::MapSource::Generated;
        for (const char* mask : {"all", "distance", "landmark", "occupancy"}) {
          PipelineConfig arm = cfg;
          arm.channels = supervision::parse_channel_mask(mask);
          const PipelineResult r = run_pipeline(arm, {arm_dir(root, arm)}, reuse, progress);
          rows.push_back(row(channel_arm_name(arm.channels) + " SPT", arm, r.stage1));
          rows.push_back(row(channel_arm_name(arm.channels) + " SPT+RFT", arm, r.stage2));
        }
        break;
      }
      case AblationSuite::Resolution: {
        for (int s : {28, 14, 7}) {
          PipelineConfig arm = cfg;
          arm.model.layout.map_size = s;
          const RunPaths paths{arm_dir(root, arm)};
          run_pipeline(arm, paths, reuse, progress);
          const bool s2 = uses_map_model(arm) && arm.stage2.rft.steps > 0;
          // Re-run the final evaluation alone so the timing excludes training.
          const EvalOutput e = run_eval(arm, paths, s2 ? EvalStage::Stage2 : EvalStage::Stage1, progress);
          AblationRow r = row("S=" + std::to_string(s), arm, e.metrics);
          r.ms_per_decision = e.decisions > 0 ? 1000.0 * e.seconds / e.decisions : 0.0;
          rows.push_back(r);
        }
        break;
      }
    }
  }
  return rows;
}

std::string ablation_csv_row(const AblationRow& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%llu,%d,%.3f,", static_cast<unsigned long long>(r.seed), r.map_tokens,
                r.ms_per_decision);
  return r.arm + buf + harness::metrics_csv_row(r.metrics);
}

}  // namespace mapnav::training
