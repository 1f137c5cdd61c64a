#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mapnav/error.hpp"
#include "mapnav/harness/render.hpp"
#include "mapnav/training/pipeline.hpp"

namespace {

using namespace mapnav;
using training::PipelineConfig;
using training::RunPaths;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string dir = "run";
};

void add_common(CLI::App* cmd, Common& c, bool with_dir = true) {
  cmd->add_option("--config", c.config_path, "INI config file");
  cmd->add_option("--set", c.overrides, "Override one key, section.key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Run seed (overrides run.seed)");
  if (with_dir) cmd->add_option("--dir", c.dir, "Run directory")->capture_default_str();
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : training::load_config(c.config_path);
  for (const std::string& o : c.overrides) training::apply_override(cfg, o);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

const auto kStart = std::chrono::steady_clock::now();

void progress(const std::string& line) {
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - kStart).count();
  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "[%7.1fs] ", t);
  std::cerr << stamp << line << std::endl;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const std::string& l : lines) text += l + "\n";
  supervision::write_file(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Map-conditioned gridworld navigation: data, training, evaluation"};
  app.require_subcommand(1);

  Common common;
  auto* gen_worlds = app.add_subcommand("gen-worlds", "Generate train and held-out episode suites");
  auto* gen_data = app.add_subcommand("gen-data", "Replay expert paths into supervised samples");
  auto* pretrain_map = app.add_subcommand("pretrain-map", "Stage-1 map module training");
  auto* pretrain_policy = app.add_subcommand("pretrain-policy", "Stage-1 policy training with DAgger");
  auto* rft = app.add_subcommand("rft", "Stage-2 joint fine-tuning");
  auto* eval = app.add_subcommand("eval", "Evaluate on the held-out suite; prints NE,OSR,SR,SPL");
  auto* pipeline = app.add_subcommand("pipeline", "All stages in order, then evaluation");
  auto* ablate = app.add_subcommand("ablate", "Ablation table: staged, channels or resolution");
  auto* render = app.add_subcommand("render", "Render a map dump to one PPM per line");
  auto* show_config = app.add_subcommand("show-config", "Print the resolved configuration");
  for (auto* c : {gen_worlds, gen_data, pretrain_map, pretrain_policy, rft, eval, pipeline, show_config}) {
    add_common(c, common);
  }
  add_common(ablate, common, false);
  add_common(render, common, false);

  std::string stage = "auto";
  std::string dump_maps;
  eval->add_option("--stage", stage, "stage1, stage2 or auto (stage2 when present)")->capture_default_str();
  eval->add_option("--dump-maps", dump_maps, "Write the map of every decision to this JSONL file");

  bool reuse = false;
  pipeline->add_flag("--reuse", reuse, "Skip stages whose outputs exist for the same config");

  std::string suite_name;
  std::vector<std::uint64_t> seeds;
  std::string root = "ablation";
  ablate->add_option("--suite", suite_name, "staged, channels or resolution")->required();
  ablate->add_option("--seeds", seeds, "Seeds, one arm set per seed (default: run seed)");
  ablate->add_option("--root", root, "Directory holding the arm runs")->capture_default_str();
  ablate->add_flag("--reuse", reuse, "Reuse finished arm runs with identical config");

  std::string in_path, out_dir;
  render->add_option("--in", in_path, "Map dump JSONL")->required();
  render->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig cfg = resolve(common);
    const RunPaths paths{common.dir};
    if (*gen_worlds) {
      training::gen_worlds(cfg, paths, progress);
      supervision::write_file(paths.config(), training::format_config(cfg));
    } else if (*gen_data) {
      training::gen_data(cfg, paths, progress);
    } else if (*pretrain_map) {
      training::pretrain_map(cfg, paths, progress);
    } else if (*pretrain_policy) {
      training::pretrain_policy(cfg, paths, progress);
    } else if (*rft) {
      training::run_rft(cfg, paths, progress);
    } else if (*eval) {
      training::EvalStage s = training::EvalStage::Stage1;
      if (stage == "auto") {
        if (std::filesystem::exists(paths.rft_policy())) s = training::EvalStage::Stage2;
      } else {
        s = training::parse_eval_stage(stage);
      }
      const training::EvalOutput out = training::run_eval(cfg, paths, s, progress, !dump_maps.empty());
      const std::string csv = training::write_eval(paths, s, out);
      if (!dump_maps.empty()) write_lines(dump_maps, out.map_log);
      std::cout << csv;
    } else if (*pipeline) {
      const training::PipelineResult r = training::run_pipeline(cfg, paths, reuse, progress);
      std::cout << "stage," << harness::kMetricsHeader << "\n"
                << "stage1," << harness::metrics_csv_row(r.stage1) << "\n"
                << "stage2," << harness::metrics_csv_row(r.stage2) << "\n";
    } else if (*ablate) {
      if (seeds.empty()) seeds.push_back(cfg.seed);
      const auto rows = training::run_ablation(training::parse_ablation_suite(suite_name), cfg, seeds,
                                               root, reuse, progress);
      std::cout << training::kAblationHeader << "\n";
      for (const auto& r : rows) std::cout << training::ablation_csv_row(r) << "\n";
    } else if (*render) {
      const auto written = harness::render_map_dump(supervision::read_file(in_path),
                                                    cfg.model.layout.dist_bins, out_dir);
      for (const std::string& p : written) std::cout << p << "\n";
    } else if (*show_config) {
      std::cout << training::format_config(cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return e.code() == ErrorCode::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
