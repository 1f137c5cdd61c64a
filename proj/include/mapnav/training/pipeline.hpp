#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mapnav/harness/metrics.hpp"
#include "mapnav/training/config.hpp"

namespace mapnav::training {

/// Receives one human-readable progress line.
using Progress = std::function<void(const std::string&)>;

/// File layout of one pipeline run directory.
struct RunPaths {
  std::string dir;

  std::string train_suite() const { return dir + "/train"; }
  std::string eval_suite() const { return dir + "/eval"; }
  std::string oracle_samples() const { return dir + "/oracle.jsonl"; }
  std::string dagger_samples() const { return dir + "/dagger.jsonl"; }
  std::string map_model() const { return dir + "/map"; }        // .ckpt / .adam
  std::string policy_model() const { return dir + "/policy"; }  // .ckpt / .adam
  std::string rft_policy() const { return dir + "/rft_policy.ckpt"; }
  std::string rft_map() const { return dir + "/rft_map.ckpt"; }
  std::string rft_log() const { return dir + "/rft.jsonl"; }
  std::string config() const { return dir + "/config.ini"; }
};

/// Which checkpoints an evaluation uses.
enum class EvalStage { Stage1, Stage2 };
EvalStage parse_eval_stage(std::string_view text);

/// Train and held-out suites from disjoint seed streams.
void gen_worlds(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress = {});
/// Oracle samples for the train suite.
void gen_data(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress = {});
/// Resumes from an existing map checkpoint when one is present.
void pretrain_map(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress = {});
/// Oracle phase, one DAgger round with the resulting policy, then
/// `dagger_steps` more steps on the oracle + DAgger mixture.
void pretrain_policy(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress = {});
/// Joint GRPO on the map module and policy from their Stage-1 checkpoints.
void run_rft(const PipelineConfig& cfg, const RunPaths& paths, const Progress& progress = {});

struct EvalOutput {
  harness::Metrics metrics;
  std::vector<std::string> log;      // one JSON line per decision
  std::vector<std::string> map_log;  // map dump lines, when requested
  int decisions = 0;
  double seconds = 0.0;
};
/// Greedy evaluation on the held-out suite.
EvalOutput run_eval(const PipelineConfig& cfg, const RunPaths& paths, EvalStage stage,
                    const Progress& progress = {}, bool dump_maps = false);

/// Writes `eval_<stage>.csv` (header + one row) and `eval_<stage>.jsonl`
/// into the run directory. Returns the CSV text.
std::string write_eval(const RunPaths& paths, EvalStage stage, const EvalOutput& out);

/// gen-worlds through eval, skipping stages whose outputs exist when
/// `reuse` is set.
struct PipelineResult {
  harness::Metrics stage1;
  harness::Metrics stage2;
};
PipelineResult run_pipeline(const PipelineConfig& cfg, const RunPaths& paths, bool reuse,
                            const Progress& progress = {});

enum class AblationSuite { Staged, Channels, Resolution };
AblationSuite parse_ablation_suite(std::string_view text);

struct AblationRow {
  std::string arm;
  std::uint64_t seed = 0;
  int map_tokens = 0;
  double ms_per_decision = 0.0;
  harness::Metrics metrics;
};

/// Trains and evaluates every arm under each seed; arm directories live
/// under `root`. Arms with the same seed share their episode suites.
std::vector<AblationRow> run_ablation(AblationSuite suite, const PipelineConfig& base,
                                      const std::vector<std::uint64_t>& seeds, const std::string& root,
                                      bool reuse, const Progress& progress = {});

inline constexpr std::string_view kAblationHeader = "arm,seed,map_tokens,ms_per_decision,NE,OSR,SR,SPL";
std::string ablation_csv_row(const AblationRow& row);

}  // namespace mapnav::training
