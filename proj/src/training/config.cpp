#include "mapnav/training/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <vector>

#include "mapnav/error.hpp"

namespace mapnav::training {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail("bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail("bad boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define MAPNAV_INT(NAME, FIELD)                                                               \
  Key {                                                                                       \
    NAME, [](PipelineConfig& c, std::string_view k, std::string_view v) {                     \
      c.FIELD = parse_number<std::remove_reference_t<decltype(c.FIELD)>>(k, v);               \
    },                                                                                        \
        [](const PipelineConfig& c) { return std::to_string(c.FIELD); }                       \
  }
#define MAPNAV_REAL(NAME, FIELD)                                                              \
  Key {                                                                                       \
    NAME, [](PipelineConfig& c, std::string_view k, std::string_view v) {                     \
      c.FIELD = parse_number<double>(k, v);                                                   \
    },                                                                                        \
        [](const PipelineConfig& c) { return fmt(c.FIELD); }                                  \
  }
#define MAPNAV_BOOL(NAME, FIELD)                                                              \
  Key {                                                                                       \
    NAME, [](PipelineConfig& c, std::string_view k, std::string_view v) {                     \
      c.FIELD = parse_bool(k, v);                                                             \
    },                                                                                        \
        [](const PipelineConfig& c) { return std::string(c.FIELD ? "true" : "false"); }       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      MAPNAV_INT("run.seed", seed),
      Key{"run.channels",
          [](PipelineConfig& c, std::string_view, std::string_view v) {
            c.channels = supervision::parse_channel_mask(v);
          },
          [](const PipelineConfig& c) { return supervision::format_channel_mask(c.channels); }},

      MAPNAV_INT("world.width", world.gen.width),
      MAPNAV_INT("world.height", world.gen.height),
      MAPNAV_INT("world.wall_segments", world.gen.wall_segments),
      MAPNAV_INT("world.obstacle_blobs", world.gen.obstacle_blobs),
      MAPNAV_INT("world.min_landmarks", world.gen.min_landmarks),
      MAPNAV_INT("world.max_landmarks", world.gen.max_landmarks),
      MAPNAV_INT("world.max_cluster_cells", world.gen.max_cluster_cells),
      MAPNAV_INT("world.train_worlds", world.train_worlds),
      MAPNAV_INT("world.train_episodes_per_world", world.train_episodes_per_world),
      MAPNAV_INT("world.eval_worlds", world.eval_worlds),
      MAPNAV_INT("world.eval_episodes_per_world", world.eval_episodes_per_world),
      MAPNAV_INT("world.min_length", world.min_length),
      MAPNAV_INT("world.max_length", world.max_length),

      MAPNAV_INT("model.obs_size", model.layout.obs_size),
      MAPNAV_INT("model.history", model.layout.history),
      MAPNAV_INT("model.map_size", model.layout.map_size),
      MAPNAV_INT("model.dist_bins", model.layout.dist_bins),
      MAPNAV_INT("model.n_actions", model.layout.n_actions),
      MAPNAV_INT("model.range", model.layout.range),
      MAPNAV_INT("model.d_max", model.layout.d_max),
      MAPNAV_INT("model.d_model", model.d_model),
      MAPNAV_INT("model.n_heads", model.n_heads),
      MAPNAV_INT("model.n_layers", model.n_layers),

      MAPNAV_REAL("stage1_map.lr", stage1_map.lr),
      MAPNAV_INT("stage1_map.steps", stage1_map.steps),
      MAPNAV_INT("stage1_map.batch", stage1_map.batch),
      MAPNAV_REAL("stage1_map.max_grad_norm", stage1_map.max_grad_norm),
      MAPNAV_BOOL("stage1_map.cosine_decay", stage1_map.cosine_decay),

      MAPNAV_REAL("stage1_policy.lr", stage1_policy.train.lr),
      MAPNAV_INT("stage1_policy.steps", stage1_policy.train.steps),
      MAPNAV_INT("stage1_policy.batch", stage1_policy.train.batch),
      MAPNAV_REAL("stage1_policy.max_grad_norm", stage1_policy.train.max_grad_norm),
      MAPNAV_BOOL("stage1_policy.cosine_decay", stage1_policy.train.cosine_decay),
      Key{"stage1_policy.map_source",
          [](PipelineConfig& c, std::string_view, std::string_view v) {
            try {
              c.stage1_policy.map_source = harness::parse_map_source(v);
            } catch (const Error& e) {
              fail(e.what());
            }
          },
          [](const PipelineConfig& c) {
            return std::string(harness::map_source_name(c.stage1_policy.map_source));
          }},
      MAPNAV_REAL("stage1_policy.dagger_ratio", stage1_policy.dagger_ratio),
      MAPNAV_INT("stage1_policy.dagger_steps", stage1_policy.dagger_steps),
      MAPNAV_REAL("stage1_policy.dagger_expert_mix", stage1_policy.dagger_expert_mix),

      MAPNAV_INT("stage2.group_size", stage2.rft.group_size),
      MAPNAV_REAL("stage2.clip_eps", stage2.rft.clip_eps),
      MAPNAV_REAL("stage2.kl_coeff", stage2.rft.kl_coeff),
      MAPNAV_REAL("stage2.lr", stage2.rft.lr),
      MAPNAV_INT("stage2.steps", stage2.rft.steps),
      MAPNAV_REAL("stage2.temperature", stage2.rft.temperature),
      MAPNAV_INT("stage2.sync_every", stage2.rft.sync_every),
      MAPNAV_INT("stage2.batch_states", stage2.rft.batch_states),
      MAPNAV_REAL("stage2.max_grad_norm", stage2.rft.max_grad_norm),
      MAPNAV_REAL("stage2.dagger_state_share", stage2.dagger_state_share),

      MAPNAV_INT("eval.max_steps", eval.max_steps),
      MAPNAV_INT("eval.success_radius", eval.success_radius),
      MAPNAV_INT("eval.execute_steps", eval.execute_steps),
  };
  return table;
}

#undef MAPNAV_INT
#undef MAPNAV_REAL
#undef MAPNAV_BOOL

}  // namespace

PipelineConfig::PipelineConfig() {
  stage1_map.lr = 1e-4;
  stage1_policy.train.lr = 1e-5;
}

world::EpisodeParams PipelineConfig::episode_params() const {
  world::EpisodeParams p;
  p.success_radius = eval.success_radius;
  p.min_length = world.min_length;
  p.max_length = world.max_length;
  p.max_steps = eval.max_steps;
  return p;
}

void PipelineConfig::validate() const {
  try {
    model.layout.validate();
    stage2.rft.validate();
    map_model_config(model.layout, model.d_model, model.n_heads, model.n_layers, seed);
  } catch (const Error& e) {
    fail(e.what());
  }
  if (!channels.any()) fail("run.channels must enable at least one channel");
  if (world.train_worlds < 1 || world.eval_worlds < 1 || world.train_episodes_per_world < 1 ||
      world.eval_episodes_per_world < 1) {
    fail("world counts must be positive");
  }
  if (world.min_length < 1 || world.max_length < world.min_length) fail("bad episode length bounds");
  if (eval.max_steps < 1 || eval.success_radius < 0 || eval.execute_steps < 1 ||
      eval.execute_steps > model.layout.n_actions) {
    fail("bad [eval] values");
  }
  if (stage1_map.batch < 1 || stage1_policy.train.batch < 1) fail("batch must be >= 1");
  if (stage1_policy.dagger_ratio < 0.0 || stage1_policy.dagger_steps < 0) fail("bad DAgger settings");
  if (stage2.dagger_state_share < 0.0 || stage2.dagger_state_share > 1.0) {
    fail("stage2.dagger_state_share must lie in [0, 1]");
  }
}

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.set(cfg, key, trim(value));
      return;
    }
  }
  fail("unknown config key '" + std::string(key) + "'");
}

void apply_override(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) fail("override '" + std::string(assignment) + "' lacks '='");
  set_config_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::string section;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("line " + std::to_string(lineno) + ": bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) fail("line " + std::to_string(lineno) + ": key outside a section");
    set_config_value(cfg, section + "." + std::string(trim(line.substr(0, eq))), line.substr(eq + 1));
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  try {
    return parse_config(supervision::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) fail(e.what());
    throw;
  }
}

std::string format_config(const PipelineConfig& cfg) {
  std::string out, section;
  for (const Key& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      out += (out.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += k.name.substr(dot + 1) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace mapnav::training
