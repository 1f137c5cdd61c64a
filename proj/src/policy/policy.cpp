#include "mapnav/policy/policy.hpp"

#include <numeric>
#include <random>

#include "json.hpp"
#include "mapnav/error.hpp"

namespace mapnav::policy {

namespace {

void check_fits(const Model& model, std::size_t ctx, int n) {
  if (ctx == 0 || static_cast<int>(ctx) + n - 1 > model.config().context_len) {
    throw Error(ErrorCode::ContextOverflow, std::to_string(ctx) + " context + " + std::to_string(n) +
                                                " actions exceed " +
                                                std::to_string(model.config().context_len));
  }
}

Var token_logprobs(Graph& g, Model& model, std::span<const int> ctx, std::span<const int> tokens) {
  check_fits(model, ctx.size(), static_cast<int>(tokens.size()));
  std::vector<int> seq(ctx.begin(), ctx.end());
  seq.insert(seq.end(), tokens.begin(), tokens.end() - 1);
  std::vector<int> rows(tokens.size());
  std::iota(rows.begin(), rows.end(), static_cast<int>(ctx.size()) - 1);
  Var logits =
      tensor::project_logits(g, model, tensor::gather_rows(tensor::forward_hidden(g, model, seq), rows));
  return tensor::log_softmax_pick(logits, tokens, 0, model.config().vocab_size);
}

}  // namespace

ActionSequence parse_actions(const mapgen::Vocab& vocab, std::vector<int> raw_tokens) {
  ActionSequence s;
  s.raw_tokens = std::move(raw_tokens);
  std::vector<Action> acts;
  for (int t : s.raw_tokens) {
    if (!vocab.is_action_token(t)) return s;
    acts.push_back(vocab.token_action(t));
  }
  s.parsed = std::move(acts);
  return s;
}

Var action_loss(Graph& g, Model& model, const mapgen::Vocab& vocab, std::span<const int> ctx,
                std::span<const Action> gt, int n_actions) {
  if (static_cast<int>(gt.size()) != n_actions) {
    throw Error(ErrorCode::ArityMismatch, "expected " + std::to_string(n_actions) + " actions, got " +
                                              std::to_string(gt.size()));
  }
  std::vector<int> tokens;
  for (Action a : gt) tokens.push_back(vocab.action_token(a));
  return tensor::scale(tensor::mean(token_logprobs(g, model, ctx, tokens)), -1.0);
}

Var action_logprob(Graph& g, Model& model, std::span<const int> ctx,
                   std::span<const int> raw_tokens, int n_actions) {
  if (static_cast<int>(raw_tokens.size()) != n_actions) {
    throw Error(ErrorCode::ArityMismatch, "expected " + std::to_string(n_actions) + " tokens");
  }
  return tensor::sum(token_logprobs(g, model, ctx, raw_tokens));
}

ActionSequence predict_actions(const Model& model, const mapgen::Vocab& vocab,
                               std::span<const int> ctx, int n_actions,
                               const tensor::SampleOptions& opts) {
  check_fits(model, ctx.size(), n_actions);
  const int v = model.config().vocab_size;
  std::mt19937_64 rng(opts.seed);
  tensor::DecoderSession session(model);
  std::vector<double> logits = session.feed(ctx);
  std::vector<int> raw;
  double lp = 0.0;
  for (int i = 0; i < n_actions; ++i) {
    const int t = tensor::sample_index(logits, 0, v, opts, rng);
    lp += tensor::log_softmax(logits, 0, v)[static_cast<std::size_t>(t)];
    raw.push_back(t);
    if (i + 1 < n_actions) logits = session.feed(t);
  }
  ActionSequence s = parse_actions(vocab, std::move(raw));
  s.logprob = lp;
  return s;
}

std::vector<Action> execute_plan(EnvState& state, const ActionSequence& plan, int m, int max_steps) {
  if (!plan.parsed) throw Error(ErrorCode::MalformedPlan, "plan contains non-action tokens");
  std::vector<Action> done;
  for (int i = 0; i < m && i < static_cast<int>(plan.parsed->size()) && !state.done; ++i) {
    const Action a = (*plan.parsed)[static_cast<std::size_t>(i)];
    advance(state, a, max_steps);
    done.push_back(a);
    if (a == Action::Stop) break;
  }
  return done;
}

std::string trajectory_log_line(const std::string& episode_id, int step, const ActionSequence& seq,
                                const Pose& pose_after, double r_act, double r_fmt) {
  nlohmann::json j;
  j["episode_id"] = episode_id;
  j["step"] = step;
  j["raw_tokens"] = seq.raw_tokens;
  if (seq.parsed) {
    std::vector<int> codes;
    for (Action a : *seq.parsed) codes.push_back(static_cast<int>(a));
    j["parsed"] = codes;
  } else {
    j["parsed"] = nullptr;
  }
  j["pose_after"] = {pose_after.x, pose_after.y, static_cast<int>(pose_after.heading)};
  j["reward"] = {{"r_act", r_act}, {"r_fmt", r_fmt}, {"r_total", r_act + r_fmt}};
  return j.dump();
}

}  // namespace mapnav::policy
