#include "mapnav/mapgen/map_module.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "json.hpp"
#include "mapnav/error.hpp"

namespace mapnav::mapgen {

namespace {

void check_fits(const Model& model, std::size_t ctx, std::size_t gen) {
  const int limit = model.config().context_len;
  // The last generated token is never fed back, so ctx + gen - 1 positions.
  if (ctx == 0 || static_cast<int>(ctx + gen) - 1 > limit) {
    throw Error(ErrorCode::ContextOverflow, std::to_string(ctx) + " context + " +
                                                std::to_string(gen) + " generated tokens exceed " +
                                                std::to_string(limit));
  }
}

void check_map_tokens(const Vocab& vocab, std::span<const int> tokens) {
  for (int t : tokens) {
    if (!vocab.is_map_token(t)) throw Error(ErrorCode::NotAMapCode, "token " + std::to_string(t));
  }
}

// Masked log-probabilities of `target` following `ctx`, one row per token.
Var target_logprobs(Graph& g, Model& model, const Vocab& vocab, std::span<const int> ctx,
                    std::span<const int> target) {
  check_map_tokens(vocab, target);
  check_fits(model, ctx.size(), target.size());
  if (target.empty()) throw Error(ErrorCode::ShapeMismatch, "empty map target");
  std::vector<int> seq(ctx.begin(), ctx.end());
  seq.insert(seq.end(), target.begin(), target.end() - 1);
  std::vector<int> rows(target.size());
  std::iota(rows.begin(), rows.end(), static_cast<int>(ctx.size()) - 1);
  Var h = tensor::gather_rows(tensor::forward_hidden(g, model, seq), rows);
  Var logits = tensor::project_logits(g, model, h);
  return tensor::log_softmax_pick(logits, target, Vocab::kMapBase, vocab.map_end());
}

}  // namespace

Var map_loss(Graph& g, Model& model, const Vocab& vocab, std::span<const int> ctx,
             std::span<const int> target) {
  return tensor::scale(tensor::mean(target_logprobs(g, model, vocab, ctx, target)), -1.0);
}

Var map_logprob(Graph& g, Model& model, const Vocab& vocab, std::span<const int> ctx,
                std::span<const int> tokens) {
  return tensor::sum(target_logprobs(g, model, vocab, ctx, tokens));
}

std::vector<int> map_predictions(Model& model, const Vocab& vocab, std::span<const int> ctx,
                                 std::span<const int> target) {
  check_map_tokens(vocab, target);
  check_fits(model, ctx.size(), target.size());
  Graph g;
  std::vector<int> seq(ctx.begin(), ctx.end());
  seq.insert(seq.end(), target.begin(), target.end() - 1);
  std::vector<int> rows(target.size());
  std::iota(rows.begin(), rows.end(), static_cast<int>(ctx.size()) - 1);
  const tensor::Matrix& logits =
      tensor::project_logits(g, model, tensor::gather_rows(tensor::forward_hidden(g, model, seq), rows))
          .value();
  std::vector<int> out(target.size());
  for (int r = 0; r < logits.rows; ++r) {
    const double* row = logits.row(r);
    out[static_cast<std::size_t>(r)] = static_cast<int>(
        std::max_element(row + Vocab::kMapBase, row + vocab.map_end()) - row);
  }
  return out;
}

GeneratedMap generate_map(const Model& model, const Vocab& vocab, std::span<const int> ctx,
                          int map_size, const tensor::SampleOptions& opts) {
  const std::size_t n = static_cast<std::size_t>(map_size) * map_size;
  check_fits(model, ctx.size(), n);
  std::mt19937_64 rng(opts.seed);
  tensor::DecoderSession session(model);
  GeneratedMap out;
  out.tokens.reserve(n);
  std::vector<double> logits = session.feed(ctx);
  for (std::size_t i = 0; i < n; ++i) {
    const int t = tensor::sample_index(logits, Vocab::kMapBase, vocab.map_end(), opts, rng);
    out.logprob += tensor::log_softmax(logits, Vocab::kMapBase, vocab.map_end())[static_cast<std::size_t>(t)];
    out.tokens.push_back(t);
    if (i + 1 < n) logits = session.feed(t);
  }
  std::vector<int> codes(n);
  std::transform(out.tokens.begin(), out.tokens.end(), codes.begin(),
                 [&](int t) { return vocab.map_code(t); });
  out.bev = detokenize_bev(codes, map_size, Codebook(vocab.dist_bins()));
  return out;
}

std::string map_dump_line(const std::string& episode_id, int step, const GeneratedMap& map) {
  nlohmann::json j;
  j["episode_id"] = episode_id;
  j["step"] = step;
  j["tokens"] = map.tokens;
  j["logprob"] = map.logprob;
  return j.dump();
}

}  // namespace mapnav::mapgen
