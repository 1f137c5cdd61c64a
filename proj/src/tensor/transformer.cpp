#include "mapnav/tensor/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mapnav/error.hpp"
#include "mapnav/tensor/kernels.hpp"
#include "mapnav/tensor/sampling.hpp"

namespace mapnav::tensor {

namespace {

constexpr double kLnEps = 1e-5;

std::string layer_name(int layer, std::string_view leaf) {
  return "blocks." + std::to_string(layer) + "." + std::string(leaf);
}

}  // namespace

void TransformerConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (vocab_size < 1) fail("vocab_size must be positive");
  if (context_len < 1) fail("context_len must be positive");
  if (d_model < 1) fail("d_model must be positive");
  if (n_heads < 1) fail("n_heads must be positive");
  if (d_model % n_heads != 0) {
    fail("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
         std::to_string(n_heads));
  }
  if (n_layers < 0) fail("n_layers must be non-negative");
}

Model::Model(const TransformerConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.d_model;
  const int v = config_.vocab_size;
  auto add = [this](std::string name, int rows, int cols, double fill = 0.0) {
    params_.push_back(Parameter{std::move(name), Matrix(rows, cols, fill), Matrix(rows, cols)});
  };
  add("tok_emb", v, d);
  add("pos_emb", config_.context_len, d);
  for (int l = 0; l < config_.n_layers; ++l) {
    add(layer_name(l, "ln1.g"), 1, d, 1.0);
    add(layer_name(l, "ln1.b"), 1, d);
    add(layer_name(l, "attn.qkv.w"), d, 3 * d);
    add(layer_name(l, "attn.qkv.b"), 1, 3 * d);
    add(layer_name(l, "attn.out.w"), d, d);
    add(layer_name(l, "attn.out.b"), 1, d);
    add(layer_name(l, "ln2.g"), 1, d, 1.0);
    add(layer_name(l, "ln2.b"), 1, d);
    add(layer_name(l, "mlp.fc.w"), d, 4 * d);
    add(layer_name(l, "mlp.fc.b"), 1, 4 * d);
    add(layer_name(l, "mlp.proj.w"), 4 * d, d);
    add(layer_name(l, "mlp.proj.b"), 1, d);
  }
  add("ln_f.g", 1, d, 1.0);
  add("ln_f.b", 1, d);
  add("head.w", d, v);
  add("head.b", 1, v);

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero; norm gains one.
  // unit_uniform avoids the implementation-defined real distributions.
  std::mt19937_64 rng(config_.seed);
  for (Parameter& p : params_) {
    const bool is_weight = p.name.ends_with(".w") || p.name.ends_with("_emb");
    if (!is_weight) continue;
    const int fan_in = p.name.ends_with("_emb") ? d : p.value.rows;
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : p.value.data) x = (2.0 * unit_uniform(rng) - 1.0) * a;
  }
}

Parameter& Model::param(std::string_view name) {
  for (Parameter& p : params_) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::InvalidConfig, "no parameter named " + std::string(name));
}

const Parameter& Model::param(std::string_view name) const {
  return const_cast<Model*>(this)->param(name);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void Model::zero_grad() {
  for (Parameter& p : params_) {
    if (!p.grad.same_shape(p.value)) p.grad = Matrix(p.value.rows, p.value.cols);
    std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
  }
}

Model init_model(const TransformerConfig& config) { return Model(config); }

void check_tokens(const TransformerConfig& config, std::span<const int> tokens) {
  if (static_cast<int>(tokens.size()) > config.context_len) {
    throw Error(ErrorCode::SequenceTooLong, std::to_string(tokens.size()) + " tokens > context " +
                                                std::to_string(config.context_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= config.vocab_size) {
      throw Error(ErrorCode::TokenOutOfVocab, "token " + std::to_string(t));
    }
  }
}

Var forward_hidden(Graph& g, Model& model, std::span<const int> tokens) {
  const TransformerConfig& cfg = model.config();
  check_tokens(cfg, tokens);
  std::vector<int> positions(tokens.size());
  std::iota(positions.begin(), positions.end(), 0);
  Var x = add(embedding(g.param(model.param("tok_emb")), tokens),
              embedding(g.param(model.param("pos_emb")), positions));
  auto p = [&](int l, std::string_view leaf) { return g.param(model.param(layer_name(l, leaf))); };
  for (int l = 0; l < cfg.n_layers; ++l) {
    Var h = layer_norm(x, p(l, "ln1.g"), p(l, "ln1.b"), kLnEps);
    Var qkv = add_row(matmul(h, p(l, "attn.qkv.w")), p(l, "attn.qkv.b"));
    Var att = causal_attention(qkv, cfg.n_heads);
    x = add(x, add_row(matmul(att, p(l, "attn.out.w")), p(l, "attn.out.b")));
    h = layer_norm(x, p(l, "ln2.g"), p(l, "ln2.b"), kLnEps);
    Var m = gelu(add_row(matmul(h, p(l, "mlp.fc.w")), p(l, "mlp.fc.b")));
    x = add(x, add_row(matmul(m, p(l, "mlp.proj.w")), p(l, "mlp.proj.b")));
  }
  return layer_norm(x, g.param(model.param("ln_f.g")), g.param(model.param("ln_f.b")), kLnEps);
}

Var project_logits(Graph& g, Model& model, Var hidden_rows) {
  return add_row(matmul(hidden_rows, g.param(model.param("head.w"))),
                 g.param(model.param("head.b")));
}

Var forward_logits(Graph& g, Model& model, std::span<const int> tokens, int cond_len) {
  if (cond_len < 0 || cond_len > static_cast<int>(tokens.size())) {
    throw Error(ErrorCode::ShapeMismatch, "cond_len outside the sequence");
  }
  return project_logits(g, model, forward_hidden(g, model, tokens));
}

// ---------------------------------------------------------------- inference

DecoderSession::DecoderSession(const Model& model) : model_(&model) {
  const TransformerConfig& cfg = model.config();
  keys_.assign(static_cast<std::size_t>(cfg.n_layers), Matrix(cfg.context_len, cfg.d_model));
  values_.assign(static_cast<std::size_t>(cfg.n_layers), Matrix(cfg.context_len, cfg.d_model));
}

std::vector<double> DecoderSession::feed(std::span<const int> tokens) {
  const TransformerConfig& cfg = model_->config();
  if (tokens.empty()) throw Error(ErrorCode::ShapeMismatch, "feed() needs at least one token");
  if (length_ + static_cast<int>(tokens.size()) > cfg.context_len) {
    throw Error(ErrorCode::SequenceTooLong, "decoder session exceeds context");
  }
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw Error(ErrorCode::TokenOutOfVocab, "token " + std::to_string(t));
    }
  }
  const int n = static_cast<int>(tokens.size());
  const int d = cfg.d_model;
  const int dh = d / cfg.n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  auto w = [&](int l, std::string_view leaf) -> const Matrix& {
    return model_->param(layer_name(l, leaf)).value;
  };

  Matrix x(n, d);
  const Matrix& tok = model_->param("tok_emb").value;
  const Matrix& pos = model_->param("pos_emb").value;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) x(i, c) = tok(tokens[i], c) + pos(length_ + i, c);
  }

  Matrix h, qkv, att(n, d), proj, fc;
  std::vector<double> scores(static_cast<std::size_t>(cfg.context_len));
  auto linear = [](const Matrix& in, const Matrix& weight, const Matrix& bias, Matrix& out) {
    out = Matrix(in.rows, weight.cols);
    for (int r = 0; r < in.rows; ++r) std::copy_n(bias.data.data(), bias.cols, out.row(r));
    kernels::gemm_nn(in.rows, weight.cols, in.cols, in.data.data(), weight.data.data(),
                     out.data.data());
  };
  for (int l = 0; l < cfg.n_layers; ++l) {
    layer_norm_rows(x, w(l, "ln1.g"), w(l, "ln1.b"), kLnEps, h);
    linear(h, w(l, "attn.qkv.w"), w(l, "attn.qkv.b"), qkv);
    Matrix& kc = keys_[static_cast<std::size_t>(l)];
    Matrix& vc = values_[static_cast<std::size_t>(l)];
    for (int i = 0; i < n; ++i) {
      std::copy_n(qkv.row(i) + d, d, kc.row(length_ + i));
      std::copy_n(qkv.row(i) + 2 * d, d, vc.row(length_ + i));
    }
    std::fill(att.data.begin(), att.data.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const int upto = length_ + i;
      for (int hd = 0; hd < cfg.n_heads; ++hd) {
        const double* q = qkv.row(i) + hd * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= upto; ++j) {
          scores[j] = kernels::dot(q, kc.row(j) + hd * dh, dh) * sc;
          mx = std::max(mx, scores[j]);
        }
        double z = 0.0;
        for (int j = 0; j <= upto; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          z += scores[j];
        }
        double* o = att.row(i) + hd * dh;
        for (int j = 0; j <= upto; ++j) kernels::axpy(scores[j] / z, vc.row(j) + hd * dh, o, dh);
      }
    }
    linear(att, w(l, "attn.out.w"), w(l, "attn.out.b"), proj);
    for (std::size_t k = 0; k < x.size(); ++k) x.data[k] += proj.data[k];
    layer_norm_rows(x, w(l, "ln2.g"), w(l, "ln2.b"), kLnEps, h);
    linear(h, w(l, "mlp.fc.w"), w(l, "mlp.fc.b"), fc);
    for (double& v : fc.data) v = gelu_scalar(v);
    linear(fc, w(l, "mlp.proj.w"), w(l, "mlp.proj.b"), proj);
    for (std::size_t k = 0; k < x.size(); ++k) x.data[k] += proj.data[k];
  }
  length_ += n;

  Matrix last(1, d);
  std::copy_n(x.row(n - 1), d, last.row(0));
  layer_norm_rows(last, model_->param("ln_f.g").value, model_->param("ln_f.b").value, kLnEps, h);
  Matrix logits;
  linear(h, model_->param("head.w").value, model_->param("head.b").value, logits);
  return std::move(logits.data);
}

std::vector<double> log_softmax(std::span<const double> logits, int lo, int hi) {
  std::vector<double> out(logits.size(), -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (int c = lo; c < hi; ++c) mx = std::max(mx, logits[c]);
  double z = 0.0;
  for (int c = lo; c < hi; ++c) z += std::exp(logits[c] - mx);
  const double lse = mx + std::log(z);
  for (int c = lo; c < hi; ++c) out[c] = logits[c] - lse;
  return out;
}

}  // namespace mapnav::tensor
