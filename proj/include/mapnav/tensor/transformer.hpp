#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mapnav/tensor/tensor.hpp"

namespace mapnav::tensor {

struct TransformerConfig {
  int vocab_size = 0;
  int context_len = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
  bool operator==(const TransformerConfig&) const = default;
};

/// Decoder-only pre-norm transformer with learned positional embeddings.
/// Parameters live in a flat, name-addressable list whose order is fixed by
/// the config, which makes initialisation and checkpoints deterministic.
class Model {
 public:
  explicit Model(const TransformerConfig& config);

  const TransformerConfig& config() const { return config_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  Parameter& param(std::string_view name);
  const Parameter& param(std::string_view name) const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  TransformerConfig config_;
  std::vector<Parameter> params_;
};

Model init_model(const TransformerConfig& config);

/// Validates ids and length; throws SequenceTooLong / TokenOutOfVocab.
void check_tokens(const TransformerConfig& config, std::span<const int> tokens);

/// Final-layer-normed hidden states, [T x d_model].
Var forward_hidden(Graph& g, Model& model, std::span<const int> tokens);

/// Output head applied to a selection of hidden rows: [rows x vocab].
Var project_logits(Graph& g, Model& model, Var hidden_rows);

/// Full causal pass, [T x vocab]. Rows before `cond_len` are conditioning
/// context; they are computed (causality makes them well defined) but no
/// loss in this library reads them.
Var forward_logits(Graph& g, Model& model, std::span<const int> tokens, int cond_len = 0);

/// Incremental decoder with a key/value cache over a frozen model. It reads
/// the parameters in place and must not outlive the model or see updates
/// between calls.
class DecoderSession {
 public:
  explicit DecoderSession(const Model& model);

  /// Feeds tokens and returns the logits that follow the last one.
  std::vector<double> feed(std::span<const int> tokens);
  std::vector<double> feed(int token) { return feed(std::span<const int>(&token, 1)); }
  int length() const { return length_; }

 private:
  const Model* model_;
  int length_ = 0;
  std::vector<Matrix> keys_;
  std::vector<Matrix> values_;
};

/// Numerically stable log-softmax over [lo, hi) of a logit row; entries
/// outside the range are left at -inf.
std::vector<double> log_softmax(std::span<const double> logits, int lo, int hi);

}  // namespace mapnav::tensor
