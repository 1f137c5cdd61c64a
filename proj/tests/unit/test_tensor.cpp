#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "mapnav/error.hpp"
#include "mapnav/tensor/checkpoint.hpp"
#include "mapnav/tensor/gradcheck.hpp"
#include "mapnav/tensor/optim.hpp"
#include "mapnav/tensor/tensor.hpp"
#include "mapnav/tensor/transformer.hpp"

using namespace mapnav;
using namespace mapnav::tensor;

namespace {

Parameter random_param(const char* name, int r, int c, std::mt19937_64& rng, double lo = -1.0,
                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Parameter p{name, Matrix(r, c), Matrix(r, c)};
  for (double& x : p.value.data) x = u(rng);
  return p;
}

// Central-difference check of every entry of every parameter. Test-local so
// it does not share code with finite_diff_check.
double op_grad_error(std::vector<Parameter*> params, const std::function<Var(Graph&)>& f) {
  for (Parameter* p : params) p->grad = Matrix(p->value.rows, p->value.cols);
  {
    Graph g;
    Var loss = f(g);
    g.backward(loss);
  }
  double worst = 0.0;
  const double h = 1e-6;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double x = p->value.data[i];
      p->value.data[i] = x + h;
      double up;
      {
        Graph g;
        up = f(g).item();
      }
      p->value.data[i] = x - h;
      double down;
      {
        Graph g;
        down = f(g).item();
      }
      p->value.data[i] = x;
      const double num = (up - down) / (2 * h);
      const double ana = p->grad.data[i];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-4}));
    }
  }
  return worst;
}

// Weighted sum so every output element carries a distinct upstream gradient.
Var weighted_sum(Graph& g, Var x) {
  Matrix w(x.rows(), x.cols());
  for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
  return sum(mul(x, g.constant(std::move(w))));
}

TransformerConfig tiny_config(int vocab = 11, int d = 16, int layers = 2, int heads = 4) {
  TransformerConfig c;
  c.vocab_size = vocab;
  c.context_len = 12;
  c.d_model = d;
  c.n_heads = heads;
  c.n_layers = layers;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("elementwise and reduction ops have correct gradients") {
  std::mt19937_64 rng(5);
  Parameter a = random_param("a", 3, 4, rng), b = random_param("b", 3, 4, rng);
  Parameter row = random_param("row", 1, 4, rng);
  Parameter w = random_param("w", 4, 5, rng);
  CHECK(op_grad_error({&a, &w}, [&](Graph& g) { return weighted_sum(g, matmul(g.param(a), g.param(w))); }) < 1e-6);
  CHECK(op_grad_error({&a, &b}, [&](Graph& g) { return weighted_sum(g, mul(g.param(a), g.param(b))); }) < 1e-6);
  CHECK(op_grad_error({&a, &b}, [&](Graph& g) { return weighted_sum(g, sub(g.param(a), g.param(b))); }) < 1e-6);
  CHECK(op_grad_error({&a, &row}, [&](Graph& g) { return weighted_sum(g, add_row(g.param(a), g.param(row))); }) < 1e-6);
  CHECK(op_grad_error({&a}, [&](Graph& g) { return weighted_sum(g, exp(scale(g.param(a), 0.5))); }) < 1e-6);
  CHECK(op_grad_error({&a}, [&](Graph& g) { return weighted_sum(g, clamp(g.param(a), -0.3, 0.4)); }) < 1e-6);
  CHECK(op_grad_error({&a, &b}, [&](Graph& g) { return weighted_sum(g, minimum(g.param(a), g.param(b))); }) < 1e-6);
  CHECK(op_grad_error({&a}, [&](Graph& g) { return mean(add_scalar(g.param(a), 3.0)); }) < 1e-6);
  CHECK(op_grad_error({&a}, [&](Graph& g) { return weighted_sum(g, gelu(g.param(a))); }) < 1e-6);
  CHECK(op_grad_error({&a, &b}, [&](Graph& g) {
          Var xs[] = {g.param(a), g.param(b), g.param(a)};
          return weighted_sum(g, add_n(xs));
        }) < 1e-6);
  CHECK(op_grad_error({&a}, [&](Graph& g) {
          Var pa = g.param(a);
          Var xs[] = {sum(pa), sum(mul(pa, pa))};
          return weighted_sum(g, stack_scalars(xs));
        }) < 1e-6);
}

TEST_CASE("layer norm, embedding, gather and attention gradients") {
  std::mt19937_64 rng(9);
  Parameter x = random_param("x", 5, 6, rng);
  Parameter gain = random_param("g", 1, 6, rng, 0.5, 1.5);
  Parameter bias = random_param("b", 1, 6, rng);
  CHECK(op_grad_error({&x, &gain, &bias}, [&](Graph& g) {
          return weighted_sum(g, layer_norm(g.param(x), g.param(gain), g.param(bias)));
        }) < 1e-6);

  Parameter table = random_param("t", 7, 3, rng);
  const std::vector<int> ids{3, 0, 3, 6};
  CHECK(op_grad_error({&table}, [&](Graph& g) { return weighted_sum(g, embedding(g.param(table), ids)); }) < 1e-6);
  const std::vector<int> rows{4, 1, 1};
  CHECK(op_grad_error({&x}, [&](Graph& g) { return weighted_sum(g, gather_rows(g.param(x), rows)); }) < 1e-6);

  Parameter qkv = random_param("qkv", 5, 12, rng);
  CHECK(op_grad_error({&qkv}, [&](Graph& g) { return weighted_sum(g, causal_attention(g.param(qkv), 2)); }) < 1e-6);

  Parameter logits = random_param("l", 3, 8, rng, -2.0, 2.0);
  const std::vector<int> targets{2, 5, 3};
  CHECK(op_grad_error({&logits}, [&](Graph& g) { return weighted_sum(g, log_softmax_pick(g.param(logits), targets, 0, 8)); }) < 1e-6);
  CHECK(op_grad_error({&logits}, [&](Graph& g) { return weighted_sum(g, log_softmax_pick(g.param(logits), targets, 2, 6)); }) < 1e-6);
}

TEST_CASE("log_softmax_pick rejects targets outside the mask") {
  Graph g;
  Var l = g.constant(Matrix(1, 5));
  const std::vector<int> t{4};
  CHECK_THROWS_AS(log_softmax_pick(l, t, 0, 3), Error);
}

TEST_CASE("backward: constant loss, linear loss, consumption and accumulation") {
  Model m(tiny_config());
  m.zero_grad();
  {
    Graph g;
    Var loss = g.scalar(3.0);
    g.backward(loss);
  }
  for (const Parameter& p : m.params()) {
    for (double v : p.grad.data) CHECK(v == 0.0);
  }

  Parameter& w = m.param("blocks.0.attn.out.w");
  Graph g;
  Var loss = sum(g.param(w));
  g.backward(loss);
  for (double v : w.grad.data) CHECK(v == 1.0);
  CHECK_THROWS_AS(g.backward(loss), Error);
  try {
    g.backward(loss);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GraphConsumed);
  }

  Graph g2;
  g2.backward(sum(g2.param(w)));
  for (double v : w.grad.data) CHECK(v == 2.0);
}

TEST_CASE("init_model is deterministic and validates the config") {
  Model a = init_model(tiny_config());
  Model b = init_model(tiny_config());
  CHECK(serialize_model(a) == serialize_model(b));
  TransformerConfig other = tiny_config();
  other.seed = 43;
  CHECK(serialize_model(a) != serialize_model(init_model(other)));

  TransformerConfig bad = tiny_config(11, 8, 2, 3);
  CHECK_THROWS_AS(init_model(bad), Error);

  Model flat = init_model(tiny_config(11, 16, 0, 4));
  Graph g;
  const std::vector<int> toks{1, 2, 3};
  Var logits = forward_logits(g, flat, toks);
  CHECK(logits.rows() == 3);
  CHECK(logits.cols() == 11);
}

TEST_CASE("forward_logits shape, normalisation and causality") {
  Model m(tiny_config());
  std::vector<int> toks{1, 4, 2, 9, 0, 3};
  Matrix base;
  {
    Graph g;
    Var l = forward_logits(g, m, toks, 2);
    CHECK(l.rows() == 6);
    CHECK(l.cols() == 11);
    base = l.value();
  }
  for (int r = 0; r < base.rows; ++r) {
    auto lp = log_softmax(std::span<const double>(base.row(r), 11), 0, 11);
    double s = 0.0;
    for (double v : lp) s += std::exp(v);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  for (int p = 0; p < 6; ++p) {
    std::vector<int> changed = toks;
    changed[p] = (changed[p] + 5) % 11;
    Graph g;
    const Matrix& l = forward_logits(g, m, changed).value();
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c < 11; ++c) CHECK(l(r, c) == base(r, c));
    }
    bool differs = false;
    for (int c = 0; c < 11; ++c) differs = differs || l(p, c) != base(p, c);
    CHECK(differs);
  }

  std::vector<int> too_long(13, 1);
  Graph g;
  CHECK_THROWS_AS(forward_logits(g, m, too_long), Error);
  std::vector<int> oov{1, 11};
  CHECK_THROWS_AS(forward_logits(g, m, oov), Error);
}

TEST_CASE("incremental decoder matches the full forward pass") {
  Model m(tiny_config());
  std::vector<int> toks{1, 4, 2, 9, 0, 3, 7};
  Graph g;
  const Matrix full = forward_logits(g, m, toks).value();
  DecoderSession s(m);
  auto l = s.feed(std::span<const int>(toks.data(), 3));
  for (int c = 0; c < 11; ++c) CHECK(std::abs(l[c] - full(2, c)) < 1e-12);
  for (int p = 3; p < 7; ++p) {
    l = s.feed(toks[p]);
    for (int c = 0; c < 11; ++c) CHECK(std::abs(l[c] - full(p, c)) < 1e-12);
  }
  CHECK(s.length() == 7);
}

TEST_CASE("full-model gradients match central differences (d_model=16)") {
  Model m(tiny_config(11, 16, 2, 4));
  const std::vector<int> toks{1, 4, 2, 9, 0, 3, 7, 5};
  LossFn loss = [&](Graph& g) {
    Var logits = forward_logits(g, m, toks);
    std::vector<int> targets(toks.begin() + 1, toks.end());
    targets.push_back(2);
    return scale(sum(log_softmax_pick(logits, targets, 0, 11)), -1.0 / 8.0);
  };
  GradCheckOptions opt;
  opt.n_probes = 60;
  opt.tol = 1e-4;
  opt.seed = 3;
  GradCheckReport r = finite_diff_check(m, loss, opt);
  CHECK(r.pass);
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.probes.size() == 60);
}

TEST_CASE("finite_diff_check: exact linear case and impossible tolerance") {
  Model m(tiny_config(11, 8, 1, 2));
  Parameter& w = m.param("blocks.0.attn.out.w");
  LossFn linear = [&](Graph& g) { return sum(g.param(w)); };
  GradCheckOptions opt;
  opt.n_probes = 20;
  opt.tol = 1e-4;
  GradCheckReport r = finite_diff_check(m, linear, opt);
  CHECK(r.max_rel_err < 1e-9);

  const std::vector<int> toks{1, 2, 3, 4};
  LossFn ce = [&](Graph& g) {
    const std::vector<int> targets{2, 3, 4, 5};
    return scale(sum(log_softmax_pick(forward_logits(g, m, toks), targets, 0, 11)), -0.25);
  };
  opt.tol = 0.0;
  CHECK_FALSE(finite_diff_check(m, ce, opt).pass);
}

TEST_CASE("adam: fixed point, closed-form first step, non-finite guard") {
  TransformerConfig c = tiny_config(5, 4, 0, 1);
  Model m(c);
  Adam adam;
  m.zero_grad();
  const std::string before = serialize_model(m);
  adam.step(m, 1e-3);
  CHECK(serialize_model(m) == before);

  Parameter& b = m.param("head.b");
  const double x0 = b.value.data[0];
  m.zero_grad();
  b.grad.data[0] = 1.0;
  Adam fresh;
  fresh.step(m, 1e-3);
  // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
  CHECK(std::abs((b.value.data[0] - x0) + 1e-3 / (1.0 + 1e-8)) < 1e-15);
  fresh.step(m, 1e-3);
  CHECK(std::abs((b.value.data[0] - x0) + 2e-3 / (1.0 + 1e-8)) < 1e-12);

  const std::string snap = serialize_model(m);
  b.grad.data[1] = std::nan("");
  try {
    fresh.step(m, 1e-3);
    FAIL("expected NonFiniteGradient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteGradient);
  }
  CHECK(serialize_model(m) == snap);
}

TEST_CASE("checkpoints and optimizer state round-trip bit-exactly") {
  Model m(tiny_config());
  Adam adam;
  m.zero_grad();
  m.param("head.w").grad.data[3] = 0.25;
  adam.step(m, 1e-2);
  const std::string bytes = serialize_model(m);
  Model back = deserialize_model(bytes);
  CHECK(back.config() == m.config());
  CHECK(serialize_model(back) == bytes);
  CHECK(bytes.substr(0, 8) == "MNAVCKPT");

  const std::string ob = serialize_optimizer(adam);
  Adam ab = deserialize_optimizer(ob);
  CHECK(ab.step_count() == 1);
  CHECK(serialize_optimizer(ab) == ob);

  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), Error);
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(corrupt), Error);
}
