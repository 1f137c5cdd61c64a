#include "mapnav/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mapnav/error.hpp"
#include "mapnav/tensor/kernels.hpp"

namespace mapnav::tensor {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

void add_into(Matrix& dst, const Matrix& src) {
  kernels::axpy(1.0, src.data.data(), dst.data.data(), src.size());
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

// ---------------------------------------------------------------- Var / Graph

const Matrix& Var::value() const { return graph_->value(id_); }

double Var::item() const {
  const Matrix& v = value();
  require(v.rows == 1 && v.cols == 1, "item() on a non-scalar node");
  return v.data[0];
}

Graph* Graph::check_owner(Var v) const {
  if (v.graph_ != this) throw Error(ErrorCode::ShapeMismatch, "node belongs to another graph");
  return v.graph_;
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::scalar(double v) { return constant(Matrix(1, 1, v)); }

Var Graph::param(Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::make(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return make(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(fn));
}

Var Graph::make(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    check_owner(in);
    needs = needs || requires_grad(in.id());
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Graph::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

Matrix& Graph::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  Matrix& g = n.param != nullptr ? n.param->grad : n.grad;
  const Matrix& v = value(id);
  if (!g.same_shape(v)) g = Matrix(v.rows, v.cols);
  n.grad_live = true;
  return g;
}

void Graph::backward(Var loss) {
  check_owner(loss);
  if (consumed_) throw Error(ErrorCode::GraphConsumed, "backward already ran on this graph");
  consumed_ = true;
  require(value(loss.id()).size() == 1, "backward needs a scalar loss");
  if (!requires_grad(loss.id())) return;
  grad(loss.id()).data[0] += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_live || !n.backward) continue;
    n.backward(*this, id);
    n.grad = Matrix();
    n.backward = nullptr;
  }
}

// ---------------------------------------------------------------- linear algebra

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.cols == bv.rows, "matmul inner dimensions");
  Matrix out(av.rows, bv.cols);
  kernels::gemm_nn(av.rows, bv.cols, av.cols, av.data.data(), bv.data.data(), out.data.data());
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& av = g.value(ia);
    const Matrix& bv = g.value(ib);
    if (g.requires_grad(ia)) {
      // dA[m x k] += dC[m x n] * B[k x n]^T
      kernels::gemm_nt(go.rows, av.cols, go.cols, go.data.data(), bv.data.data(),
                       g.grad(ia).data.data());
    }
    if (g.requires_grad(ib)) {
      // dB[k x n] += A[m x k]^T * dC[m x n]
      kernels::gemm_tn(av.rows, go.cols, av.cols, av.data.data(), go.data.data(),
                       g.grad(ib).data.data());
    }
  });
}

Var add(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.same_shape(bv), "add shapes");
  Matrix out = av;
  add_into(out, bv);
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ia)) add_into(g.grad(ia), go);
    if (g.requires_grad(ib)) add_into(g.grad(ib), go);
  });
}

Var sub(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.same_shape(bv), "sub shapes");
  Matrix out = av;
  kernels::axpy(-1.0, bv.data.data(), out.data.data(), out.size());
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ia)) add_into(g.grad(ia), go);
    if (g.requires_grad(ib)) {
      Matrix& gb = g.grad(ib);
      kernels::axpy(-1.0, go.data.data(), gb.data.data(), go.size());
    }
  });
}

Var mul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.same_shape(bv), "mul shapes");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& av = g.value(ia);
    const Matrix& bv = g.value(ib);
    if (g.requires_grad(ia)) {
      Matrix& ga = g.grad(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i] * bv.data[i];
    }
    if (g.requires_grad(ib)) {
      Matrix& gb = g.grad(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb.data[i] += go.data[i] * av.data[i];
    }
  });
}

Var add_row(Var x, Var bias) {
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  require(bv.rows == 1 && bv.cols == xv.cols, "add_row bias shape");
  Matrix out = xv;
  for (int r = 0; r < out.rows; ++r) kernels::axpy(1.0, bv.data.data(), out.row(r), out.cols);
  const int ix = x.id(), ib = bias.id();
  return x.graph()->make(std::move(out), {x, bias}, [ix, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ix)) add_into(g.grad(ix), go);
    if (g.requires_grad(ib)) {
      Matrix& gb = g.grad(ib);
      for (int r = 0; r < go.rows; ++r) kernels::axpy(1.0, go.row(r), gb.data.data(), go.cols);
    }
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  const int ia = a.id();
  return a.graph()->make(std::move(out), {a}, [ia, s](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    kernels::axpy(s, go.data.data(), g.grad(ia).data.data(), go.size());
  });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v += s;
  const int ia = a.id();
  return a.graph()->make(std::move(out), {a}, [ia](Graph& g, int self) {
    add_into(g.grad(ia), g.grad(self));
  });
}

Var exp(Var a) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::exp(v);
  const int ia = a.id();
  return a.graph()->make(std::move(out), {a}, [ia](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& y = g.value(self);
    Matrix& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i] * y.data[i];
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::clamp(v, lo, hi);
  const int ia = a.id();
  return a.graph()->make(std::move(out), {a}, [ia, lo, hi](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& x = g.value(ia);
    Matrix& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (x.data[i] >= lo && x.data[i] <= hi) ga.data[i] += go.data[i];
    }
  });
}

Var minimum(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.same_shape(bv), "minimum shapes");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::min(av.data[i], bv.data[i]);
  const int ia = a.id(), ib = b.id();
  return a.graph()->make(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& av = g.value(ia);
    const Matrix& bv = g.value(ib);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const bool to_a = av.data[i] <= bv.data[i];
      if (to_a && g.requires_grad(ia)) g.grad(ia).data[i] += go.data[i];
      if (!to_a && g.requires_grad(ib)) g.grad(ib).data[i] += go.data[i];
    }
  });
}

Var sum(Var a) {
  const Matrix& av = a.value();
  double s = 0.0;
  for (double v : av.data) s += v;
  const int ia = a.id();
  return a.graph()->make(Matrix(1, 1, s), {a}, [ia](Graph& g, int self) {
    const double go = g.grad(self).data[0];
    Matrix& ga = g.grad(ia);
    for (double& v : ga.data) v += go;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  require(n > 0, "mean of empty node");
  return scale(sum(a), 1.0 / n);
}

Var add_n(std::span<const Var> xs) {
  require(!xs.empty(), "add_n of nothing");
  Graph& graph = *xs.front().graph();
  Matrix out = xs.front().value();
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i].value().same_shape(out), "add_n shapes");
    if (i > 0) add_into(out, xs[i].value());
    ids.push_back(xs[i].id());
  }
  return graph.make(std::move(out), xs, [ids](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    for (int id : ids) {
      if (g.requires_grad(id)) add_into(g.grad(id), go);
    }
  });
}

Var stack_scalars(std::span<const Var> xs) {
  require(!xs.empty(), "stack of nothing");
  Graph& graph = *xs.front().graph();
  Matrix out(static_cast<int>(xs.size()), 1);
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.data[i] = xs[i].item();
    ids.push_back(xs[i].id());
  }
  return graph.make(std::move(out), xs, [ids](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (g.requires_grad(ids[i])) g.grad(ids[i]).data[0] += go.data[i];
    }
  });
}

// ---------------------------------------------------------------- transformer pieces

void layer_norm_rows(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                     Matrix& out) {
  out = Matrix(x.rows, x.cols);
  const int n = x.cols;
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += xr[c];
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    double* o = out.row(r);
    for (int c = 0; c < n; ++c) o[c] = (xr[c] - mu) * inv * gain.data[c] + bias.data[c];
  }
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = x.value();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  require(gv.rows == 1 && gv.cols == xv.cols && bv.same_shape(gv), "layer_norm params");
  const int rows = xv.rows, n = xv.cols;
  auto xhat = std::make_shared<Matrix>(rows, n);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  Matrix out(rows, n);
  for (int r = 0; r < rows; ++r) {
    const double* xr = xv.row(r);
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += xr[c];
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = inv;
    double* h = xhat->row(r);
    double* o = out.row(r);
    for (int c = 0; c < n; ++c) {
      h[c] = (xr[c] - mu) * inv;
      o[c] = h[c] * gv.data[c] + bv.data[c];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph()->make(
      std::move(out), {x, gain, bias}, [ix, ig, ib, xhat, inv_std](Graph& g, int self) {
        const Matrix& go = g.grad(self);
        const Matrix& gv = g.value(ig);
        const int rows = go.rows, n = go.cols;
        if (g.requires_grad(ig)) {
          Matrix& gg = g.grad(ig);
          for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < n; ++c) gg.data[c] += go(r, c) * (*xhat)(r, c);
          }
        }
        if (g.requires_grad(ib)) {
          Matrix& gb = g.grad(ib);
          for (int r = 0; r < rows; ++r) kernels::axpy(1.0, go.row(r), gb.data.data(), n);
        }
        if (g.requires_grad(ix)) {
          Matrix& gx = g.grad(ix);
          std::vector<double> dxhat(static_cast<std::size_t>(n));
          for (int r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (int c = 0; c < n; ++c) {
              dxhat[c] = go(r, c) * gv.data[c];
              m1 += dxhat[c];
              m2 += dxhat[c] * (*xhat)(r, c);
            }
            m1 /= n;
            m2 /= n;
            const double inv = (*inv_std)[static_cast<std::size_t>(r)];
            double* gxr = gx.row(r);
            for (int c = 0; c < n; ++c) gxr[c] += inv * (dxhat[c] - m1 - (*xhat)(r, c) * m2);
          }
        }
      });
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

Var gelu(Var x) {
  Matrix out = x.value();
  for (double& v : out.data) v = gelu_scalar(v);
  const int ix = x.id();
  return x.graph()->make(std::move(out), {x}, [ix](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& xv = g.value(ix);
    Matrix& gx = g.grad(ix);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double v = xv.data[i];
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d =
          0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx.data[i] += go.data[i] * d;
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const Matrix& tv = table.value();
  Matrix out(static_cast<int>(ids.size()), tv.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows) {
      throw Error(ErrorCode::TokenOutOfVocab, "embedding id " + std::to_string(ids[i]));
    }
    std::copy_n(tv.row(ids[i]), tv.cols, out.row(static_cast<int>(i)));
  }
  const int it = table.id();
  std::vector<int> idv(ids.begin(), ids.end());
  return table.graph()->make(std::move(out), {table}, [it, idv](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix& gt = g.grad(it);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      kernels::axpy(1.0, go.row(static_cast<int>(i)), gt.row(idv[i]), go.cols);
    }
  });
}

Var gather_rows(Var x, std::span<const int> rows) {
  const Matrix& xv = x.value();
  Matrix out(static_cast<int>(rows.size()), xv.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < xv.rows, "gather_rows index");
    std::copy_n(xv.row(rows[i]), xv.cols, out.row(static_cast<int>(i)));
  }
  const int ix = x.id();
  std::vector<int> rv(rows.begin(), rows.end());
  return x.graph()->make(std::move(out), {x}, [ix, rv](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (std::size_t i = 0; i < rv.size(); ++i) {
      kernels::axpy(1.0, go.row(static_cast<int>(i)), gx.row(rv[i]), go.cols);
    }
  });
}

namespace {

// Copies columns [c0, c0 + w) of src into a dense [rows x w] buffer.
void extract_cols(const Matrix& src, int c0, int w, std::vector<double>& dst) {
  dst.resize(static_cast<std::size_t>(src.rows) * w);
  for (int r = 0; r < src.rows; ++r) std::copy_n(src.row(r) + c0, w, dst.data() + r * w);
}

void scatter_add_cols(const std::vector<double>& src, int c0, int w, Matrix& dst) {
  for (int r = 0; r < dst.rows; ++r) {
    kernels::axpy(1.0, src.data() + r * w, dst.row(r) + c0, static_cast<std::size_t>(w));
  }
}

}  // namespace

Var causal_attention(Var qkv, int n_heads) {
  const Matrix& in = qkv.value();
  require(in.cols % 3 == 0, "attention input must be [T x 3d]");
  const int t_len = in.rows;
  const int d = in.cols / 3;
  require(n_heads > 0 && d % n_heads == 0, "attention heads must divide d");
  const int dh = d / n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t tt = static_cast<std::size_t>(t_len) * t_len;

  // Softmax weights per head, kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(tt * n_heads, 0.0);
  Matrix out(t_len, d);
  std::vector<double> qh, kh, vh, oh(static_cast<std::size_t>(t_len) * dh);
  for (int h = 0; h < n_heads; ++h) {
    extract_cols(in, h * dh, dh, qh);
    extract_cols(in, d + h * dh, dh, kh);
    extract_cols(in, 2 * d + h * dh, dh, vh);
    double* p = probs->data() + tt * h;
    kernels::gemm_nt(t_len, t_len, dh, qh.data(), kh.data(), p);
    for (int i = 0; i < t_len; ++i) {
      double* row = p + static_cast<std::size_t>(i) * t_len;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j <= i; ++j) {
        row[j] *= sc;
        mx = std::max(mx, row[j]);
      }
      double z = 0.0;
      for (int j = 0; j <= i; ++j) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      }
      const double inv = 1.0 / z;
      for (int j = 0; j <= i; ++j) row[j] *= inv;
      for (int j = i + 1; j < t_len; ++j) row[j] = 0.0;
    }
    std::fill(oh.begin(), oh.end(), 0.0);
    kernels::gemm_nn(t_len, dh, t_len, p, vh.data(), oh.data());
    for (int r = 0; r < t_len; ++r) std::copy_n(oh.data() + r * dh, dh, out.row(r) + h * dh);
  }

  const int iq = qkv.id();
  return qkv.graph()->make(
      std::move(out), {qkv}, [iq, n_heads, d, dh, sc, t_len, tt, probs](Graph& g, int self) {
        const Matrix& go = g.grad(self);
        const Matrix& in = g.value(iq);
        Matrix& gin = g.grad(iq);
        std::vector<double> qh, kh, vh, doh;
        std::vector<double> dp(tt), dq, dk, dv;
        for (int h = 0; h < n_heads; ++h) {
          extract_cols(in, h * dh, dh, qh);
          extract_cols(in, d + h * dh, dh, kh);
          extract_cols(in, 2 * d + h * dh, dh, vh);
          extract_cols(go, h * dh, dh, doh);
          const double* p = probs->data() + tt * h;
          std::fill(dp.begin(), dp.end(), 0.0);
          kernels::gemm_nt(t_len, t_len, dh, doh.data(), vh.data(), dp.data());
          dv.assign(static_cast<std::size_t>(t_len) * dh, 0.0);
          kernels::gemm_tn(t_len, dh, t_len, p, doh.data(), dv.data());
          // dS = P * (dP - rowsum(P * dP)), scaled for the 1/sqrt(dh) factor.
          for (int i = 0; i < t_len; ++i) {
            const double* pr = p + static_cast<std::size_t>(i) * t_len;
            double* dr = dp.data() + static_cast<std::size_t>(i) * t_len;
            double s = 0.0;
            for (int j = 0; j <= i; ++j) s += pr[j] * dr[j];
            for (int j = 0; j <= i; ++j) dr[j] = pr[j] * (dr[j] - s) * sc;
            for (int j = i + 1; j < t_len; ++j) dr[j] = 0.0;
          }
          dq.assign(static_cast<std::size_t>(t_len) * dh, 0.0);
          kernels::gemm_nn(t_len, dh, t_len, dp.data(), kh.data(), dq.data());
          dk.assign(static_cast<std::size_t>(t_len) * dh, 0.0);
          kernels::gemm_tn(t_len, dh, t_len, dp.data(), qh.data(), dk.data());
          scatter_add_cols(dq, h * dh, dh, gin);
          scatter_add_cols(dk, d + h * dh, dh, gin);
          scatter_add_cols(dv, 2 * d + h * dh, dh, gin);
        }
      });
}

Var log_softmax_pick(Var logits, std::span<const int> targets, int lo, int hi) {
  const Matrix& lv = logits.value();
  require(static_cast<int>(targets.size()) == lv.rows, "one target per logit row");
  require(0 <= lo && lo < hi && hi <= lv.cols, "log_softmax_pick range");
  auto lse = std::make_shared<std::vector<double>>(targets.size());
  Matrix out(lv.rows, 1);
  for (int r = 0; r < lv.rows; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < lo || t >= hi) {
      throw Error(ErrorCode::TokenOutOfVocab, "target " + std::to_string(t) + " outside [" +
                                                  std::to_string(lo) + "," + std::to_string(hi) +
                                                  ")");
    }
    const double* row = lv.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = lo; c < hi; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = lo; c < hi; ++c) z += std::exp(row[c] - mx);
    const double l = mx + std::log(z);
    (*lse)[static_cast<std::size_t>(r)] = l;
    out.data[static_cast<std::size_t>(r)] = row[t] - l;
  }
  const int il = logits.id();
  std::vector<int> tv(targets.begin(), targets.end());
  return logits.graph()->make(std::move(out), {logits}, [il, tv, lo, hi, lse](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& lv = g.value(il);
    Matrix& gl = g.grad(il);
    for (int r = 0; r < lv.rows; ++r) {
      const double gr = go.data[static_cast<std::size_t>(r)];
      if (gr == 0.0) continue;
      const double l = (*lse)[static_cast<std::size_t>(r)];
      const double* row = lv.row(r);
      double* grow = gl.row(r);
      for (int c = lo; c < hi; ++c) grow[c] -= gr * std::exp(row[c] - l);
      grow[tv[static_cast<std::size_t>(r)]] += gr;
    }
  });
}

}  // namespace mapnav::tensor
