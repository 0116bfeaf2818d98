// Copyright 2026 The stok Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal transformer stack with explicit backward passes. Everything is
// templated on the scalar so training runs in float while gradient checks
// instantiate the exact same code in double.

#ifndef STOK_NN_HPP_
#define STOK_NN_HPP_

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "stok/common.hpp"

namespace stok::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// --- FLOP accounting ------------------------------------------------------

namespace flops {
std::uint64_t count();
void reset();
void add(std::uint64_t n);
}  // namespace flops

// --- Initialization -------------------------------------------------------

// Truncated normal (+-2 std), drawn in double so float and double models
// seeded identically start from the same values.
template <class S>
void init_trunc_normal(Mat<S>& m, Rng& rng, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = dist(rng);
      while (std::abs(v) > 2.0 * std_dev) v = dist(rng);
      m(i, j) = S(v);
    }
  }
}

// --- Layers ----------------------------------------------------------------

template <class S>
struct Linear {
  Mat<S> w, gw;  // in x out
  Mat<S> b, gb;  // 1 x out

  struct Cache {
    Mat<S> x;
  };

  void init(int in, int out, Rng& rng, double std_dev = 0.02) {
    w.resize(in, out);
    init_trunc_normal(w, rng, std_dev);
    b = Mat<S>::Zero(1, out);
    gw = Mat<S>::Zero(in, out);
    gb = Mat<S>::Zero(1, out);
  }

  Mat<S> forward(const Mat<S>& x, Cache* c) const {
    if (c) c->x = x;
    Mat<S> y(x.rows(), w.cols());
    y.noalias() = x * w;
    y.rowwise() += b.row(0);
    flops::add(2ull * x.rows() * x.cols() * w.cols());
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    gw.noalias() += c.x.transpose() * dy;
    gb.row(0) += dy.colwise().sum();
    Mat<S> dx(dy.rows(), w.rows());
    dx.noalias() = dy * w.transpose();
    flops::add(4ull * dy.rows() * w.rows() * w.cols());
    return dx;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w", w, gw);
    f(prefix + ".b", b, gb);
  }
};

template <class S>
struct LayerNorm {
  Mat<S> gamma, ggamma;  // 1 x d
  Mat<S> beta, gbeta;    // 1 x d
  S eps = S(1e-6);

  struct Cache {
    Mat<S> xhat;
    Vec<S> rstd;
  };

  void init(int d) {
    gamma = Mat<S>::Ones(1, d);
    beta = Mat<S>::Zero(1, d);
    ggamma = Mat<S>::Zero(1, d);
    gbeta = Mat<S>::Zero(1, d);
  }

  Mat<S> forward(const Mat<S>& x, Cache* c) const {
    const Eigen::Index n = x.rows(), d = x.cols();
    Vec<S> mu = x.rowwise().mean();
    Mat<S> xc = x;
    xc.colwise() -= mu;
    Vec<S> var = xc.array().square().rowwise().mean();
    Vec<S> rstd = (var.array() + eps).rsqrt();
    Mat<S> xhat = xc.array().colwise() * rstd.array();
    Mat<S> y = xhat.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    if (c) {
      c->xhat = std::move(xhat);
      c->rstd = std::move(rstd);
    } else {
      return y;
    }
    flops::add(8ull * n * d);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    const Eigen::Index d = dy.cols();
    ggamma.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    gbeta.row(0) += dy.colwise().sum();
    Mat<S> dxhat = dy.array().rowwise() * gamma.row(0).array();
    Vec<S> m1 = dxhat.rowwise().mean();
    Vec<S> m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
    Mat<S> dx = dxhat;
    dx.colwise() -= m1;
    dx.array() -= c.xhat.array().colwise() * m2.array();
    dx.array().colwise() *= c.rstd.array();
    flops::add(12ull * dy.rows() * d);
    return dx;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma, ggamma);
    f(prefix + ".beta", beta, gbeta);
  }
};

template <class S>
inline Mat<S> gelu(const Mat<S>& x) {
  const double inv_sqrt2 = 0.7071067811865475244;
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = double(x.data()[i]);
    y.data()[i] = S(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
  }
  flops::add(std::uint64_t(x.size()) * 8);
  return y;
}

template <class S>
inline Mat<S> gelu_backward(const Mat<S>& dy, const Mat<S>& x) {
  const double inv_sqrt2 = 0.7071067811865475244;
  const double inv_sqrt2pi = 0.3989422804014326779;
  Mat<S> dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = double(x.data()[i]);
    double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
    double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
    dx.data()[i] = S(double(dy.data()[i]) * (cdf + v * pdf));
  }
  flops::add(std::uint64_t(x.size()) * 10);
  return dx;
}

template <class S>
struct Mlp {
  Linear<S> fc1, fc2;

  struct Cache {
    typename Linear<S>::Cache c1, c2;
    Mat<S> pre;  // fc1 output before gelu
  };

  void init(int d, int hidden, Rng& rng) {
    fc1.init(d, hidden, rng);
    fc2.init(hidden, d, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* c) const {
    Mat<S> pre = fc1.forward(x, c ? &c->c1 : nullptr);
    Mat<S> act = gelu(pre);
    if (c) c->pre = std::move(pre);
    return fc2.forward(act, c ? &c->c2 : nullptr);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    Mat<S> dact = fc2.backward(dy, c.c2);
    Mat<S> dpre = gelu_backward(dact, c.pre);
    return fc1.backward(dpre, c.c1);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
  }
};

template <class S>
struct Attention {
  Linear<S> qkv;   // d -> 3d
  Linear<S> proj;  // d -> d
  int heads = 1;
  int dim = 0;

  struct Cache {
    typename Linear<S>::Cache cqkv, cproj;
    Mat<S> a;                   // n x 3d
    std::vector<Mat<S>> attn;   // per head, n x n
  };

  void init(int d, int heads_, Rng& rng) {
    if (d % heads_ != 0) {
      throw DataError(strformat("attention: width %d not divisible by %d heads",
                                d, heads_));
    }
    dim = d;
    heads = heads_;
    qkv.init(d, 3 * d, rng);
    proj.init(d, d, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* c) const {
    const Eigen::Index n = x.rows();
    const int dh = dim / heads;
    const S scale = S(1.0 / std::sqrt(double(dh)));
    Cache local;
    Cache& cc = c ? *c : local;
    cc.a = qkv.forward(x, c ? &cc.cqkv : nullptr);
    cc.attn.assign(heads, Mat<S>());
    Mat<S> ctx(n, dim);
    for (int h = 0; h < heads; ++h) {
      auto q = cc.a.middleCols(h * dh, dh);
      auto k = cc.a.middleCols(dim + h * dh, dh);
      auto v = cc.a.middleCols(2 * dim + h * dh, dh);
      Mat<S> s(n, n);
      s.noalias() = q * k.transpose();
      s *= scale;
      // Row-wise softmax.
      for (Eigen::Index i = 0; i < n; ++i) {
        S m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
      }
      ctx.middleCols(h * dh, dh).noalias() = s * v;
      flops::add(4ull * n * n * dh + 5ull * n * n);
      cc.attn[h] = std::move(s);
    }
    return proj.forward(ctx, c ? &cc.cproj : nullptr);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    const Eigen::Index n = dy.rows();
    const int dh = dim / heads;
    const S scale = S(1.0 / std::sqrt(double(dh)));
    Mat<S> dctx = proj.backward(dy, c.cproj);
    Mat<S> da = Mat<S>::Zero(n, 3 * dim);
    for (int h = 0; h < heads; ++h) {
      auto q = c.a.middleCols(h * dh, dh);
      auto k = c.a.middleCols(dim + h * dh, dh);
      auto v = c.a.middleCols(2 * dim + h * dh, dh);
      const Mat<S>& attn = c.attn[h];
      auto dctx_h = dctx.middleCols(h * dh, dh);
      Mat<S> dattn(n, n);
      dattn.noalias() = dctx_h * v.transpose();
      da.middleCols(2 * dim + h * dh, dh).noalias() = attn.transpose() * dctx_h;
      // Softmax backward.
      Mat<S> ds = attn.array() * dattn.array();
      Vec<S> rowsum = ds.rowwise().sum();
      ds = attn.array() * (dattn.colwise() - rowsum).array();
      ds *= scale;
      da.middleCols(h * dh, dh).noalias() = ds * k;
      da.middleCols(dim + h * dh, dh).noalias() = ds.transpose() * q;
      flops::add(8ull * n * n * dh + 6ull * n * n);
    }
    return qkv.backward(da, c.cqkv);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    qkv.visit(prefix + ".qkv", f);
    proj.visit(prefix + ".proj", f);
  }
};

// Pre-LN transformer block: x + attn(ln1(x)), then + mlp(ln2(.)).
template <class S>
struct Block {
  LayerNorm<S> ln1, ln2;
  Attention<S> attn;
  Mlp<S> mlp;

  struct Cache {
    typename LayerNorm<S>::Cache cln1, cln2;
    typename Attention<S>::Cache cattn;
    typename Mlp<S>::Cache cmlp;
  };

  void init(int d, int heads, int mlp_ratio, Rng& rng) {
    ln1.init(d);
    ln2.init(d);
    attn.init(d, heads, rng);
    mlp.init(d, d * mlp_ratio, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* c) const {
    Cache local;
    Cache& cc = c ? *c : local;
    Mat<S> y1 = x + attn.forward(ln1.forward(x, c ? &cc.cln1 : nullptr),
                                 c ? &cc.cattn : nullptr);
    Mat<S> y2 = y1 + mlp.forward(ln2.forward(y1, c ? &cc.cln2 : nullptr),
                                 c ? &cc.cmlp : nullptr);
    return y2;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    Mat<S> dy1 = dy + ln2.backward(mlp.backward(dy, c.cmlp), c.cln2);
    Mat<S> dx = dy1 + ln1.backward(attn.backward(dy1, c.cattn), c.cln1);
    return dx;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    ln1.visit(prefix + ".ln1", f);
    attn.visit(prefix + ".attn", f);
    ln2.visit(prefix + ".ln2", f);
    mlp.visit(prefix + ".mlp", f);
  }
};

template <class S>
struct Tower {
  std::vector<Block<S>> blocks;

  struct Cache {
    std::vector<typename Block<S>::Cache> c;
  };

  void init(int depth, int d, int heads, int mlp_ratio, Rng& rng) {
    blocks.resize(depth);
    for (auto& b : blocks) b.init(d, heads, mlp_ratio, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* c) const {
    if (c) c->c.resize(blocks.size());
    Mat<S> h = x;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      h = blocks[i].forward(h, c ? &c->c[i] : nullptr);
    }
    return h;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    Mat<S> g = dy;
    for (std::size_t i = blocks.size(); i-- > 0;) {
      g = blocks[i].backward(g, c.c[i]);
    }
    return g;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].visit(prefix + "." + std::to_string(i), f);
    }
  }
};

// Convolutional stem over an h x w grid with cin channels, via im2col.
template <class S>
struct ConvStem {
  Linear<S> fc;  // (k*k*cin) -> cout
  int k = 0, stride = 0, pad = 0, cin = 0, cout = 0;

  struct Cache {
    typename Linear<S>::Cache cfc;
    int h = 0, w = 0;
  };

  void init(int k_, int stride_, int pad_, int cin_, int cout_, Rng& rng) {
    k = k_;
    stride = stride_;
    pad = pad_;
    cin = cin_;
    cout = cout_;
    fc.init(k * k * cin, cout, rng);
  }

  int out_extent(int n) const {
    int span = n + 2 * pad - k;
    if (span < 0 || span % stride != 0) {
      throw DataError(strformat(
          "conv stem: extent %d incompatible with k=%d stride=%d pad=%d", n, k,
          stride, pad));
    }
    return span / stride + 1;
  }

  Mat<S> im2col(const Mat<S>& x, int h, int w) const {
    const int ho = out_extent(h), wo = out_extent(w);
    Mat<S> cols = Mat<S>::Zero(ho * wo, k * k * cin);
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        auto row = cols.row(oy * wo + ox);
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            row.segment((ky * k + kx) * cin, cin) = x.row(iy * w + ix);
          }
        }
      }
    }
    return cols;
  }

  Mat<S> forward(const Mat<S>& x, int h, int w, Cache* c) const {
    if (Eigen::Index(h) * w != x.rows() || x.cols() != cin) {
      throw DataError("conv stem: input shape mismatch");
    }
    Mat<S> cols = im2col(x, h, w);
    if (c) {
      c->h = h;
      c->w = w;
    }
    return fc.forward(cols, c ? &c->cfc : nullptr);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& c) {
    Mat<S> dcols = fc.backward(dy, c.cfc);
    const int h = c.h, w = c.w;
    const int ho = out_extent(h), wo = out_extent(w);
    Mat<S> dx = Mat<S>::Zero(h * w, cin);
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        auto row = dcols.row(oy * wo + ox);
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dx.row(iy * w + ix) += row.segment((ky * k + kx) * cin, cin);
          }
        }
      }
    }
    return dx;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    fc.visit(prefix + ".fc", f);
  }
};

// --- Positional encoding ----------------------------------------------------

// Fixed 2-D sinusoidal encoding: half the channels encode the row index,
// half the column index, each as interleaved sin/cos banks. Requires
// d % 4 == 0. Built in double, cast to S.
template <class S>
Mat<S> posenc_2d(int h, int w, int d) {
  if (d % 4 != 0) {
    throw DataError(strformat("posenc_2d: width %d not divisible by 4", d));
  }
  const int quarter = d / 4;
  Mat<S> pe(h * w, d);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int i = 0; i < quarter; ++i) {
        double omega = std::pow(10000.0, -double(i) / quarter);
        double ay = y * omega;
        double ax = x * omega;
        auto row = pe.row(y * w + x);
        row(i) = S(std::sin(ay));
        row(quarter + i) = S(std::cos(ay));
        row(2 * quarter + i) = S(std::sin(ax));
        row(3 * quarter + i) = S(std::cos(ax));
      }
    }
  }
  return pe;
}

// --- Losses ------------------------------------------------------------------

// Mean cross entropy of row-wise softmax against integer targets, restricted
// to `rows`. dlogits rows outside `rows` are exactly zero.
template <class S>
double softmax_ce(const Mat<S>& logits, std::span<const std::int32_t> targets,
                  std::span<const std::int32_t> rows,
                  std::type_identity_t<Mat<S>>* dlogits) {
  if (rows.empty()) throw DataError("softmax_ce: empty row set");
  const Eigen::Index K = logits.cols();
  if (dlogits) *dlogits = Mat<S>::Zero(logits.rows(), K);
  double total = 0;
  const double inv = 1.0 / double(rows.size());
  for (std::int32_t r : rows) {
    std::int32_t t = targets[r];
    if (t < 0 || t >= K) {
      throw DataError(strformat("softmax_ce: target %d outside [0,%ld)", t, long(K)));
    }
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < K; ++j) m = std::max(m, double(logits(r, j)));
    double sum = 0;
    for (Eigen::Index j = 0; j < K; ++j) sum += std::exp(double(logits(r, j)) - m);
    double lse = m + std::log(sum);
    total += lse - double(logits(r, t));
    if (dlogits) {
      for (Eigen::Index j = 0; j < K; ++j) {
        double p = std::exp(double(logits(r, j)) - lse);
        (*dlogits)(r, j) = S((p - (j == t ? 1.0 : 0.0)) * inv);
      }
    }
  }
  flops::add(6ull * rows.size() * K);
  return total * inv;
}

// Mean cross entropy against soft target rows (each row sums to 1).
template <class S>
double softmax_ce_soft(const Mat<S>& logits, const Mat<S>& targets,
                       std::type_identity_t<Mat<S>>* dlogits) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw DataError("softmax_ce_soft: shape mismatch");
  }
  const Eigen::Index n = logits.rows(), K = logits.cols();
  if (n == 0) throw DataError("softmax_ce_soft: empty batch");
  if (dlogits) dlogits->resize(n, K);
  double total = 0;
  const double inv = 1.0 / double(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < K; ++j) m = std::max(m, double(logits(r, j)));
    double sum = 0;
    for (Eigen::Index j = 0; j < K; ++j) sum += std::exp(double(logits(r, j)) - m);
    double lse = m + std::log(sum);
    for (Eigen::Index j = 0; j < K; ++j) {
      double q = double(targets(r, j));
      double logp = double(logits(r, j)) - lse;
      if (q != 0.0) total -= q * logp;
      if (dlogits) (*dlogits)(r, j) = S((std::exp(logp) - q) * inv);
    }
  }
  flops::add(8ull * n * K);
  return total * inv;
}

// --- Optimizer and schedule ---------------------------------------------------

double cosine_lr(double base, std::int64_t step, std::int64_t total_steps,
                 std::int64_t warmup_steps, double min_lr = 0.0);

template <class S>
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Weight decay applies to ".w" leaves only (linear/conv weights).
  template <class Model>
  void step(Model& model, double lr, double weight_decay) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    std::size_t i = 0;
    model.visit([&](const std::string& name, Mat<S>& p, Mat<S>& g) {
      if (i >= m_.size()) {
        m_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
        v_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
      }
      Mat<S>& m = m_[i];
      Mat<S>& v = v_[i];
      m = S(beta1_) * m + S(1.0 - beta1_) * g;
      v.array() = S(beta2_) * v.array() + S(1.0 - beta2_) * g.array().square();
      const bool decay = weight_decay > 0 && name.size() >= 2 &&
                         name.compare(name.size() - 2, 2, ".w") == 0;
      if (decay) p -= S(lr * weight_decay) * p;
      p.array() -= S(lr) * (m.array() / S(bc1)) /
                   ((v.array() / S(bc2)).sqrt() + S(eps_));
      ++i;
    });
  }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

template <class Model>
void zero_grads(Model& model) {
  model.visit([](const std::string&, auto& p, auto& g) {
    (void)p;
    g.setZero();
  });
}

template <class Model>
void scale_grads(Model& model, double s) {
  model.visit([&](const std::string&, auto& p, auto& g) {
    (void)p;
    g *= typename std::decay_t<decltype(g)>::Scalar(s);
  });
}

// --- Checkpoint container ------------------------------------------------------
//
// magic (4 bytes), version u8=1, u32 JSON length, JSON block
// {"config": ..., "params": [{"name","rows","cols"}...]}, then the f32
// little-endian payload in manifest order, row-major.

namespace detail {
void checkpoint_write(const std::string& path, const std::string& magic,
                      const nlohmann::json& config,
                      const std::vector<std::tuple<std::string, int, int>>& manifest,
                      const std::vector<float>& payload);
struct RawCheckpoint {
  nlohmann::json config;
  std::vector<std::tuple<std::string, int, int>> manifest;
  std::vector<float> payload;
};
RawCheckpoint checkpoint_read(const std::string& path, const std::string& magic);
}  // namespace detail

template <class Model>
void save_checkpoint(const std::string& path, const std::string& magic,
                     const nlohmann::json& config, Model& model) {
  std::vector<std::tuple<std::string, int, int>> manifest;
  std::vector<float> payload;
  model.visit([&](const std::string& name, auto& p, auto& g) {
    (void)g;
    manifest.emplace_back(name, int(p.rows()), int(p.cols()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      payload.push_back(float(p.data()[i]));
    }
  });
  detail::checkpoint_write(path, magic, config, manifest, payload);
}

// Strict load: the checkpoint manifest must match the model parameter list
// exactly (names, order, shapes).
template <class Model>
nlohmann::json load_checkpoint(const std::string& path, const std::string& magic,
                               Model& model) {
  detail::RawCheckpoint raw = detail::checkpoint_read(path, magic);
  std::size_t idx = 0, off = 0;
  std::vector<std::string> problems;
  model.visit([&](const std::string& name, auto& p, auto& g) {
    (void)g;
    if (idx >= raw.manifest.size()) {
      problems.push_back("missing param " + name);
      return;
    }
    auto& [fname, rows, cols] = raw.manifest[idx];
    if (fname != name || rows != p.rows() || cols != p.cols()) {
      problems.push_back(strformat("%s: file has %s %dx%d, model expects %ldx%ld",
                                   name.c_str(), fname.c_str(), rows, cols,
                                   long(p.rows()), long(p.cols())));
      ++idx;
      off += std::size_t(rows) * cols;
      return;
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = typename std::decay_t<decltype(p)>::Scalar(raw.payload[off + i]);
    }
    off += std::size_t(p.size());
    ++idx;
  });
  if (idx != raw.manifest.size()) {
    problems.push_back(strformat("file has %zu extra params", raw.manifest.size() - idx));
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint mismatch in " + path + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return raw.config;
}

struct LoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> reinitialized;
  nlohmann::json config;
};

// Name-based partial load for fine-tuning. Parameters whose name starts
// with one of `reinit_prefixes` may be absent or shaped differently (they
// keep their fresh initialization and are reported); any other mismatch is
// an error listing the offending parameters.
template <class Model>
LoadReport load_checkpoint_partial(const std::string& path,
                                   const std::string& magic, Model& model,
                                   std::span<const std::string> reinit_prefixes) {
  detail::RawCheckpoint raw = detail::checkpoint_read(path, magic);
  std::unordered_map<std::string, std::pair<std::size_t, std::pair<int, int>>> index;
  std::size_t off = 0;
  for (auto& [name, rows, cols] : raw.manifest) {
    index[name] = {off, {rows, cols}};
    off += std::size_t(rows) * cols;
  }
  LoadReport report;
  report.config = raw.config;
  std::vector<std::string> problems;
  auto allowed = [&](const std::string& name) {
    for (const auto& p : reinit_prefixes) {
      if (name.rfind(p, 0) == 0) return true;
    }
    return false;
  };
  model.visit([&](const std::string& name, auto& p, auto& g) {
    (void)g;
    auto it = index.find(name);
    if (it == index.end() || it->second.second.first != p.rows() ||
        it->second.second.second != p.cols()) {
      if (allowed(name)) {
        report.reinitialized.push_back(name);
      } else if (it == index.end()) {
        problems.push_back("missing param " + name);
      } else {
        problems.push_back(strformat("%s: file %dx%d vs model %ldx%ld",
                                     name.c_str(), it->second.second.first,
                                     it->second.second.second, long(p.rows()),
                                     long(p.cols())));
      }
      return;
    }
    std::size_t base = it->second.first;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = typename std::decay_t<decltype(p)>::Scalar(raw.payload[base + i]);
    }
    report.loaded.push_back(name);
  });
  if (!problems.empty()) {
    std::string msg = "checkpoint manifest incompatible with model in " + path + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return report;
}

nlohmann::json read_checkpoint_config(const std::string& path,
                                      const std::string& magic);

}  // namespace stok::nn

#endif  // STOK_NN_HPP_
