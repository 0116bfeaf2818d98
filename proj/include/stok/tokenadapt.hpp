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
// Learned token augmentation: a conversion block f maps token embeddings
// into an augmentation-compatible feature space, the geometric op runs
// there, and a reverse block g maps back to per-position codeword logits.
// The augmented grid is the position-wise argmax re-quantized onto the
// codebook.

#ifndef STOK_TOKENADAPT_HPP_
#define STOK_TOKENADAPT_HPP_

#include <functional>
#include <optional>
#include <unordered_map>

#include "stok/augment.hpp"
#include "stok/codec.hpp"
#include "stok/nn.hpp"

namespace stok {

struct TokenAdaptConfig {
  int dim = 0;  // matches the codebook dimension
  int heads = 4;
  int K = 0;
  int mlp_ratio = 4;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TokenAdaptConfig from_json(const nlohmann::json& j);
};

// Largest head count <= 4 dividing d.
int default_heads(int d);

template <class S>
struct TokenAdaptModule {
  TokenAdaptConfig cfg;
  std::string codebook_id;

  nn::Block<S> f_block;
  nn::LayerNorm<S> f_ln;
  nn::Block<S> g_block;
  nn::LayerNorm<S> g_ln;
  nn::Linear<S> g_head;  // dim -> K

  struct Cache {
    typename nn::Block<S>::Cache cf, cg;
    typename nn::LayerNorm<S>::Cache cfln, cgln;
    typename nn::Linear<S>::Cache chead;
  };

  void init(const TokenAdaptConfig& c, const std::string& cb_id) {
    if (c.dim <= 0 || c.K < 2) throw DataError("token adapt: bad config");
    if (c.dim % c.heads != 0) {
      throw DataError(strformat("token adapt: dim %d not divisible by %d heads",
                                c.dim, c.heads));
    }
    cfg = c;
    codebook_id = cb_id;
    Rng rng = make_rng(derive_seed(c.seed, 0x7a11));
    f_block.init(c.dim, c.heads, c.mlp_ratio, rng);
    f_ln.init(c.dim);
    g_block.init(c.dim, c.heads, c.mlp_ratio, rng);
    g_ln.init(c.dim);
    g_head.init(c.dim, c.K, rng);
  }

  // S_T = f(Z_T): one transformer block over the grid with fixed 2-D
  // positional encoding, then a layer norm.
  nn::Mat<S> convert(const nn::Mat<S>& z, int h, int w, Cache* c) const {
    if (z.rows() != Eigen::Index(h) * w || z.cols() != cfg.dim) {
      throw DataError(strformat(
          "token adapt convert: input %ldx%ld does not match grid %dx%d dim %d",
          long(z.rows()), long(z.cols()), h, w, cfg.dim));
    }
    nn::Mat<S> x = z + nn::posenc_2d<S>(h, w, cfg.dim);
    return f_ln.forward(f_block.forward(x, c ? &c->cf : nullptr),
                        c ? &c->cfln : nullptr);
  }

  nn::Mat<S> convert_backward(const nn::Mat<S>& ds, Cache& c) {
    return f_block.backward(f_ln.backward(ds, c.cfln), c.cf);
  }

  // Per-position K-way logits from augmentation-space features.
  nn::Mat<S> reverse(const nn::Mat<S>& s, int h, int w, Cache* c) const {
    if (s.rows() != Eigen::Index(h) * w || s.cols() != cfg.dim) {
      throw DataError("token adapt reverse: shape mismatch");
    }
    nn::Mat<S> x = s + nn::posenc_2d<S>(h, w, cfg.dim);
    nn::Mat<S> y = g_ln.forward(g_block.forward(x, c ? &c->cg : nullptr),
                                c ? &c->cgln : nullptr);
    return g_head.forward(y, c ? &c->chead : nullptr);
  }

  nn::Mat<S> reverse_backward(const nn::Mat<S>& dlogits, Cache& c) {
    nn::Mat<S> dy = g_head.backward(dlogits, c.chead);
    return g_block.backward(g_ln.backward(dy, c.cgln), c.cg);
  }

  template <class F>
  void visit(F&& f) {
    f_block.visit("f.block", f);
    f_ln.visit("f.ln", f);
    g_block.visit("g.block", f);
    g_ln.visit("g.ln", f);
    g_head.visit("g.head", f);
  }
};

// Eq.-style application path: lookup -> f -> A in S-space -> g -> argmax.
// The argmax indices are the quantized output (the predicted embeddings are
// codebook rows, so re-quantizing them is the identity on indices).
TokenGrid apply_token_adapt(const TokenGrid& grid, const GeomAug& aug,
                            const TokenAdaptModule<float>& module,
                            const Codebook& cb,
                            const TokenGrid* partner = nullptr);

// Spec-driven overload: samples the concrete geometric parameters from
// `spec` with `rng`, then applies. Non-geometric specs are an error.
TokenGrid apply_token_adapt(const TokenGrid& grid, const AugSpec& spec,
                            const TokenAdaptModule<float>& module,
                            const Codebook& cb, Rng& rng,
                            const TokenGrid* partner = nullptr);

// Cross entropy of g(A(f(z_src))) against the target token indices, over
// all positions. Accumulates parameter gradients when backprop is set.
template <class S>
double token_adapt_loss(TokenAdaptModule<S>& m, const nn::Mat<S>& z_src, int h,
                        int w, const GeomAug& aug,
                        const nn::Mat<S>* z_partner,
                        std::span<const std::int32_t> target_idx,
                        bool backprop) {
  typename TokenAdaptModule<S>::Cache cache;
  typename TokenAdaptModule<S>::Cache partner_cache;
  nn::Mat<S> s = m.convert(z_src, h, w, backprop ? &cache : nullptr);
  nn::Mat<S> s_aug;
  nn::Mat<S> s_partner;
  if (aug.kind == GeomAug::Kind::kMixup) {
    if (z_partner == nullptr) throw DataError("token_adapt_loss: mixup needs a partner");
    s_partner = m.convert(*z_partner, h, w, backprop ? &partner_cache : nullptr);
    s_aug = apply_geom_grid(s, h, w, aug, &s_partner);
  } else {
    s_aug = apply_geom_grid(s, h, w, aug);
  }
  nn::Mat<S> logits = m.reverse(s_aug, h, w, backprop ? &cache : nullptr);
  std::vector<std::int32_t> rows(std::size_t(h) * w);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = std::int32_t(i);
  nn::Mat<S> dlogits;
  double loss = nn::softmax_ce(logits, target_idx, rows,
                               backprop ? &dlogits : nullptr);
  if (backprop) {
    nn::Mat<S> ds_aug = m.reverse_backward(dlogits, cache);
    if (aug.kind == GeomAug::Kind::kMixup) {
      nn::Mat<S> ds = ds_aug * S(aug.lambda);
      nn::Mat<S> ds_p = ds_aug * S(1.0 - aug.lambda);
      m.convert_backward(ds, cache);
      m.convert_backward(ds_p, partner_cache);
    } else {
      GeomMap map = build_geom_map(h, w, aug, false);
      nn::Mat<S> ds = geom_map_backward(map, ds_aug);
      m.convert_backward(ds, cache);
    }
  }
  return loss;
}

// --- Training ----------------------------------------------------------------

struct TokenPair {
  TokenGrid src;
  TokenGrid tgt;
  GeomAug aug;
  std::optional<TokenGrid> partner;  // mixup source
};

// Generates (T_x, T_A(x)) pairs on the fly: tokenize(x) and
// tokenize(A(x)) with A drawn from the configured distribution. Source
// tokens and targets of parameter-free ops are memoized.
class ImagePairSource {
 public:
  ImagePairSource(std::vector<Image> images, const Codebook& cb, int patch_size,
                  std::vector<AugSpec> aug_distribution);

  TokenPair sample(std::uint64_t index, Rng& rng) const;
  std::size_t size() const { return images_.size(); }
  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }

 private:
  std::vector<Image> images_;
  const Codebook& cb_;
  int patch_size_;
  int grid_h_ = 0, grid_w_ = 0;
  std::vector<AugSpec> augs_;
  std::vector<TokenGrid> src_tokens_;
  mutable std::unordered_map<std::uint64_t, TokenGrid> memo_;  // param-free targets
};

struct TokenAdaptTrainHyper {
  int steps = 200;    // one epoch-equivalent over the pair stream
  int batch = 128;
  double lr = 1e-3;
  double weight_decay = 0.05;
  double warmup_frac = 0.05;
  std::uint64_t seed = 0;
};

// Minimizes the cross entropy between g's per-position logits and the
// target token indices. Emits "step,loss" lines into loss_log if given.
TokenAdaptModule<float> train_token_adapt(const ImagePairSource& source,
                                          const Codebook& cb,
                                          const TokenAdaptTrainHyper& hyper,
                                          std::vector<std::string>* loss_log);

// Checkpoint container, magic "STAM". Loading validates the codebook
// binding: a module saved against a different codebook is rejected.
void save_token_adapt(const std::string& path, TokenAdaptModule<float>& module);
TokenAdaptModule<float> load_token_adapt(const std::string& path,
                                         const Codebook& active);

}  // namespace stok

#endif  // STOK_TOKENADAPT_HPP_
