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
// Masked token modeling. A non-overlapping 2x2 conv stem embeds the token
// grid; a random subset of stem patches is dropped; the encoder sees only
// the visible patches; latents are padded back with a shared learned mask
// token; the decoder predicts the K-way token id of every token position.
// The loss covers masked positions only.

#ifndef STOK_MTM_HPP_
#define STOK_MTM_HPP_

#include "stok/codec.hpp"
#include "stok/nn.hpp"
#include "stok/tokenadapt.hpp"

namespace stok {

struct MaskSpec {
  double ratio = 0;
  int n = 0;
  std::vector<std::int32_t> masked;
  std::vector<std::int32_t> visible;
};

// Truncated normal via inverse CDF (the independent test oracle uses
// rejection sampling). std == 0 degenerates to clamp(mean).
double sample_mask_ratio(Rng& rng, double mean = 0.7, double std_dev = 0.25,
                         double lo = 0.4, double hi = 1.0);

// Uniform subset of round(ratio*n) masked positions; both index lists come
// back sorted ascending.
MaskSpec sample_mask(int n, double ratio, Rng& rng);

// Token-level mask induced by a stem-patch-level mask: each masked patch
// masks its sf x sf block of token positions.
MaskSpec expand_patch_mask(const MaskSpec& patch_spec, int sf, int hp, int wp);

template <class S>
struct ApplyMaskResult {
  nn::Mat<S> visible;                   // |visible| x d, in position order
  std::vector<std::int32_t> positions;  // grid positions of those rows
  MaskSpec spec;
};

template <class S>
ApplyMaskResult<S> apply_mask(const nn::Mat<S>& z, double ratio, Rng& rng) {
  if (ratio < 0 || ratio > 1) throw DataError("apply_mask: ratio outside [0,1]");
  ApplyMaskResult<S> out;
  out.spec = sample_mask(int(z.rows()), ratio, rng);
  out.positions.assign(out.spec.visible.begin(), out.spec.visible.end());
  out.visible.resize(Eigen::Index(out.positions.size()), z.cols());
  for (std::size_t i = 0; i < out.positions.size(); ++i) {
    out.visible.row(Eigen::Index(i)) = z.row(out.positions[i]);
  }
  return out;
}

struct MtmConfig {
  int grid_h = 8, grid_w = 8;  // token grid
  int d_in = 0;                // codebook dim
  int K = 0;
  int width = 192, heads = 3, depth = 6, dec_depth = 2, mlp_ratio = 4;
  int stem = 2;  // non-overlapping stem factor; MTM requires 2
  std::uint64_t seed = 0;

  int patches_h() const { return grid_h / stem; }
  int patches_w() const { return grid_w / stem; }
  int n_patches() const { return patches_h() * patches_w(); }

  nlohmann::json to_json() const;
  static MtmConfig from_json(const nlohmann::json& j);
  void validate() const;
};

template <class S>
struct MtmModel {
  MtmConfig cfg;
  std::string codebook_id;

  nn::ConvStem<S> stem;
  nn::Tower<S> enc;
  nn::LayerNorm<S> enc_ln;
  nn::Mat<S> mask_token, g_mask_token;  // 1 x width, shared learned vector
  nn::Tower<S> dec;
  nn::LayerNorm<S> dec_ln;
  nn::Linear<S> head;  // width -> stem^2 * K

  void init(const MtmConfig& c, const std::string& cb_id) {
    c.validate();
    cfg = c;
    codebook_id = cb_id;
    Rng rng = make_rng(derive_seed(c.seed, 0x313a));
    stem.init(c.stem, c.stem, 0, c.d_in, c.width, rng);
    enc.init(c.depth, c.width, c.heads, c.mlp_ratio, rng);
    enc_ln.init(c.width);
    mask_token.resize(1, c.width);
    nn::init_trunc_normal(mask_token, rng, 0.02);
    g_mask_token = nn::Mat<S>::Zero(1, c.width);
    dec.init(c.dec_depth, c.width, c.heads, c.mlp_ratio, rng);
    dec_ln.init(c.width);
    head.init(c.width, c.stem * c.stem * c.K, rng);
  }

  template <class F>
  void visit(F&& f) {
    stem.visit("stem", f);
    enc.visit("enc", f);
    enc_ln.visit("enc_ln", f);
    f("mask_token", mask_token, g_mask_token);
    dec.visit("dec", f);
    dec_ln.visit("dec_ln", f);
    head.visit("head", f);
  }

  struct Cache {
    typename nn::ConvStem<S>::Cache cstem;
    typename nn::Tower<S>::Cache cenc, cdec;
    typename nn::LayerNorm<S>::Cache cencln, cdecln;
    typename nn::Linear<S>::Cache chead;
    std::vector<std::int32_t> visible_order;
    int n_patches = 0;
  };
};

template <class S>
struct MtmForwardOut {
  nn::Mat<S> logits;  // (grid_h*grid_w) x K
  std::uint64_t encoder_flops = 0;
};

// Encoder consumes only the visible stem patches (gathered in the order
// given by spec.visible); the decoder sees the full padded sequence with
// positional encodings re-attached.
template <class S>
MtmForwardOut<S> mtm_forward(const MtmModel<S>& m, const nn::Mat<S>& grid_emb,
                             const MaskSpec& patch_spec,
                             typename MtmModel<S>::Cache* cache) {
  const MtmConfig& cfg = m.cfg;
  if (grid_emb.rows() != Eigen::Index(cfg.grid_h) * cfg.grid_w ||
      grid_emb.cols() != cfg.d_in) {
    throw DataError("mtm_forward: embedding grid shape mismatch");
  }
  const int np = cfg.n_patches();
  if (patch_spec.n != np) {
    throw DataError(strformat("mtm_forward: mask is over %d positions, model has %d",
                              patch_spec.n, np));
  }
  typename MtmModel<S>::Cache local;
  typename MtmModel<S>::Cache& c = cache ? *cache : local;
  c.n_patches = np;
  c.visible_order.assign(patch_spec.visible.begin(), patch_spec.visible.end());

  nn::Mat<S> x = m.stem.forward(grid_emb, cfg.grid_h, cfg.grid_w,
                                cache ? &c.cstem : nullptr);
  nn::Mat<S> pe = nn::posenc_2d<S>(cfg.patches_h(), cfg.patches_w(), cfg.width);
  x += pe;

  nn::Mat<S> vis(Eigen::Index(c.visible_order.size()), cfg.width);
  for (std::size_t i = 0; i < c.visible_order.size(); ++i) {
    vis.row(Eigen::Index(i)) = x.row(c.visible_order[i]);
  }
  std::uint64_t f0 = nn::flops::count();
  nn::Mat<S> latent = m.enc_ln.forward(
      m.enc.forward(vis, cache ? &c.cenc : nullptr), cache ? &c.cencln : nullptr);
  std::uint64_t enc_flops = nn::flops::count() - f0;

  nn::Mat<S> padded(np, cfg.width);
  for (int i = 0; i < np; ++i) padded.row(i) = m.mask_token.row(0);
  for (std::size_t i = 0; i < c.visible_order.size(); ++i) {
    padded.row(c.visible_order[i]) = latent.row(Eigen::Index(i));
  }
  padded += pe;

  nn::Mat<S> dec_out = m.dec_ln.forward(
      m.dec.forward(padded, cache ? &c.cdec : nullptr), cache ? &c.cdecln : nullptr);
  nn::Mat<S> patch_logits = m.head.forward(dec_out, cache ? &c.chead : nullptr);

  // Un-tile: patch row (py,px), offset (oy,ox) -> token (py*sf+oy, px*sf+ox).
  MtmForwardOut<S> out;
  out.encoder_flops = enc_flops;
  const int sf = cfg.stem;
  out.logits.resize(Eigen::Index(cfg.grid_h) * cfg.grid_w, cfg.K);
  for (int py = 0; py < cfg.patches_h(); ++py) {
    for (int px = 0; px < cfg.patches_w(); ++px) {
      auto row = patch_logits.row(py * cfg.patches_w() + px);
      for (int oy = 0; oy < sf; ++oy) {
        for (int ox = 0; ox < sf; ++ox) {
          int ty = py * sf + oy, tx = px * sf + ox;
          out.logits.row(ty * cfg.grid_w + tx) =
              row.segment((oy * sf + ox) * cfg.K, cfg.K);
        }
      }
    }
  }
  return out;
}

// Backward through the whole MTM path given d(logits). Accumulates
// parameter gradients (mask token included).
template <class S>
void mtm_backward(MtmModel<S>& m, const nn::Mat<S>& dlogits,
                  typename MtmModel<S>::Cache& c) {
  const MtmConfig& cfg = m.cfg;
  const int sf = cfg.stem;
  nn::Mat<S> dpatch(c.n_patches, sf * sf * cfg.K);
  for (int py = 0; py < cfg.patches_h(); ++py) {
    for (int px = 0; px < cfg.patches_w(); ++px) {
      auto row = dpatch.row(py * cfg.patches_w() + px);
      for (int oy = 0; oy < sf; ++oy) {
        for (int ox = 0; ox < sf; ++ox) {
          int ty = py * sf + oy, tx = px * sf + ox;
          row.segment((oy * sf + ox) * cfg.K, cfg.K) =
              dlogits.row(ty * cfg.grid_w + tx);
        }
      }
    }
  }
  nn::Mat<S> ddec = m.head.backward(dpatch, c.chead);
  nn::Mat<S> dpadded = m.dec.backward(m.dec_ln.backward(ddec, c.cdecln), c.cdec);

  // Split padded gradient: visible rows flow into the encoder, masked rows
  // into the shared mask token.
  std::vector<bool> is_visible(c.n_patches, false);
  for (std::int32_t v : c.visible_order) is_visible[v] = true;
  nn::Mat<S> dlatent(Eigen::Index(c.visible_order.size()), cfg.width);
  for (std::size_t i = 0; i < c.visible_order.size(); ++i) {
    dlatent.row(Eigen::Index(i)) = dpadded.row(c.visible_order[i]);
  }
  for (int i = 0; i < c.n_patches; ++i) {
    if (!is_visible[i]) m.g_mask_token.row(0) += dpadded.row(i);
  }
  nn::Mat<S> dvis =
      m.enc.backward(m.enc_ln.backward(dlatent, c.cencln), c.cenc);
  nn::Mat<S> dx = nn::Mat<S>::Zero(c.n_patches, cfg.width);
  for (std::size_t i = 0; i < c.visible_order.size(); ++i) {
    dx.row(c.visible_order[i]) = dvis.row(Eigen::Index(i));
  }
  m.stem.backward(dx, c.cstem);
}

// Mean cross entropy over masked token positions only; visible positions
// contribute exactly zero (their gradient rows are untouched zeros).
template <class S>
double mtm_loss(const nn::Mat<S>& logits, const TokenGrid& grid,
                const MaskSpec& token_spec,
                std::type_identity_t<nn::Mat<S>>* dlogits) {
  if (logits.rows() != Eigen::Index(grid.n())) {
    throw DataError("mtm_loss: logits do not cover every token position");
  }
  if (token_spec.masked.empty()) {
    throw DataError("mtm_loss: empty masked set");
  }
  return nn::softmax_ce(logits, grid.idx, token_spec.masked, dlogits);
}

// --- Pre-training ----------------------------------------------------------------

struct MtmTrainHyper {
  int epochs = 50;
  int batch = 128;
  double lr = 1e-3;
  double weight_decay = 0.05;
  double warmup_epochs = 5;
  double mask_mean = 0.7, mask_std = 0.25, mask_lo = 0.4, mask_hi = 1.0;
  std::uint64_t seed = 0;
};

// Runs the MTM loop over a packed token dataset. Appends
// "epoch,step,loss,ratio_mean" lines to loss_log. Optionally applies a
// geometric TokenAdapt augmentation to each grid before masking.
struct TokenAdaptGate {
  const TokenAdaptModule<float>* module = nullptr;
  std::vector<AugSpec> ops;
  double prob = 0.5;
};

MtmModel<float> mtm_pretrain(const std::vector<TokenGrid>& grids,
                             const Codebook& cb, const MtmConfig& cfg,
                             const MtmTrainHyper& hyper,
                             const TokenAdaptGate* aug,
                             std::vector<std::string>* loss_log);

// Masked-prediction top-1 accuracy over a held-out set.
double mtm_masked_top1(const MtmModel<float>& model,
                       const std::vector<TokenGrid>& grids, const Codebook& cb,
                       const MtmTrainHyper& hyper, std::uint64_t eval_seed);

void save_mtm(const std::string& path, MtmModel<float>& model);
MtmModel<float> load_mtm(const std::string& path, const Codebook& active);

}  // namespace stok

#endif  // STOK_MTM_HPP_
