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

#ifndef STOK_MODEL_HPP_
#define STOK_MODEL_HPP_

#include "stok/augment.hpp"
#include "stok/mtm.hpp"
#include "stok/nn.hpp"

namespace stok {

struct BackboneConfig {
  int grid_h = 8, grid_w = 8;
  int d_in = 0;  // codebook dim
  int num_classes = 0;
  int width = 192, heads = 3, depth = 6, mlp_ratio = 4;
  std::string stem = "conv4x4_overlap";  // or "conv2x2"
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static BackboneConfig from_json(const nlohmann::json& j);
};

// Mean-pooled ViT classifier over a token-embedding grid. Encoder
// parameter names match the MTM encoder so checkpoints transfer by name.
template <class S>
struct Classifier {
  BackboneConfig cfg;
  std::string codebook_id;

  nn::ConvStem<S> stem;
  nn::Tower<S> enc;
  nn::LayerNorm<S> enc_ln;
  nn::Linear<S> head;

  struct Cache {
    typename nn::ConvStem<S>::Cache cstem;
    typename nn::Tower<S>::Cache cenc;
    typename nn::LayerNorm<S>::Cache cencln;
    typename nn::Linear<S>::Cache chead;
    int np = 0;
  };

  void init(const BackboneConfig& c, const std::string& cb_id) {
    c.validate();
    cfg = c;
    codebook_id = cb_id;
    Rng rng = make_rng(derive_seed(c.seed, 0xc1a5));
    if (c.stem == "conv4x4_overlap") {
      stem.init(4, 2, 1, c.d_in, c.width, rng);
    } else {
      stem.init(2, 2, 0, c.d_in, c.width, rng);
    }
    enc.init(c.depth, c.width, c.heads, c.mlp_ratio, rng);
    enc_ln.init(c.width);
    head.init(c.width, c.num_classes, rng);
  }

  int patches_h() const { return stem.out_extent(cfg.grid_h); }
  int patches_w() const { return stem.out_extent(cfg.grid_w); }

  // Feature sequence after the final layer norm, plus the pooled feature.
  nn::Mat<S> features(const nn::Mat<S>& grid_emb, Cache* c) const {
    if (grid_emb.rows() != Eigen::Index(cfg.grid_h) * cfg.grid_w ||
        grid_emb.cols() != cfg.d_in) {
      throw DataError("classifier: embedding grid shape mismatch");
    }
    Cache local;
    Cache& cc = c ? *c : local;
    nn::Mat<S> x = stem.forward(grid_emb, cfg.grid_h, cfg.grid_w,
                                c ? &cc.cstem : nullptr);
    cc.np = int(x.rows());
    x += nn::posenc_2d<S>(patches_h(), patches_w(), cfg.width);
    return enc_ln.forward(enc.forward(x, c ? &cc.cenc : nullptr),
                          c ? &cc.cencln : nullptr);
  }

  nn::Mat<S> logits(const nn::Mat<S>& grid_emb, Cache* c) const {
    nn::Mat<S> seq = features(grid_emb, c);
    nn::Mat<S> pooled = seq.colwise().mean();
    return head.forward(pooled, c ? &c->chead : nullptr);
  }

  // Backward from d(logits) (1 x C), accumulating parameter gradients.
  void backward(const nn::Mat<S>& dlogits, Cache& c) {
    nn::Mat<S> dpooled = head.backward(dlogits, c.chead);
    nn::Mat<S> dseq(c.np, dpooled.cols());
    for (int i = 0; i < c.np; ++i) dseq.row(i) = dpooled.row(0) / S(c.np);
    nn::Mat<S> dx = enc.backward(enc_ln.backward(dseq, c.cencln), c.cenc);
    stem.backward(dx, c.cstem);
  }

  template <class F>
  void visit(F&& f) {
    stem.visit("stem", f);
    enc.visit("enc", f);
    enc_ln.visit("enc_ln", f);
    head.visit("head", f);
  }
};

// --- Datasets -----------------------------------------------------------------

struct TokenDataset {
  std::vector<TokenGrid> grids;
  std::vector<std::uint16_t> labels;
  int num_classes = 0;
  int grid_h = 0, grid_w = 0;

  static TokenDataset load(const std::string& tokens_path,
                           const std::string& labels_path, int num_classes);
};

// --- Training -----------------------------------------------------------------

struct TrainRecipe {
  int epochs = 30;
  int batch = 128;
  double lr = 1.5e-3;
  double weight_decay = 0.1;
  double warmup_epochs = 2;
  double label_smoothing = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::vector<std::string> metrics;  // "epoch,split,metric,value" lines
  double final_val_top1 = 0;
};

TrainResult train_supervised(Classifier<float>& model, const TokenDataset& train,
                             const TokenDataset& val, const Codebook& cb,
                             const TrainRecipe& recipe,
                             const TokenAugPipeline& pipeline);

double evaluate_top1(const Classifier<float>& model, const TokenDataset& data,
                     const Codebook& cb);

// Corrupt pixels, re-tokenize, evaluate. Returns accuracy per severity.
std::vector<double> evaluate_corrupt(const Classifier<float>& model,
                                     const LabeledImages& images,
                                     const Codebook& cb, int patch_size,
                                     CorruptKind kind,
                                     std::span<const int> severities,
                                     std::uint64_t seed);

// Name-based transfer from an MTM checkpoint: encoder blocks and final norm
// load; the stem and head re-initialize (reported in the returned list).
std::vector<std::string> init_from_mtm(Classifier<float>& model,
                                       const std::string& mtm_path,
                                       const Codebook& active);

void save_classifier(const std::string& path, Classifier<float>& model);
Classifier<float> load_classifier(const std::string& path, const Codebook& active);

}  // namespace stok

#endif  // STOK_MODEL_HPP_
