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

#include "stok/tokenadapt.hpp"

#include <algorithm>
#include <numeric>

namespace stok {

using json = nlohmann::json;

json TokenAdaptConfig::to_json() const {
  return json{{"dim", dim},
              {"heads", heads},
              {"K", K},
              {"mlp_ratio", mlp_ratio},
              {"seed", seed}};
}

TokenAdaptConfig TokenAdaptConfig::from_json(const json& j) {
  TokenAdaptConfig c;
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.K = j.at("K").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

int default_heads(int d) {
  for (int h = 4; h >= 1; --h) {
    if (d % h == 0) return h;
  }
  return 1;
}

TokenGrid apply_token_adapt(const TokenGrid& grid, const GeomAug& aug,
                            const TokenAdaptModule<float>& module,
                            const Codebook& cb, const TokenGrid* partner) {
  if (module.codebook_id != cb.id) {
    throw PrereqError("token adapt: module is bound to a different codebook");
  }
  EmbeddingGrid z = lookup(grid, cb);
  MatF s = module.convert(z.values, grid.h, grid.w, nullptr);
  MatF s_aug;
  if (aug.kind == GeomAug::Kind::kMixup) {
    if (partner == nullptr) throw DataError("token adapt: mixup needs a partner grid");
    if (partner->h != grid.h || partner->w != grid.w) {
      throw DataError("token adapt: partner grid shape mismatch");
    }
    EmbeddingGrid zp = lookup(*partner, cb);
    MatF sp = module.convert(zp.values, grid.h, grid.w, nullptr);
    s_aug = apply_geom_grid(s, grid.h, grid.w, aug, &sp);
  } else {
    s_aug = apply_geom_grid(s, grid.h, grid.w, aug);
  }
  MatF logits = module.reverse(s_aug, grid.h, grid.w, nullptr);
  TokenGrid out(grid.h, grid.w);
  out.label = grid.label;
  for (int i = 0; i < grid.n(); ++i) {
    int arg = 0;
    float best = logits(i, 0);
    for (int k = 1; k < module.cfg.K; ++k) {
      if (logits(i, k) > best) {
        best = logits(i, k);
        arg = k;
      }
    }
    out.idx[i] = arg;
  }
  return out;
}

TokenGrid apply_token_adapt(const TokenGrid& grid, const AugSpec& spec,
                            const TokenAdaptModule<float>& module,
                            const Codebook& cb, Rng& rng,
                            const TokenGrid* partner) {
  GeomAug aug = sample_geom_aug(spec, rng);
  return apply_token_adapt(grid, aug, module, cb, partner);
}

// --- Pair source ---------------------------------------------------------------

ImagePairSource::ImagePairSource(std::vector<Image> images, const Codebook& cb,
                                 int patch_size,
                                 std::vector<AugSpec> aug_distribution)
    : images_(std::move(images)),
      cb_(cb),
      patch_size_(patch_size),
      augs_(std::move(aug_distribution)) {
  if (images_.empty()) throw DataError("pair source: no images");
  if (augs_.empty()) throw DataError("pair source: empty augmentation set");
  for (const auto& spec : augs_) {
    spec.validate();
    if (spec.op == "cutmix" || spec.op == "color_adapt" ||
        spec.op == "emb_noise" || spec.op == "token_eda") {
      throw ConfigError("pair source: '" + spec.op + "' is not a geometric op");
    }
  }
  src_tokens_.reserve(images_.size());
  for (const auto& img : images_) {
    src_tokens_.push_back(tokenize_image(img, cb_, patch_size_));
  }
  grid_h_ = src_tokens_[0].h;
  grid_w_ = src_tokens_[0].w;
}

TokenPair ImagePairSource::sample(std::uint64_t index, Rng& rng) const {
  const std::size_t i = index % images_.size();
  std::uniform_int_distribution<std::size_t> pick(0, augs_.size() - 1);
  const AugSpec& spec = augs_[pick(rng)];
  GeomAug aug = sample_geom_aug(spec, rng);

  TokenPair pair;
  pair.src = src_tokens_[i];
  pair.aug = aug;
  if (aug.kind == GeomAug::Kind::kMixup) {
    std::uniform_int_distribution<std::size_t> pj(0, images_.size() - 1);
    std::size_t j = pj(rng);
    pair.partner = src_tokens_[j];
    pair.tgt = tokenize_image(pixel_mixup(images_[i], images_[j], aug.lambda),
                              cb_, patch_size_);
    return pair;
  }
  const bool param_free = aug.kind == GeomAug::Kind::kIdentity ||
                          aug.kind == GeomAug::Kind::kHflip;
  if (param_free) {
    std::uint64_t key = (std::uint64_t(i) << 2) | std::uint64_t(aug.kind);
    auto it = memo_.find(key);
    if (it != memo_.end()) {
      pair.tgt = it->second;
      return pair;
    }
    pair.tgt = tokenize_image(apply_geom_image(images_[i], aug), cb_, patch_size_);
    memo_.emplace(key, pair.tgt);
    return pair;
  }
  pair.tgt = tokenize_image(apply_geom_image(images_[i], aug), cb_, patch_size_);
  return pair;
}

// --- Training --------------------------------------------------------------------

TokenAdaptModule<float> train_token_adapt(const ImagePairSource& source,
                                          const Codebook& cb,
                                          const TokenAdaptTrainHyper& hyper,
                                          std::vector<std::string>* loss_log) {
  if (source.size() == 0) throw DataError("train_token_adapt: empty pair source");
  TokenAdaptConfig cfg;
  cfg.dim = cb.dim();
  cfg.heads = default_heads(cb.dim());
  cfg.K = cb.K();
  cfg.seed = hyper.seed;
  TokenAdaptModule<float> module;
  module.init(cfg, cb.id);

  nn::AdamW<float> opt;
  const int h = source.grid_h(), w = source.grid_w();
  const std::int64_t total = hyper.steps;
  const std::int64_t warmup = std::int64_t(hyper.warmup_frac * double(total));
  std::uint64_t pair_index = 0;
  for (std::int64_t step = 0; step < total; ++step) {
    nn::zero_grads(module);
    double batch_loss = 0;
    for (int b = 0; b < hyper.batch; ++b, ++pair_index) {
      Rng rng = make_rng(derive_seed(hyper.seed, 0x9a12, pair_index));
      TokenPair pair = source.sample(pair_index, rng);
      EmbeddingGrid z = lookup(pair.src, cb);
      MatF z_partner;
      const MatF* partner_ptr = nullptr;
      if (pair.partner) {
        z_partner = lookup(*pair.partner, cb).values;
        partner_ptr = &z_partner;
      }
      batch_loss += token_adapt_loss(module, z.values, h, w, pair.aug,
                                     partner_ptr, pair.tgt.idx, true);
    }
    batch_loss /= hyper.batch;
    nn::scale_grads(module, 1.0 / hyper.batch);
    double lr = nn::cosine_lr(hyper.lr, step, total, warmup);
    opt.step(module, lr, hyper.weight_decay);
    if (loss_log) {
      loss_log->push_back(strformat("%lld,%.6f", (long long)step, batch_loss));
    }
  }
  return module;
}

void save_token_adapt(const std::string& path, TokenAdaptModule<float>& module) {
  json config;
  config["kind"] = "token_adapt";
  config["config"] = module.cfg.to_json();
  config["codebook_id"] = module.codebook_id;
  nn::save_checkpoint(path, "STAM", config, module);
}

TokenAdaptModule<float> load_token_adapt(const std::string& path,
                                         const Codebook& active) {
  json config = nn::read_checkpoint_config(path, "STAM");
  TokenAdaptConfig cfg = TokenAdaptConfig::from_json(config.at("config"));
  std::string bound_id = config.at("codebook_id").get<std::string>();
  if (bound_id != active.id) {
    throw PrereqError(strformat(
        "token adapt module %s is bound to codebook %.12s..., active codebook "
        "is %.12s...",
        path.c_str(), bound_id.c_str(), active.id.c_str()));
  }
  if (cfg.dim != active.dim() || cfg.K != active.K()) {
    throw DataError("token adapt module dims do not match the active codebook");
  }
  TokenAdaptModule<float> module;
  module.init(cfg, bound_id);
  nn::load_checkpoint(path, "STAM", module);
  return module;
}

}  // namespace stok
