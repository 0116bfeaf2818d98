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

#include "stok/mtm.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <numeric>

namespace stok {

using json = nlohmann::json;

double sample_mask_ratio(Rng& rng, double mean, double std_dev, double lo,
                         double hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 1.0)) {
    throw DataError(strformat("sample_mask_ratio: bad bounds [%g, %g]", lo, hi));
  }
  if (std_dev < 0) throw DataError("sample_mask_ratio: negative std");
  if (std_dev == 0) return std::clamp(mean, lo, hi);
  boost::math::normal_distribution<double> normal(mean, std_dev);
  double c_lo = boost::math::cdf(normal, lo);
  double c_hi = boost::math::cdf(normal, hi);
  std::uniform_real_distribution<double> uni(c_lo, c_hi);
  double u = uni(rng);
  double x = boost::math::quantile(normal, u);
  return std::clamp(x, lo, hi);
}

MaskSpec sample_mask(int n, double ratio, Rng& rng) {
  if (n <= 0) throw DataError("sample_mask: empty grid");
  if (ratio < 0 || ratio > 1) throw DataError("sample_mask: ratio outside [0,1]");
  int m = int(std::lround(ratio * n));
  m = std::clamp(m, 0, n);
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first m entries are a uniform subset.
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  MaskSpec spec;
  spec.ratio = ratio;
  spec.n = n;
  spec.masked.assign(order.begin(), order.begin() + m);
  spec.visible.assign(order.begin() + m, order.end());
  std::sort(spec.masked.begin(), spec.masked.end());
  std::sort(spec.visible.begin(), spec.visible.end());
  return spec;
}

MaskSpec expand_patch_mask(const MaskSpec& patch_spec, int sf, int hp, int wp) {
  if (patch_spec.n != hp * wp) {
    throw DataError("expand_patch_mask: patch count mismatch");
  }
  MaskSpec out;
  out.ratio = patch_spec.ratio;
  out.n = hp * wp * sf * sf;
  const int w_tok = wp * sf;
  auto expand = [&](const std::vector<std::int32_t>& in,
                    std::vector<std::int32_t>& dst) {
    for (std::int32_t p : in) {
      int py = p / wp, px = p % wp;
      for (int oy = 0; oy < sf; ++oy) {
        for (int ox = 0; ox < sf; ++ox) {
          dst.push_back((py * sf + oy) * w_tok + (px * sf + ox));
        }
      }
    }
    std::sort(dst.begin(), dst.end());
  };
  expand(patch_spec.masked, out.masked);
  expand(patch_spec.visible, out.visible);
  return out;
}

void MtmConfig::validate() const {
  if (stem != 2) {
    throw ConfigError("mtm: the stem must be the non-overlapping conv2x2");
  }
  if (grid_h % stem != 0 || grid_w % stem != 0) {
    throw ConfigError(strformat("mtm: grid %dx%d not divisible by stem %d",
                                grid_h, grid_w, stem));
  }
  if (d_in <= 0 || K < 2) throw ConfigError("mtm: missing d_in or K");
  if (width % heads != 0) throw ConfigError("mtm: width not divisible by heads");
  if (width % 4 != 0) throw ConfigError("mtm: width must be divisible by 4");
  if (depth < 1 || dec_depth < 1) throw ConfigError("mtm: empty tower");
}

json MtmConfig::to_json() const {
  return json{{"grid_h", grid_h},     {"grid_w", grid_w},
              {"d_in", d_in},         {"K", K},
              {"width", width},       {"heads", heads},
              {"depth", depth},       {"dec_depth", dec_depth},
              {"mlp_ratio", mlp_ratio}, {"stem", stem},
              {"seed", seed}};
}

MtmConfig MtmConfig::from_json(const json& j) {
  MtmConfig c;
  c.grid_h = j.at("grid_h").get<int>();
  c.grid_w = j.at("grid_w").get<int>();
  c.d_in = j.at("d_in").get<int>();
  c.K = j.at("K").get<int>();
  c.width = j.at("width").get<int>();
  c.heads = j.at("heads").get<int>();
  c.depth = j.at("depth").get<int>();
  c.dec_depth = j.at("dec_depth").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.stem = j.at("stem").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

TokenGrid maybe_token_adapt(const TokenGrid& grid, const TokenAdaptGate* aug,
                            const Codebook& cb, Rng& rng) {
  if (aug == nullptr || aug->module == nullptr || aug->ops.empty()) return grid;
  std::bernoulli_distribution gate(aug->prob);
  if (!gate(rng)) return grid;
  std::uniform_int_distribution<std::size_t> pick(0, aug->ops.size() - 1);
  return apply_token_adapt(grid, aug->ops[pick(rng)], *aug->module, cb, rng);
}

}  // namespace

MtmModel<float> mtm_pretrain(const std::vector<TokenGrid>& grids,
                             const Codebook& cb, const MtmConfig& cfg,
                             const MtmTrainHyper& hyper,
                             const TokenAdaptGate* aug,
                             std::vector<std::string>* loss_log) {
  if (grids.empty()) throw DataError("mtm_pretrain: empty dataset");
  if (cfg.d_in != cb.dim() || cfg.K != cb.K()) {
    throw DataError("mtm_pretrain: model config does not match the codebook");
  }
  for (const auto& g : grids) {
    if (g.h != cfg.grid_h || g.w != cfg.grid_w) {
      throw DataError("mtm_pretrain: grid shape does not match the config");
    }
  }
  MtmModel<float> model;
  model.init(cfg, cb.id);
  nn::AdamW<float> opt;

  const int n = int(grids.size());
  const int steps_per_epoch = (n + hyper.batch - 1) / hyper.batch;
  const std::int64_t total_steps = std::int64_t(steps_per_epoch) * hyper.epochs;
  const std::int64_t warmup_steps =
      std::int64_t(hyper.warmup_epochs * steps_per_epoch);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(derive_seed(hyper.seed, 0xe90c, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int start = 0; start < n; start += hyper.batch, ++step) {
      int len = std::min(hyper.batch, n - start);
      nn::zero_grads(model);
      double loss_sum = 0, ratio_sum = 0;
      for (int b = 0; b < len; ++b) {
        int gi = order[start + b];
        Rng rng = make_rng(derive_seed(hyper.seed, epoch, std::uint64_t(gi), 1));
        TokenGrid grid = maybe_token_adapt(grids[gi], aug, cb, rng);
        double ratio = sample_mask_ratio(rng, hyper.mask_mean, hyper.mask_std,
                                         hyper.mask_lo, hyper.mask_hi);
        MaskSpec patch_mask = sample_mask(cfg.n_patches(), ratio, rng);
        if (patch_mask.masked.empty()) continue;
        EmbeddingGrid z = lookup(grid, cb);
        typename MtmModel<float>::Cache cache;
        auto fwd = mtm_forward(model, z.values, patch_mask, &cache);
        MaskSpec token_mask =
            expand_patch_mask(patch_mask, cfg.stem, cfg.patches_h(), cfg.patches_w());
        MatF dlogits;
        loss_sum += mtm_loss(fwd.logits, grid, token_mask, &dlogits);
        ratio_sum += ratio;
        mtm_backward(model, dlogits, cache);
      }
      nn::scale_grads(model, 1.0 / len);
      double lr = nn::cosine_lr(hyper.lr, step, total_steps, warmup_steps);
      opt.step(model, lr, hyper.weight_decay);
      if (loss_log) {
        loss_log->push_back(strformat("%d,%lld,%.6f,%.4f", epoch,
                                      (long long)step, loss_sum / len,
                                      ratio_sum / len));
      }
    }
  }
  return model;
}

double mtm_masked_top1(const MtmModel<float>& model,
                       const std::vector<TokenGrid>& grids, const Codebook& cb,
                       const MtmTrainHyper& hyper, std::uint64_t eval_seed) {
  if (grids.empty()) throw DataError("mtm_masked_top1: empty dataset");
  const MtmConfig& cfg = model.cfg;
  std::uint64_t correct = 0, total = 0;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    Rng rng = make_rng(derive_seed(eval_seed, 0xe7a1, i));
    double ratio = sample_mask_ratio(rng, hyper.mask_mean, hyper.mask_std,
                                     hyper.mask_lo, hyper.mask_hi);
    MaskSpec patch_mask = sample_mask(cfg.n_patches(), ratio, rng);
    if (patch_mask.masked.empty()) continue;
    EmbeddingGrid z = lookup(grids[i], cb);
    auto fwd = mtm_forward<float>(model, z.values, patch_mask, nullptr);
    MaskSpec token_mask =
        expand_patch_mask(patch_mask, cfg.stem, cfg.patches_h(), cfg.patches_w());
    for (std::int32_t pos : token_mask.masked) {
      int arg = 0;
      float best = fwd.logits(pos, 0);
      for (int k = 1; k < cfg.K; ++k) {
        if (fwd.logits(pos, k) > best) {
          best = fwd.logits(pos, k);
          arg = k;
        }
      }
      correct += (arg == grids[i].idx[pos]);
      ++total;
    }
  }
  return double(correct) / double(total);
}

void save_mtm(const std::string& path, MtmModel<float>& model) {
  json config;
  config["kind"] = "mtm_encoder";
  config["config"] = model.cfg.to_json();
  config["codebook_id"] = model.codebook_id;
  nn::save_checkpoint(path, "SMTM", config, model);
}

MtmModel<float> load_mtm(const std::string& path, const Codebook& active) {
  json config = nn::read_checkpoint_config(path, "SMTM");
  MtmConfig cfg = MtmConfig::from_json(config.at("config"));
  std::string bound = config.at("codebook_id").get<std::string>();
  if (bound != active.id) {
    throw PrereqError("mtm checkpoint " + path +
                      " is bound to a different codebook");
  }
  MtmModel<float> model;
  model.init(cfg, bound);
  nn::load_checkpoint(path, "SMTM", model);
  return model;
}

}  // namespace stok
