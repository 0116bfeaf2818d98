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

#include "stok/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stok {

using json = nlohmann::json;

const double kNoiseStd[5] = {0.08, 0.12, 0.18, 0.26, 0.38};
const double kBlurSigma[5] = {1.0, 2.0, 3.0, 4.0, 6.0};

namespace {

const std::set<std::string>& known_ops() {
  static const std::set<std::string> ops = {
      "hflip",      "rrc",       "affine",    "mixup",   "cutmix",
      "color_adapt", "emb_noise", "token_eda", "identity"};
  return ops;
}

}  // namespace

void AugSpec::validate() const {
  if (!known_ops().count(op)) throw ConfigError("augment: unknown op '" + op + "'");
  if (p < 0 || p > 1) throw ConfigError("augment: probability outside [0,1] for op " + op);
  if (op == "rrc") {
    if (!(scale_lo > 0 && scale_lo <= scale_hi && scale_hi <= 1)) {
      throw ConfigError("augment: rrc scale range must lie in (0, 1]");
    }
  }
  if (op == "emb_noise" && std_dev < 0) {
    throw ConfigError("augment: emb_noise std must be >= 0");
  }
  if (op == "color_adapt" && eps <= 0) {
    throw ConfigError("augment: color_adapt eps must be > 0");
  }
  if (op == "mixup" && mixup_alpha <= 0) {
    throw ConfigError("augment: mixup alpha must be > 0");
  }
  if (op == "affine" && (degrees < 0 || translate < 0 || shear < 0)) {
    throw ConfigError("augment: affine magnitudes must be >= 0");
  }
}

json AugSpec::to_json() const {
  json j;
  j["op"] = op;
  j["p"] = p;
  if (op == "rrc") {
    j["scale_lo"] = scale_lo;
    j["scale_hi"] = scale_hi;
  } else if (op == "affine") {
    j["degrees"] = degrees;
    j["translate"] = translate;
    j["shear"] = shear;
  } else if (op == "mixup") {
    j["mixup_alpha"] = mixup_alpha;
  } else if (op == "emb_noise") {
    j["std"] = std_dev;
  } else if (op == "color_adapt") {
    j["eps"] = eps;
  }
  return j;
}

AugSpec AugSpec::from_json(const json& j) {
  static const std::set<std::string> keys = {
      "op",       "p",           "scale_lo", "scale_hi", "degrees",
      "translate", "shear",      "mixup_alpha", "std",   "eps"};
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) {
      throw ConfigError("augment: unknown key '" + key + "' in op spec");
    }
  }
  AugSpec s;
  if (!j.contains("op")) throw ConfigError("augment: op spec missing 'op'");
  s.op = j["op"].get<std::string>();
  if (j.contains("p")) s.p = j["p"].get<double>();
  if (j.contains("scale_lo")) s.scale_lo = j["scale_lo"].get<double>();
  if (j.contains("scale_hi")) s.scale_hi = j["scale_hi"].get<double>();
  if (j.contains("degrees")) s.degrees = j["degrees"].get<double>();
  if (j.contains("translate")) s.translate = j["translate"].get<double>();
  if (j.contains("shear")) s.shear = j["shear"].get<double>();
  if (j.contains("mixup_alpha")) s.mixup_alpha = j["mixup_alpha"].get<double>();
  if (j.contains("std")) s.std_dev = j["std"].get<double>();
  if (j.contains("eps")) s.eps = j["eps"].get<double>();
  s.validate();
  return s;
}

ChannelStats channel_stats(const EmbeddingGrid& z) {
  ChannelStats s;
  const int d = z.d();
  const int n = z.n();
  s.mu.resize(d);
  s.sigma.resize(d);
  // Two-pass per channel.
  for (int c = 0; c < d; ++c) {
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += double(z.values(i, c));
    double mu = sum / n;
    double var = 0;
    for (int i = 0; i < n; ++i) {
      double dd = double(z.values(i, c)) - mu;
      var += dd * dd;
    }
    s.mu(c) = mu;
    s.sigma(c) = std::sqrt(var / n);
  }
  return s;
}

EmbeddingGrid color_adapt(const EmbeddingGrid& z1, const EmbeddingGrid& z2,
                          double eps) {
  if (z1.d() != z2.d()) {
    throw DataError(strformat("color_adapt: channel dims differ (%d vs %d)",
                              z1.d(), z2.d()));
  }
  if (eps <= 0) throw DataError("color_adapt: eps must be > 0");
  ChannelStats s1 = channel_stats(z1);
  ChannelStats s2 = channel_stats(z2);
  EmbeddingGrid out;
  out.h = z1.h;
  out.w = z1.w;
  out.values.resize(z1.n(), z1.d());
  for (int c = 0; c < z1.d(); ++c) {
    double gain = s2.sigma(c) / (s1.sigma(c) + eps);
    double shift = s2.mu(c);
    for (int i = 0; i < z1.n(); ++i) {
      out.values(i, c) =
          float((double(z1.values(i, c)) - s1.mu(c)) * gain + shift);
    }
  }
  return out;
}

EmbeddingGrid emb_noise(const EmbeddingGrid& z, double std_dev, Rng& rng) {
  if (std_dev < 0) throw DataError("emb_noise: std must be >= 0");
  EmbeddingGrid out = z;
  if (std_dev == 0) return out;
  std::normal_distribution<float> dist(0.f, float(std_dev));
  for (int i = 0; i < out.n(); ++i) {
    for (int c = 0; c < out.d(); ++c) out.values(i, c) += dist(rng);
  }
  return out;
}

GeomAug sample_token_rrc(double lo, double hi, Rng& rng) {
  if (!(lo > 0 && lo <= hi && hi <= 1)) {
    throw DataError("token_rrc: scale range must lie in (0, 1]");
  }
  std::uniform_real_distribution<double> area(lo, hi);
  double side = std::sqrt(area(rng));
  GeomAug aug;
  aug.kind = GeomAug::Kind::kRrc;
  aug.hf = side;
  aug.wf = side;
  std::uniform_real_distribution<double> off(0.0, 1.0);
  aug.y0 = off(rng) * (1.0 - side);
  aug.x0 = off(rng) * (1.0 - side);
  return aug;
}

MatF token_rrc_onehot(const MatF& onehot, int h, int w, double lo, double hi,
                      Rng& rng) {
  GeomAug aug = sample_token_rrc(lo, hi, rng);
  return apply_geom_grid(onehot, h, w, aug, nullptr, /*nearest=*/true);
}

EmbeddingGrid token_rrc(const EmbeddingGrid& z, double lo, double hi, Rng& rng) {
  GeomAug aug = sample_token_rrc(lo, hi, rng);
  EmbeddingGrid out;
  out.h = z.h;
  out.w = z.w;
  out.values = apply_geom_grid(z.values, z.h, z.w, aug, nullptr, false);
  return out;
}

CutmixResult token_cutmix_box(const EmbeddingGrid& za, const Eigen::VectorXf& ya,
                              const EmbeddingGrid& zb, const Eigen::VectorXf& yb,
                              int y_lo, int y_hi, int x_lo, int x_hi) {
  if (za.h != zb.h || za.w != zb.w || za.d() != zb.d()) {
    throw DataError("token_cutmix: shape mismatch");
  }
  if (ya.size() != yb.size()) throw DataError("token_cutmix: label size mismatch");
  const int h = za.h, w = za.w;
  CutmixResult res;
  res.mixed = za;
  for (int y = y_lo; y < y_hi; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      res.mixed.values.row(y * w + x) = zb.values.row(y * w + x);
    }
  }
  double box = double(std::max(0, y_hi - y_lo)) * double(std::max(0, x_hi - x_lo));
  res.lambda = 1.0 - box / (double(h) * w);
  res.label = float(res.lambda) * ya + float(1.0 - res.lambda) * yb;
  return res;
}

CutmixResult token_cutmix(const EmbeddingGrid& za, const Eigen::VectorXf& ya,
                          const EmbeddingGrid& zb, const Eigen::VectorXf& yb,
                          Rng& rng) {
  const int h = za.h, w = za.w;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double lam = uni(rng);  // Beta(1,1)
  double cut = std::sqrt(1.0 - lam);
  int bh = int(std::lround(h * cut));
  int bw = int(std::lround(w * cut));
  std::uniform_int_distribution<int> cy_dist(0, h - 1), cx_dist(0, w - 1);
  int cy = cy_dist(rng), cx = cx_dist(rng);
  int y_lo = std::clamp(cy - bh / 2, 0, h);
  int y_hi = std::clamp(cy - bh / 2 + bh, 0, h);
  int x_lo = std::clamp(cx - bw / 2, 0, w);
  int x_hi = std::clamp(cx - bw / 2 + bw, 0, w);
  return token_cutmix_box(za, ya, zb, yb, y_lo, y_hi, x_lo, x_hi);
}

TokenGrid token_eda_swap(const TokenGrid& grid, double p, Rng& rng) {
  if (p < 0 || p > 1) throw DataError("token_eda_swap: p outside [0,1]");
  TokenGrid out = grid;
  if (p == 0) return out;
  std::bernoulli_distribution flip(p);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      if (!flip(rng)) continue;
      int dy[4] = {-1, 1, 0, 0};
      int dx[4] = {0, 0, -1, 1};
      int choices[4];
      int n = 0;
      for (int k = 0; k < 4; ++k) {
        int ny = y + dy[k], nx = x + dx[k];
        if (ny >= 0 && ny < out.h && nx >= 0 && nx < out.w) choices[n++] = k;
      }
      if (n == 0) continue;  // 1x1 grid
      std::uniform_int_distribution<int> pick(0, n - 1);
      int k = choices[pick(rng)];
      std::swap(out.at(y, x), out.at(y + dy[k], x + dx[k]));
    }
  }
  return out;
}

// --- Pixel ops ---------------------------------------------------------------

Image hflip(const Image& img) {
  Image out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
    }
  }
  return out;
}

TokenGrid hflip_grid(const TokenGrid& grid) {
  TokenGrid out = grid;
  for (int y = 0; y < grid.h; ++y) {
    for (int x = 0; x < grid.w; ++x) out.at(y, x) = grid.at(y, grid.w - 1 - x);
  }
  return out;
}

Image pixel_mixup(const Image& a, const Image& b, double lambda) {
  if (a.h != b.h || a.w != b.w) throw DataError("mixup: image shape mismatch");
  if (lambda < 0 || lambda > 1) throw DataError("mixup: lambda outside [0,1]");
  Image out(a.h, a.w);
  for (std::size_t i = 0; i < out.pix.size(); ++i) {
    out.pix[i] = float(lambda * a.pix[i] + (1.0 - lambda) * b.pix[i]);
  }
  return out;
}

Image pixel_brightness(const Image& img, double delta) {
  Image out = img;
  for (auto& v : out.pix) v = std::clamp(v + float(delta), 0.f, 1.f);
  return out;
}

Image pixel_contrast(const Image& img, double factor) {
  if (factor < 0) throw DataError("contrast: factor must be >= 0");
  Image out = img;
  for (auto& v : out.pix) {
    v = std::clamp(0.5f + float(factor) * (v - 0.5f), 0.f, 1.f);
  }
  return out;
}

Image apply_geom_image(const Image& img, const GeomAug& aug,
                       const Image* partner) {
  if (aug.kind == GeomAug::Kind::kIdentity) return img;
  if (aug.kind == GeomAug::Kind::kHflip) return hflip(img);
  if (aug.kind == GeomAug::Kind::kMixup) {
    if (partner == nullptr) throw DataError("mixup: missing partner image");
    return pixel_mixup(img, *partner, aug.lambda);
  }
  // Shared bilinear resampler over the pixel grid, channels as columns.
  MatF grid(img.h * img.w, 3);
  for (int i = 0; i < img.h * img.w; ++i) {
    for (int c = 0; c < 3; ++c) grid(i, c) = img.pix[std::size_t(i) * 3 + c];
  }
  MatF warped = apply_geom_grid(grid, img.h, img.w, aug, nullptr, false);
  Image out(img.h, img.w);
  for (int i = 0; i < img.h * img.w; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.pix[std::size_t(i) * 3 + c] = std::clamp(warped(i, c), 0.f, 1.f);
    }
  }
  return out;
}

GeomAug sample_geom_aug(const AugSpec& spec, Rng& rng) {
  spec.validate();
  GeomAug aug;
  if (spec.op == "identity") {
    return aug;
  } else if (spec.op == "hflip") {
    aug.kind = GeomAug::Kind::kHflip;
  } else if (spec.op == "rrc") {
    aug = sample_token_rrc(spec.scale_lo, spec.scale_hi, rng);
  } else if (spec.op == "affine") {
    aug.kind = GeomAug::Kind::kAffine;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    aug.deg = u(rng) * spec.degrees;
    aug.tx = u(rng) * spec.translate;
    aug.ty = u(rng) * spec.translate;
    aug.shear_x = u(rng) * spec.shear;
    aug.shear_y = u(rng) * spec.shear;
  } else if (spec.op == "mixup") {
    aug.kind = GeomAug::Kind::kMixup;
    std::gamma_distribution<double> gamma(spec.mixup_alpha, 1.0);
    double a = gamma(rng);
    double b = gamma(rng);
    aug.lambda = (a + b) > 0 ? a / (a + b) : 0.5;
  } else {
    throw DataError("sample_geom_aug: '" + spec.op + "' is not a geometric op");
  }
  return aug;
}

Image pixel_aug(const Image& img, const AugSpec& spec, Rng& rng,
                const Image* partner) {
  spec.validate();
  std::bernoulli_distribution gate(spec.p);
  if (!gate(rng)) return img;
  GeomAug aug = sample_geom_aug(spec, rng);
  return apply_geom_image(img, aug, partner);
}

CorruptKind corrupt_kind_from_name(const std::string& name) {
  if (name == "gaussian_noise") return CorruptKind::kGaussianNoise;
  if (name == "gaussian_blur") return CorruptKind::kGaussianBlur;
  throw DataError("corrupt: unknown kind '" + name + "'");
}

namespace {

Image gaussian_blur(const Image& img, double sigma) {
  int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;
  Image tmp(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] *
                 img.at(y, detail::reflect101(x + i, img.w), c);
        }
        tmp.at(y, x, c) = float(acc);
      }
    }
  }
  Image out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] *
                 tmp.at(detail::reflect101(y + i, img.h), x, c);
        }
        out.at(y, x, c) = std::clamp(float(acc), 0.f, 1.f);
      }
    }
  }
  return out;
}

}  // namespace

Image corrupt(const Image& img, CorruptKind kind, int severity, Rng& rng) {
  if (severity < 1 || severity > 5) {
    throw DataError(strformat("corrupt: severity %d outside {1..5}", severity));
  }
  if (kind == CorruptKind::kGaussianNoise) {
    std::normal_distribution<float> dist(0.f, float(kNoiseStd[severity - 1]));
    Image out = img;
    for (auto& v : out.pix) v = std::clamp(v + dist(rng), 0.f, 1.f);
    return out;
  }
  return gaussian_blur(img, kBlurSigma[severity - 1]);
}

// --- Pipeline ----------------------------------------------------------------

TokenAugPipeline::TokenAugPipeline(std::vector<AugSpec> specs) {
  Stage cur = Stage::kToken;
  for (auto& spec : specs) {
    spec.validate();
    Stage req;
    if (spec.op == "identity") {
      req = cur;
    } else if (spec.op == "token_eda") {
      req = Stage::kToken;
    } else if (spec.op == "rrc" && cur <= Stage::kOneHot) {
      req = Stage::kOneHot;
    } else if (spec.op == "hflip" || spec.op == "affine" ||
               spec.op == "mixup" || spec.op == "rrc") {
      req = Stage::kTokenAdapt;
      needs_ta_ = true;
    } else {  // cutmix, color_adapt, emb_noise
      req = Stage::kEmbed;
    }
    if (req < cur) {
      throw ConfigError(strformat(
          "augment pipeline: op '%s' must come earlier (token ops, then "
          "one-hot rrc, then TokenAdapt ops, then embedding ops)",
          spec.op.c_str()));
    }
    cur = std::max(cur, req);
    steps_.push_back({std::move(spec), req});
  }
}

AugBatchOut TokenAugPipeline::apply(
    const AugBatch& batch, const Codebook& cb, std::uint64_t seed,
    std::uint64_t epoch, std::span<const std::uint64_t> sample_index) const {
  const std::size_t B = batch.tokens.size();
  if (sample_index.size() != B) {
    throw DataError("pipeline: sample_index size mismatch");
  }
  if (needs_ta_ && !ta_fn_) {
    throw PrereqError(
        "augment pipeline: pixel-style ops configured but no TokenAdapt "
        "module bound");
  }
  const int h = batch.h, w = batch.w, n = h * w;
  const int K = cb.K();

  std::vector<Rng> rngs;
  rngs.reserve(B);
  for (std::size_t i = 0; i < B; ++i) {
    rngs.push_back(make_rng(derive_seed(seed, epoch, sample_index[i], 0xa06)));
  }

  std::vector<TokenGrid> tokens = batch.tokens;
  AugBatchOut out;
  out.labels = batch.labels;

  std::size_t s = 0;
  for (; s < steps_.size() && steps_[s].stage == Stage::kToken; ++s) {
    const AugSpec& spec = steps_[s].spec;
    if (spec.op != "token_eda") continue;
    for (std::size_t i = 0; i < B; ++i) {
      tokens[i] = token_eda_swap(tokens[i], spec.p, rngs[i]);
    }
  }
  // One-hot stage: materialize, resample rows, recover indices.
  bool any_onehot = s < steps_.size() && steps_[s].stage == Stage::kOneHot;
  if (any_onehot) {
    std::vector<MatF> onehot(B);
    for (std::size_t i = 0; i < B; ++i) {
      onehot[i] = MatF::Zero(n, K);
      for (int j = 0; j < n; ++j) onehot[i](j, tokens[i].idx[j]) = 1.f;
    }
    for (; s < steps_.size() && steps_[s].stage == Stage::kOneHot; ++s) {
      const AugSpec& spec = steps_[s].spec;
      if (spec.op == "identity") continue;
      for (std::size_t i = 0; i < B; ++i) {
        std::bernoulli_distribution gate(spec.p);
        if (!gate(rngs[i])) continue;
        onehot[i] = token_rrc_onehot(onehot[i], h, w, spec.scale_lo,
                                     spec.scale_hi, rngs[i]);
      }
    }
    for (std::size_t i = 0; i < B; ++i) {
      for (int j = 0; j < n; ++j) {
        int arg = 0;
        onehot[i].row(j).maxCoeff(&arg);
        tokens[i].idx[j] = arg;
      }
    }
  }
  // TokenAdapt-routed pixel-style ops on token grids.
  for (; s < steps_.size() && steps_[s].stage == Stage::kTokenAdapt; ++s) {
    const AugSpec& spec = steps_[s].spec;
    if (spec.op == "identity") continue;
    std::vector<TokenGrid> snapshot;
    if (spec.op == "mixup") snapshot = tokens;
    for (std::size_t i = 0; i < B; ++i) {
      std::bernoulli_distribution gate(spec.p);
      if (!gate(rngs[i])) continue;
      GeomAug aug = sample_geom_aug(spec, rngs[i]);
      if (aug.kind == GeomAug::Kind::kMixup) {
        std::uniform_int_distribution<std::size_t> pick(0, B - 1);
        std::size_t j = pick(rngs[i]);
        tokens[i] = ta_fn_(tokens[i], aug, &snapshot[j]);
        out.labels.row(i) = float(aug.lambda) * out.labels.row(i) +
                            float(1.0 - aug.lambda) * out.labels.row(Eigen::Index(j));
      } else {
        tokens[i] = ta_fn_(tokens[i], aug, nullptr);
      }
    }
  }
  // Embed: one-hot x codebook matrix product.
  out.emb.resize(B);
  for (std::size_t i = 0; i < B; ++i) {
    MatF oh = MatF::Zero(n, K);
    for (int j = 0; j < n; ++j) oh(j, tokens[i].idx[j]) = 1.f;
    out.emb[i].noalias() = oh * cb.entries;
  }
  // Embedding-space ops.
  for (; s < steps_.size(); ++s) {
    const AugSpec& spec = steps_[s].spec;
    if (spec.op == "identity") continue;
    std::vector<MatF> snapshot;
    if (spec.op == "cutmix" || spec.op == "color_adapt") snapshot = out.emb;
    MatF label_snapshot = out.labels;
    for (std::size_t i = 0; i < B; ++i) {
      std::bernoulli_distribution gate(spec.p);
      if (!gate(rngs[i])) continue;
      if (spec.op == "emb_noise") {
        if (spec.std_dev == 0) continue;
        std::normal_distribution<float> dist(0.f, float(spec.std_dev));
        for (int r = 0; r < out.emb[i].rows(); ++r) {
          for (int c = 0; c < out.emb[i].cols(); ++c) {
            out.emb[i](r, c) += dist(rngs[i]);
          }
        }
      } else if (spec.op == "color_adapt") {
        std::uniform_int_distribution<std::size_t> pick(0, B - 1);
        std::size_t j = pick(rngs[i]);
        EmbeddingGrid z1{h, w, out.emb[i]};
        EmbeddingGrid z2{h, w, snapshot[j]};
        out.emb[i] = color_adapt(z1, z2, spec.eps).values;
      } else if (spec.op == "cutmix") {
        std::uniform_int_distribution<std::size_t> pick(0, B - 1);
        std::size_t j = pick(rngs[i]);
        EmbeddingGrid za{h, w, out.emb[i]};
        EmbeddingGrid zb{h, w, snapshot[j]};
        Eigen::VectorXf ya = out.labels.row(i).transpose();
        Eigen::VectorXf yb = label_snapshot.row(Eigen::Index(j)).transpose();
        CutmixResult res = token_cutmix(za, ya, zb, yb, rngs[i]);
        out.emb[i] = std::move(res.mixed.values);
        out.labels.row(i) = res.label.transpose();
      }
    }
  }
  return out;
}

}  // namespace stok
