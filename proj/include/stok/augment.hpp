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

#ifndef STOK_AUGMENT_HPP_
#define STOK_AUGMENT_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stok/codec.hpp"
#include "stok/geom.hpp"

namespace stok {

// Declarative description of one augmentation op, as it appears in a run
// config. Parameters not used by `op` are ignored.
struct AugSpec {
  std::string op;  // hflip rrc affine mixup cutmix color_adapt emb_noise
                   // token_eda identity
  double p = 1.0;  // application probability

  double scale_lo = 0.6, scale_hi = 1.0;              // rrc area range
  double degrees = 10, translate = 0.1, shear = 5;    // affine magnitudes
  double mixup_alpha = 1.0;                           // mixup lambda ~ Beta(a,a)
  double std_dev = 0.02;                              // emb_noise
  double eps = 1e-5;                                  // color_adapt

  void validate() const;
  nlohmann::json to_json() const;
  static AugSpec from_json(const nlohmann::json& j);
};

// Per-channel mean/std over spatial positions.
struct ChannelStats {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
};

ChannelStats channel_stats(const EmbeddingGrid& z);

// Transfers z2's channel statistics onto z1's spatial structure:
// sigma(z2) * (z1 - mu(z1)) / (sigma(z1) + eps) + mu(z2).
EmbeddingGrid color_adapt(const EmbeddingGrid& z1, const EmbeddingGrid& z2,
                          double eps = 1e-5);

EmbeddingGrid emb_noise(const EmbeddingGrid& z, double std_dev, Rng& rng);

// Random resized crop in token space. The one-hot form resamples rows by
// nearest neighbor (rows stay exact one-hot); the embedding form is
// bilinear. Both sample a square crop with area fraction in [lo, hi].
MatF token_rrc_onehot(const MatF& onehot, int h, int w, double lo, double hi,
                      Rng& rng);
EmbeddingGrid token_rrc(const EmbeddingGrid& z, double lo, double hi, Rng& rng);
// Crop descriptor shared by both forms (exposed for pipeline reuse).
GeomAug sample_token_rrc(double lo, double hi, Rng& rng);

struct CutmixResult {
  EmbeddingGrid mixed;
  Eigen::VectorXf label;  // lambda*ya + (1-lambda)*yb
  double lambda = 1.0;    // retained-area fraction of za
};

CutmixResult token_cutmix(const EmbeddingGrid& za, const Eigen::VectorXf& ya,
                          const EmbeddingGrid& zb, const Eigen::VectorXf& yb,
                          Rng& rng);
// Deterministic form with an explicit replacement box [y_lo,y_hi)x[x_lo,x_hi).
CutmixResult token_cutmix_box(const EmbeddingGrid& za, const Eigen::VectorXf& ya,
                              const EmbeddingGrid& zb, const Eigen::VectorXf& yb,
                              int y_lo, int y_hi, int x_lo, int x_hi);

TokenGrid token_eda_swap(const TokenGrid& grid, double p, Rng& rng);

// --- Pixel-space operators -------------------------------------------------

Image hflip(const Image& img);
TokenGrid hflip_grid(const TokenGrid& grid);
Image pixel_mixup(const Image& a, const Image& b, double lambda);
Image pixel_brightness(const Image& img, double delta);   // additive, clamped
Image pixel_contrast(const Image& img, double factor);    // about mid-gray
Image apply_geom_image(const Image& img, const GeomAug& aug,
                       const Image* partner = nullptr);

// Samples concrete geometric parameters for a pixel-style spec
// (hflip/rrc/affine/mixup/identity).
GeomAug sample_geom_aug(const AugSpec& spec, Rng& rng);

// Applies a pixel-style spec to an image; gated by spec.p.
Image pixel_aug(const Image& img, const AugSpec& spec, Rng& rng,
                const Image* partner = nullptr);

enum class CorruptKind { kGaussianNoise, kGaussianBlur };
CorruptKind corrupt_kind_from_name(const std::string& name);

// ImageNet-C style 5-level ladders, fixed here.
extern const double kNoiseStd[5];
extern const double kBlurSigma[5];

Image corrupt(const Image& img, CorruptKind kind, int severity, Rng& rng);

// --- Pipeline ----------------------------------------------------------------
//
// Ordered stages over a token batch:
//   token ops (token_eda) -> one-hot -> rrc -> embed (one-hot x codebook)
//   -> pixel-style ops routed through TokenAdapt -> cutmix/color_adapt/
//   emb_noise on embeddings.
// Ops may only move forward through those stages; a violation is a
// ConfigError at compose time.

// Hook that routes a pixel-style op through a TokenAdapt module. Partner is
// non-null for mixup. Returns the augmented token grid.
using TokenAdaptFn = std::function<TokenGrid(
    const TokenGrid&, const GeomAug&, const TokenGrid* partner)>;

struct AugBatch {
  std::vector<TokenGrid> tokens;
  MatF labels;  // B x C soft labels
  int h = 0, w = 0;
};

struct AugBatchOut {
  std::vector<MatF> emb;  // per sample, (h*w) x d
  MatF labels;            // B x C
};

class TokenAugPipeline {
 public:
  TokenAugPipeline() = default;  // identity pipeline
  explicit TokenAugPipeline(std::vector<AugSpec> specs);

  // Required before applying if any pixel-style op is present.
  void bind_token_adapt(TokenAdaptFn fn) { ta_fn_ = std::move(fn); }
  bool needs_token_adapt() const { return needs_ta_; }

  // Deterministic under (seed, epoch, sample indices). sample_index[i] is
  // the global index of batch element i; per-sample streams are derived
  // from it, so worker sharding cannot change results.
  AugBatchOut apply(const AugBatch& batch, const Codebook& cb,
                    std::uint64_t seed, std::uint64_t epoch,
                    std::span<const std::uint64_t> sample_index) const;

 private:
  enum class Stage { kToken = 0, kOneHot = 1, kTokenAdapt = 2, kEmbed = 3 };
  struct Step {
    AugSpec spec;
    Stage stage;
  };
  std::vector<Step> steps_;
  bool needs_ta_ = false;
  TokenAdaptFn ta_fn_;
};

}  // namespace stok

#endif  // STOK_AUGMENT_HPP_
