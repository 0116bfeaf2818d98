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

#ifndef STOK_GEOM_HPP_
#define STOK_GEOM_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <type_traits>
#include <vector>

#include "stok/common.hpp"

namespace stok {

// One sampled geometric augmentation. Parameters are in normalized
// coordinates so the same descriptor acts identically on a pixel image
// and on an h x w feature grid.
struct GeomAug {
  enum class Kind { kIdentity, kHflip, kRrc, kAffine, kMixup };
  Kind kind = Kind::kIdentity;
  // rrc: crop rectangle, fractions of the full extent.
  double y0 = 0, x0 = 0, hf = 1, wf = 1;
  // affine, sampled magnitudes.
  double deg = 0, tx = 0, ty = 0, shear_x = 0, shear_y = 0;
  // mixup blend weight on the primary input.
  double lambda = 1;
};

// Linear resampling map: each output cell reads up to four weighted input
// cells. hflip/rrc/affine are all instances; mixup is handled separately.
struct GeomMap {
  int h = 0, w = 0;
  std::vector<std::array<std::pair<int, double>, 4>> taps;  // weight 0 = unused
};

namespace detail {

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

inline void bilinear_taps(double sy, double sx, int h, int w,
                          std::array<std::pair<int, double>, 4>& taps) {
  int y0 = int(std::floor(sy));
  int x0 = int(std::floor(sx));
  double fy = sy - y0;
  double fx = sx - x0;
  const double wts[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx),
                         fy * fx};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  for (int t = 0; t < 4; ++t) {
    int yy = reflect101(ys[t], h);
    int xx = reflect101(xs[t], w);
    taps[t] = {yy * w + xx, wts[t]};
  }
}

}  // namespace detail

// Builds the resampling map for identity/hflip/rrc/affine over an h x w
// grid. `nearest` selects single-tap nearest-neighbor sampling (used for
// one-hot inputs); otherwise bilinear.
inline GeomMap build_geom_map(int h, int w, const GeomAug& aug, bool nearest) {
  GeomMap map;
  map.h = h;
  map.w = w;
  map.taps.resize(std::size_t(h) * w);
  auto single = [&](int i, int sy, int sx) {
    sy = std::clamp(sy, 0, h - 1);
    sx = std::clamp(sx, 0, w - 1);
    map.taps[i] = {{{sy * w + sx, 1.0}, {0, 0.0}, {0, 0.0}, {0, 0.0}}};
  };
  switch (aug.kind) {
    case GeomAug::Kind::kIdentity:
      for (int i = 0; i < h * w; ++i) single(i, i / w, i % w);
      break;
    case GeomAug::Kind::kHflip:
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) single(y * w + x, y, w - 1 - x);
      }
      break;
    case GeomAug::Kind::kRrc: {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double sy = aug.y0 * h + (y + 0.5) * aug.hf - 0.5;
          double sx = aug.x0 * w + (x + 0.5) * aug.wf - 0.5;
          if (nearest) {
            single(y * w + x, int(std::floor(sy + 0.5)), int(std::floor(sx + 0.5)));
          } else {
            detail::bilinear_taps(std::clamp(sy, 0.0, double(h - 1)),
                                  std::clamp(sx, 0.0, double(w - 1)), h, w,
                                  map.taps[y * w + x]);
          }
        }
      }
      break;
    }
    case GeomAug::Kind::kAffine: {
      const double pi = std::acos(-1.0);
      double th = aug.deg * pi / 180.0;
      double kx = std::tan(aug.shear_x * pi / 180.0);
      double ky = std::tan(aug.shear_y * pi / 180.0);
      // Forward map in normalized centered coords: shear, rotate, translate.
      double a = std::cos(th) + std::sin(th) * ky;
      double b = std::cos(th) * kx + std::sin(th);
      double c = -std::sin(th) + std::cos(th) * ky;
      double d = -std::sin(th) * kx + std::cos(th);
      double det = a * d - b * c;
      if (std::abs(det) < 1e-12) throw DataError("affine: singular transform");
      bool exact_identity = aug.deg == 0 && aug.tx == 0 && aug.ty == 0 &&
                            aug.shear_x == 0 && aug.shear_y == 0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (exact_identity) {
            single(y * w + x, y, x);
            continue;
          }
          double u = (x + 0.5) / w - 0.5 - aug.tx;
          double v = (y + 0.5) / h - 0.5 - aug.ty;
          double su = (d * u - b * v) / det;
          double sv = (-c * u + a * v) / det;
          double sx = (su + 0.5) * w - 0.5;
          double sy = (sv + 0.5) * h - 0.5;
          if (nearest) {
            int iy = detail::reflect101(int(std::floor(sy + 0.5)), h);
            int ix = detail::reflect101(int(std::floor(sx + 0.5)), w);
            map.taps[y * w + x] = {{{iy * w + ix, 1.0}, {0, 0.0}, {0, 0.0}, {0, 0.0}}};
          } else {
            detail::bilinear_taps(sy, sx, h, w, map.taps[y * w + x]);
          }
        }
      }
      break;
    }
    case GeomAug::Kind::kMixup:
      throw DataError("mixup has no resampling map; blend explicitly");
  }
  return map;
}

template <class M>
M apply_geom_map(const GeomMap& map, const M& x) {
  M out(x.rows(), x.cols());
  for (std::size_t i = 0; i < map.taps.size(); ++i) {
    const auto& t = map.taps[i];
    out.row(Eigen::Index(i)) =
        x.row(t[0].first) * typename M::Scalar(t[0].second);
    for (int k = 1; k < 4; ++k) {
      if (t[k].second != 0.0) {
        out.row(Eigen::Index(i)) +=
            x.row(t[k].first) * typename M::Scalar(t[k].second);
      }
    }
  }
  return out;
}

// Transpose of apply_geom_map: scatter-add output gradients back to the
// input positions.
template <class M>
M geom_map_backward(const GeomMap& map, const M& dy) {
  M dx = M::Zero(dy.rows(), dy.cols());
  for (std::size_t i = 0; i < map.taps.size(); ++i) {
    const auto& t = map.taps[i];
    for (int k = 0; k < 4; ++k) {
      if (k == 0 || t[k].second != 0.0) {
        dx.row(t[k].first) +=
            dy.row(Eigen::Index(i)) * typename M::Scalar(t[k].second);
      }
    }
  }
  return dx;
}

// Applies a geometric augmentation to an (h*w) x d grid. Mixup blends with
// `partner` using aug.lambda; all other kinds resample spatially.
template <class M>
M apply_geom_grid(const M& x, int h, int w, const GeomAug& aug,
                  const std::type_identity_t<M>* partner = nullptr,
                  bool nearest = false) {
  if (Eigen::Index(h) * w != x.rows()) {
    throw DataError(strformat("apply_geom_grid: grid %dx%d does not match %ld rows",
                              h, w, long(x.rows())));
  }
  if (aug.kind == GeomAug::Kind::kMixup) {
    if (partner == nullptr) throw DataError("mixup: missing partner grid");
    if (partner->rows() != x.rows() || partner->cols() != x.cols()) {
      throw DataError("mixup: partner shape mismatch");
    }
    using S = typename M::Scalar;
    return x * S(aug.lambda) + *partner * S(1.0 - aug.lambda);
  }
  return apply_geom_map(build_geom_map(h, w, aug, nearest), x);
}

}  // namespace stok

#endif  // STOK_GEOM_HPP_
