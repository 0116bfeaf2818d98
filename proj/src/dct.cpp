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

#include <array>
#include <cmath>

#include "stok/codec.hpp"

namespace stok {

namespace {

// Standard JPEG luminance quantization table (Annex K).
constexpr int kLumaBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  //
    12, 12, 14, 19, 26,  58,  60,  55,  //
    14, 13, 16, 24, 40,  57,  69,  56,  //
    14, 17, 22, 29, 51,  87,  80,  62,  //
    18, 22, 37, 56, 68,  109, 103, 77,  //
    24, 35, 55, 64, 81,  104, 113, 92,  //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99};

// Orthonormal DCT-II basis: M[u][x] = a(u) cos((2x+1) u pi / 16).
const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto m = [] {
    std::array<std::array<double, 8>, 8> b{};
    const double pi = std::acos(-1.0);
    for (int u = 0; u < 8; ++u) {
      double a = (u == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        b[u][x] = a * std::cos((2 * x + 1) * u * pi / 16.0);
      }
    }
    return b;
  }();
  return m;
}

double luma_255(const Image& img, int y, int x) {
  return 255.0 * (0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                  0.114 * img.at(y, x, 2));
}

}  // namespace

void dct8_forward(const double in[64], double out[64]) {
  const auto& m = dct_basis();
  double tmp[64];
  // rows: tmp = in * M^T
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int x = 0; x < 8; ++x) s += in[y * 8 + x] * m[u][x];
      tmp[y * 8 + u] = s;
    }
  }
  // cols: out = M * tmp
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int y = 0; y < 8; ++y) s += m[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  }
}

void dct8_inverse(const double in[64], double out[64]) {
  const auto& m = dct_basis();
  double tmp[64];
  // cols: tmp = M^T * in
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += m[v][y] * in[v * 8 + u];
      tmp[y * 8 + u] = s;
    }
  }
  // rows: out = tmp * M
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += tmp[y * 8 + u] * m[u][x];
      out[y * 8 + x] = s;
    }
  }
}

std::array<int, 64> dct_quant_table(int quality) {
  if (quality < 1 || quality > 100) {
    throw DataError(strformat("dct: quality %d outside [1, 100]", quality));
  }
  int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i) {
    q[i] = std::clamp((kLumaBase[i] * scale + 50) / 100, 1, 255);
  }
  return q;
}

DctGrid dct_tokenize(const Image& img, int quality) {
  if (img.h % 8 != 0 || img.w % 8 != 0) {
    throw DataError(strformat("dct: image %dx%d not divisible by 8", img.h, img.w));
  }
  std::array<int, 64> q = dct_quant_table(quality);
  DctGrid grid;
  grid.bh = img.h / 8;
  grid.bw = img.w / 8;
  grid.coef.resize(std::size_t(grid.bh) * grid.bw * 64);
  double block[64];
  double coef[64];
  for (int by = 0; by < grid.bh; ++by) {
    for (int bx = 0; bx < grid.bw; ++bx) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          block[y * 8 + x] = luma_255(img, by * 8 + y, bx * 8 + x);
        }
      }
      dct8_forward(block, coef);
      std::int32_t* out = grid.block(by, bx);
      for (int i = 0; i < 64; ++i) {
        out[i] = std::int32_t(std::lround(coef[i] / q[i]));
      }
    }
  }
  return grid;
}

Image dct_decode(const DctGrid& grid, int quality) {
  std::array<int, 64> q = dct_quant_table(quality);
  Image img(grid.bh * 8, grid.bw * 8);
  double coef[64];
  double block[64];
  for (int by = 0; by < grid.bh; ++by) {
    for (int bx = 0; bx < grid.bw; ++bx) {
      const std::int32_t* in = grid.block(by, bx);
      for (int i = 0; i < 64; ++i) coef[i] = double(in[i]) * q[i];
      dct8_inverse(coef, block);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          float v = float(block[y * 8 + x] / 255.0);
          v = std::clamp(v, 0.f, 1.f);
          for (int c = 0; c < 3; ++c) img.at(by * 8 + y, bx * 8 + x, c) = v;
        }
      }
    }
  }
  return img;
}

}  // namespace stok
