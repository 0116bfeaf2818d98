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

#include <algorithm>
#include <cstring>
#include <numeric>
#include <unordered_set>

#include "stok/codec.hpp"

namespace stok {

namespace {

struct RowHash {
  const MatD* m;
  std::size_t operator()(int i) const {
    const double* p = m->row(i).data();
    std::uint64_t h = 1469598103934665603ull;
    for (int j = 0; j < m->cols(); ++j) {
      std::uint64_t bits;
      std::memcpy(&bits, &p[j], 8);
      h = (h ^ bits) * 1099511628211ull;
    }
    return std::size_t(h);
  }
};

struct RowEq {
  const MatD* m;
  bool operator()(int a, int b) const { return m->row(a) == m->row(b); }
};

}  // namespace

MatD kmeans_fit(const MatD& points, int K, std::uint64_t seed, int iters) {
  const int n = int(points.rows());
  const int d = int(points.cols());
  if (K < 2) throw DataError("kmeans: K must be >= 2");
  if (n < K) {
    throw DataError(strformat("kmeans: %d points < K=%d", n, K));
  }

  // Init: first K pairwise-distinct rows of a seeded permutation.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::unordered_set<int, RowHash, RowEq> chosen(16, RowHash{&points},
                                                 RowEq{&points});
  std::vector<int> init;
  for (int i : order) {
    if (int(init.size()) == K) break;
    if (chosen.insert(i).second) init.push_back(i);
  }
  if (int(init.size()) < K) {
    throw DataError(strformat(
        "kmeans: only %zu distinct points available, need K=%d", init.size(), K));
  }
  MatD centroids(K, d);
  for (int k = 0; k < K; ++k) centroids.row(k) = points.row(init[k]);

  std::vector<int> assign(n, 0);
  Eigen::VectorXd sq_norms(K);
  const int chunk = 8192;
  for (int it = 0; it < iters; ++it) {
    // Assignment via the expanded form; argmin ties go to the lowest index.
    for (int k = 0; k < K; ++k) sq_norms(k) = centroids.row(k).squaredNorm();
    for (int start = 0; start < n; start += chunk) {
      int len = std::min(chunk, n - start);
      MatD scores = points.middleRows(start, len) * centroids.transpose();
      for (int i = 0; i < len; ++i) {
        int best = 0;
        double best_val = sq_norms(0) - 2.0 * scores(i, 0);
        for (int k = 1; k < K; ++k) {
          double v = sq_norms(k) - 2.0 * scores(i, k);
          if (v < best_val) {
            best_val = v;
            best = k;
          }
        }
        assign[start + i] = best;
      }
    }
    // Update; empty clusters keep their previous centroid.
    MatD sums = MatD::Zero(K, d);
    std::vector<std::int64_t> counts(K, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) centroids.row(k) = sums.row(k) / double(counts[k]);
    }
  }
  return centroids;
}

Codebook fit_toy_codebook(std::span<const Image> images, int patch_size, int K,
                          std::uint64_t seed, const KmeansOptions& opts) {
  if (images.empty()) throw DataError("fit_toy_codebook: no input images");
  if (patch_size <= 0) throw DataError("fit_toy_codebook: patch_size must be positive");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].h % patch_size != 0 || images[i].w % patch_size != 0) {
      throw DataError(strformat(
          "fit_toy_codebook: image %zu is %dx%d, not divisible by patch_size %d",
          i, images[i].h, images[i].w, patch_size));
    }
  }
  std::size_t per_image = 0;
  std::size_t total = 0;
  for (const auto& img : images) {
    per_image = std::size_t(img.h / patch_size) * (img.w / patch_size);
    total += per_image;
  }
  const int d = patch_size * patch_size * 3;

  // Deterministic subsample when the patch pool is large.
  std::vector<std::size_t> pick;
  if (total > std::size_t(opts.max_patches)) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng = make_rng(derive_seed(seed, 0x5ab5a317));
    std::shuffle(order.begin(), order.end(), rng);
    pick.assign(order.begin(), order.begin() + opts.max_patches);
    std::sort(pick.begin(), pick.end());
  } else {
    pick.resize(total);
    std::iota(pick.begin(), pick.end(), std::size_t(0));
  }

  MatD pts(pick.size(), d);
  {
    std::size_t write = 0;
    std::size_t base = 0;
    std::size_t pi = 0;
    for (const auto& img : images) {
      MatF patches = image_patches(img, patch_size);
      std::size_t count = std::size_t(patches.rows());
      while (pi < pick.size() && pick[pi] < base + count) {
        pts.row(write++) = patches.row(int(pick[pi] - base)).cast<double>();
        ++pi;
      }
      base += count;
      if (pi == pick.size()) break;
    }
  }

  MatD centroids = kmeans_fit(pts, K, derive_seed(seed, 1), opts.iters);
  MatF entries = centroids.cast<float>();

  // Perturb duplicate rows until distinct so the codebook invariant holds.
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < a; ++b) {
      int bump = 0;
      while (entries.row(a) == entries.row(b)) {
        entries(a, bump % d) += 1e-4f * float(bump + 1);
        ++bump;
      }
    }
  }
  return Codebook::from_entries(std::move(entries));
}

}  // namespace stok
