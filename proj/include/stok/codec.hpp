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

#ifndef STOK_CODEC_HPP_
#define STOK_CODEC_HPP_

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stok/common.hpp"
#include "stok/image.hpp"

namespace stok {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// K x d table of codeword vectors. Rows must be finite and pairwise
// distinct; distinctness is what makes quantize(lookup(T)) == T exact.
struct Codebook {
  MatF entries;    // K x d
  std::string id;  // content hash of the serialized table

  int K() const { return int(entries.rows()); }
  int dim() const { return int(entries.cols()); }

  // Validates invariants and computes the content id.
  static Codebook from_entries(MatF entries);
};

// h x w grid of codebook indices; the stored form of one image.
struct TokenGrid {
  int h = 0;
  int w = 0;
  std::vector<std::int32_t> idx;  // row-major, h*w
  int label = -1;                 // optional class id

  TokenGrid() = default;
  TokenGrid(int h_, int w_) : h(h_), w(w_), idx(std::size_t(h_) * w_, 0) {}
  std::int32_t& at(int y, int x) { return idx[std::size_t(y) * w + x]; }
  std::int32_t at(int y, int x) const { return idx[std::size_t(y) * w + x]; }
  int n() const { return h * w; }
  bool operator==(const TokenGrid& o) const {
    return h == o.h && w == o.w && idx == o.idx;
  }
};

// h x w x d real array; token embeddings after lookup or features in an
// augmentation space. values is (h*w) x d, row-major over the grid.
struct EmbeddingGrid {
  int h = 0;
  int w = 0;
  MatF values;

  int d() const { return int(values.cols()); }
  int n() const { return h * w; }
};

// --- Tokenizer ----------------------------------------------------------

struct KmeansOptions {
  int iters = 25;
  int max_patches = 200000;  // fit on at most this many patches (seeded subsample)
};

// Patch k-means stand-in for an external neural tokenizer. Patch vectors
// are p*p*3 floats, pixel row-major with interleaved RGB; d = p*p*3.
Codebook fit_toy_codebook(std::span<const Image> images, int patch_size, int K,
                          std::uint64_t seed, const KmeansOptions& opts = {});

// Internal k-means used by fit_toy_codebook: seeded init on K distinct
// rows, Lloyd iterations in double, empty clusters keep their centroid.
MatD kmeans_fit(const MatD& points, int K, std::uint64_t seed, int iters);

// Flattens an image into its (h*w) x d patch matrix (same layout as
// codebook rows).
MatF image_patches(const Image& img, int patch_size);

TokenGrid tokenize_image(const Image& img, const Codebook& cb, int patch_size);
EmbeddingGrid lookup(const TokenGrid& grid, const Codebook& cb);
TokenGrid quantize(const EmbeddingGrid& z, const Codebook& cb);
Image decode_tokens(const TokenGrid& grid, const Codebook& cb, int patch_size);

// Nearest codeword of a single vector, squared L2, ties to lowest index.
int nearest_codeword(const Eigen::Ref<const Eigen::RowVectorXf>& v,
                     const Codebook& cb);

// --- Packed token format -------------------------------------------------
//
// Header: magic "STOK", version u8=1, K u32, h u16, w u16, count u64,
// little-endian (21 bytes). Body: all indices concatenated row-major,
// each written in exactly ceil(log2 K) bits, LSB-first within bytes,
// final byte zero-padded.

constexpr std::size_t kTokenHeaderBytes = 21;

int bits_per_token(int K);
std::uint64_t packed_body_bytes(std::uint64_t count, int h, int w, int K);

std::string pack_tokens(std::span<const TokenGrid> grids, int K);
std::vector<TokenGrid> unpack_tokens(std::span<const std::uint8_t> payload);
std::vector<TokenGrid> unpack_tokens(std::string_view payload);

void write_token_file(const std::string& path, std::span<const TokenGrid> grids,
                      int K);
std::vector<TokenGrid> read_token_file(const std::string& path);

// Labels live in a parallel file of count little-endian u16 values.
void write_label_file(const std::string& path,
                      std::span<const std::uint16_t> labels);
std::vector<std::uint16_t> read_label_file(const std::string& path);

// Codebook file: magic "SCBK", version u8=1, K u32, d u32, then K*d
// little-endian f32 values, row-major.
std::string serialize_codebook(const Codebook& cb);
void write_codebook_file(const std::string& path, const Codebook& cb);
Codebook read_codebook_file(const std::string& path);

// --- Dataset manifest ----------------------------------------------------

struct DatasetManifest {
  std::uint64_t num_images = 0;
  int grid_h = 0;
  int grid_w = 0;
  int K = 0;
  int bits_per_token = 0;
  std::string codebook_id;
  std::uint64_t payload_bytes = 0;    // packed token file size incl. header
  std::uint64_t raw_pixel_bytes = 0;  // 3 bytes/pixel over the source images
  std::string checksum;               // sha256 of the packed payload
  std::vector<std::string> class_names;

  void validate() const;
  std::string to_json() const;
  static DatasetManifest from_json(std::string_view text);
};

void write_manifest_file(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest_file(const std::string& path);

struct StatsReport {
  std::uint64_t payload_bytes = 0;
  std::uint64_t body_bytes = 0;
  std::uint64_t raw_pixel_bytes = 0;
  int bits_per_token = 0;
  double compression_ratio = 0;  // payload / raw pixels
};

StatsReport dataset_stats(const DatasetManifest& m);
std::string format_stats(const DatasetManifest& m);

// --- DCT alternative input -----------------------------------------------
//
// Per-8x8-block orthonormal 2-D DCT of the luma plane (Rec.601 weights,
// 0..255 scale, no level shift), divided element-wise by the standard
// luminance quantization table scaled by a quality factor and rounded.

struct DctGrid {
  int bh = 0;  // blocks down = H/8
  int bw = 0;  // blocks across = W/8
  std::vector<std::int32_t> coef;  // bh*bw*64, row-major blocks, row-major within

  std::int32_t* block(int by, int bx) { return &coef[(std::size_t(by) * bw + bx) * 64]; }
  const std::int32_t* block(int by, int bx) const {
    return &coef[(std::size_t(by) * bw + bx) * 64];
  }
};

DctGrid dct_tokenize(const Image& img, int quality = 50);
Image dct_decode(const DctGrid& grid, int quality = 50);

// Unquantized 8x8 block transforms, exposed for verification.
void dct8_forward(const double in[64], double out[64]);
void dct8_inverse(const double in[64], double out[64]);
// Luminance quantization table scaled to the given quality (1..100).
std::array<int, 64> dct_quant_table(int quality);

}  // namespace stok

#endif  // STOK_CODEC_HPP_
