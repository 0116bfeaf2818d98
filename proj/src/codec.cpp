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
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "json.hpp"
#include "stok/codec.hpp"

namespace stok {

using json = nlohmann::json;

Codebook Codebook::from_entries(MatF entries) {
  const int K = int(entries.rows());
  const int d = int(entries.cols());
  if (K < 2) throw DataError("codebook: K must be >= 2");
  if (d < 1) throw DataError("codebook: d must be >= 1");
  if (!entries.allFinite()) throw DataError("codebook: non-finite entry");
  // Pairwise-distinct rows, checked through a byte-level hash set.
  std::unordered_set<std::string> seen;
  seen.reserve(std::size_t(K) * 2);
  for (int k = 0; k < K; ++k) {
    std::string key(reinterpret_cast<const char*>(entries.row(k).data()),
                    std::size_t(d) * sizeof(float));
    if (!seen.insert(std::move(key)).second) {
      throw DataError(strformat("codebook: row %d duplicates an earlier row", k));
    }
  }
  Codebook cb;
  cb.entries = std::move(entries);
  cb.id = sha256_hex(serialize_codebook(cb));
  return cb;
}

MatF image_patches(const Image& img, int patch_size) {
  if (patch_size <= 0 || img.h % patch_size != 0 || img.w % patch_size != 0) {
    throw DataError(strformat(
        "image is %dx%d, not divisible by patch_size %d", img.h, img.w,
        patch_size));
  }
  const int gh = img.h / patch_size;
  const int gw = img.w / patch_size;
  const int d = patch_size * patch_size * 3;
  MatF out(gh * gw, d);
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      float* row = out.row(py * gw + px).data();
      int o = 0;
      for (int y = 0; y < patch_size; ++y) {
        for (int x = 0; x < patch_size; ++x) {
          for (int c = 0; c < 3; ++c) {
            row[o++] = img.at(py * patch_size + y, px * patch_size + x, c);
          }
        }
      }
    }
  }
  return out;
}

int nearest_codeword(const Eigen::Ref<const Eigen::RowVectorXf>& v,
                     const Codebook& cb) {
  // True squared distance (not the expanded form): the self-distance of a
  // codeword is exactly zero, which makes quantize(lookup(T)) == T exact.
  int best = 0;
  float best_d = (cb.entries.row(0) - v).squaredNorm();
  for (int k = 1; k < cb.K(); ++k) {
    float dist = (cb.entries.row(k) - v).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best = k;
    }
  }
  return best;
}

TokenGrid tokenize_image(const Image& img, const Codebook& cb, int patch_size) {
  const int d = patch_size * patch_size * 3;
  if (cb.dim() != d) {
    throw DataError(strformat(
        "tokenize: codebook dim %d does not match patch_size %d (expect %d)",
        cb.dim(), patch_size, d));
  }
  MatF patches = image_patches(img, patch_size);
  TokenGrid grid(img.h / patch_size, img.w / patch_size);
  for (int i = 0; i < int(patches.rows()); ++i) {
    grid.idx[i] = nearest_codeword(patches.row(i), cb);
  }
  return grid;
}

EmbeddingGrid lookup(const TokenGrid& grid, const Codebook& cb) {
  EmbeddingGrid out;
  out.h = grid.h;
  out.w = grid.w;
  out.values.resize(grid.n(), cb.dim());
  for (int i = 0; i < grid.n(); ++i) {
    std::int32_t k = grid.idx[i];
    if (k < 0 || k >= cb.K()) {
      throw DataError(strformat("lookup: index %d at position %d out of range [0,%d)",
                                k, i, cb.K()));
    }
    out.values.row(i) = cb.entries.row(k);
  }
  return out;
}

TokenGrid quantize(const EmbeddingGrid& z, const Codebook& cb) {
  if (z.d() != cb.dim()) {
    throw DataError(strformat("quantize: embedding dim %d != codebook dim %d",
                              z.d(), cb.dim()));
  }
  if (!z.values.allFinite()) throw DataError("quantize: non-finite input");
  TokenGrid grid(z.h, z.w);
  for (int i = 0; i < z.n(); ++i) {
    grid.idx[i] = nearest_codeword(z.values.row(i), cb);
  }
  return grid;
}

Image decode_tokens(const TokenGrid& grid, const Codebook& cb, int patch_size) {
  const int d = patch_size * patch_size * 3;
  if (cb.dim() != d) {
    throw DataError(strformat(
        "decode: codebook dim %d does not match patch_size %d (expect %d)",
        cb.dim(), patch_size, d));
  }
  Image img(grid.h * patch_size, grid.w * patch_size);
  for (int py = 0; py < grid.h; ++py) {
    for (int px = 0; px < grid.w; ++px) {
      std::int32_t k = grid.at(py, px);
      if (k < 0 || k >= cb.K()) {
        throw DataError(strformat("decode: index %d out of range [0,%d)", k, cb.K()));
      }
      const float* row = cb.entries.row(k).data();
      int o = 0;
      for (int y = 0; y < patch_size; ++y) {
        for (int x = 0; x < patch_size; ++x) {
          for (int c = 0; c < 3; ++c) {
            img.at(py * patch_size + y, px * patch_size + x, c) =
                std::clamp(row[o++], 0.f, 1.f);
          }
        }
      }
    }
  }
  return img;
}

// --- Packed format -------------------------------------------------------

int bits_per_token(int K) {
  if (K < 2 || K > 65536) {
    throw DataError(strformat("bits_per_token: K=%d outside [2, 65536]", K));
  }
  return std::bit_width(unsigned(K - 1));
}

std::uint64_t packed_body_bytes(std::uint64_t count, int h, int w, int K) {
  std::uint64_t bits = count * std::uint64_t(h) * w * bits_per_token(K);
  return (bits + 7) / 8;
}

std::string pack_tokens(std::span<const TokenGrid> grids, int K) {
  if (grids.empty()) throw DataError("pack_tokens: empty grid sequence");
  const int b = bits_per_token(K);
  const int h = grids[0].h;
  const int w = grids[0].w;
  if (h <= 0 || w <= 0) throw DataError("pack_tokens: empty grid shape");
  ByteWriter header;
  header.put_bytes(std::string_view("STOK"));
  header.put_u8(1);
  header.put_u32(std::uint32_t(K));
  header.put_u16(std::uint16_t(h));
  header.put_u16(std::uint16_t(w));
  header.put_u64(grids.size());

  BitWriter bits;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    if (grids[g].h != h || grids[g].w != w) {
      throw DataError(strformat("pack_tokens: grid %zu is %dx%d, expected %dx%d",
                                g, grids[g].h, grids[g].w, h, w));
    }
    for (std::int32_t v : grids[g].idx) {
      if (v < 0 || v >= K) {
        throw DataError(strformat("pack_tokens: index %d in grid %zu out of range [0,%d)",
                                  v, g, K));
      }
      bits.put(std::uint32_t(v), b);
    }
  }
  bits.finish();
  std::string out = header.take();
  out += bits.str();
  return out;
}

std::vector<TokenGrid> unpack_tokens(std::span<const std::uint8_t> payload) {
  ByteReader br(payload);
  char magic[4];
  for (char& c : magic) c = char(br.get_u8());
  if (std::string_view(magic, 4) != "STOK") {
    throw DataError("unpack_tokens: bad magic at byte 0");
  }
  std::uint8_t version = br.get_u8();
  if (version != 1) {
    throw DataError(strformat("unpack_tokens: unsupported version %u at byte 4",
                              unsigned(version)));
  }
  std::uint32_t K = br.get_u32();
  int h = br.get_u16();
  int w = br.get_u16();
  std::uint64_t count = br.get_u64();
  if (K < 2 || K > 65536) {
    throw DataError(strformat("unpack_tokens: K=%u outside [2, 65536] at byte 5", K));
  }
  if (h == 0 || w == 0 || count == 0) {
    throw DataError("unpack_tokens: empty grid shape or count in header");
  }
  const int b = bits_per_token(int(K));
  std::uint64_t expected = kTokenHeaderBytes + packed_body_bytes(count, h, w, int(K));
  if (payload.size() < expected) {
    throw DataError(strformat(
        "unpack_tokens: truncated payload, expected %llu bytes, got %zu "
        "(missing data from byte %zu)",
        (unsigned long long)expected, payload.size(), payload.size()));
  }
  if (payload.size() > expected) {
    throw DataError(strformat(
        "unpack_tokens: trailing bytes after byte %llu (payload is %zu bytes)",
        (unsigned long long)expected, payload.size()));
  }
  BitReader bits(payload.subspan(kTokenHeaderBytes));
  std::vector<TokenGrid> out;
  out.reserve(count);
  for (std::uint64_t g = 0; g < count; ++g) {
    TokenGrid grid(h, w);
    for (auto& v : grid.idx) {
      std::uint32_t raw = bits.get(b);
      if (raw >= K) {
        throw DataError(strformat(
            "unpack_tokens: decoded index %u >= K=%u in grid %llu", raw, K,
            (unsigned long long)g));
      }
      v = std::int32_t(raw);
    }
    out.push_back(std::move(grid));
  }
  return out;
}

std::vector<TokenGrid> unpack_tokens(std::string_view payload) {
  return unpack_tokens(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

void write_token_file(const std::string& path, std::span<const TokenGrid> grids,
                      int K) {
  write_file_atomic(path, pack_tokens(grids, K));
}

std::vector<TokenGrid> read_token_file(const std::string& path) {
  return unpack_tokens(read_file(path));
}

void write_label_file(const std::string& path,
                      std::span<const std::uint16_t> labels) {
  ByteWriter bw;
  for (std::uint16_t v : labels) bw.put_u16(v);
  write_file_atomic(path, bw.str());
}

std::vector<std::uint16_t> read_label_file(const std::string& path) {
  std::string data = read_file(path);
  if (data.size() % 2 != 0) {
    throw DataError(strformat("label file %s has odd size %zu", path.c_str(),
                              data.size()));
  }
  std::vector<std::uint16_t> out(data.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::uint16_t(std::uint8_t(data[2 * i])) |
             (std::uint16_t(std::uint8_t(data[2 * i + 1])) << 8);
  }
  return out;
}

std::string serialize_codebook(const Codebook& cb) {
  ByteWriter bw;
  bw.put_bytes(std::string_view("SCBK"));
  bw.put_u8(1);
  bw.put_u32(std::uint32_t(cb.K()));
  bw.put_u32(std::uint32_t(cb.dim()));
  for (int k = 0; k < cb.K(); ++k) {
    for (int j = 0; j < cb.dim(); ++j) bw.put_f32(cb.entries(k, j));
  }
  return bw.take();
}

void write_codebook_file(const std::string& path, const Codebook& cb) {
  write_file_atomic(path, serialize_codebook(cb));
}

Codebook read_codebook_file(const std::string& path) {
  std::string data = read_file(path);
  ByteReader br(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  char magic[4];
  for (char& c : magic) c = char(br.get_u8());
  if (std::string_view(magic, 4) != "SCBK") {
    throw DataError("codebook file: bad magic at byte 0: " + path);
  }
  if (br.get_u8() != 1) throw DataError("codebook file: unsupported version: " + path);
  int K = int(br.get_u32());
  int d = int(br.get_u32());
  if (K < 2 || d < 1) throw DataError("codebook file: bad K or d: " + path);
  MatF entries(K, d);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d; ++j) entries(k, j) = br.get_f32();
  }
  if (br.remaining() != 0) {
    throw DataError(strformat("codebook file: trailing bytes at offset %zu: %s",
                              br.offset(), path.c_str()));
  }
  return Codebook::from_entries(std::move(entries));
}

// --- Manifest -------------------------------------------------------------

void DatasetManifest::validate() const {
  if (K < 2 || K > 65536) throw DataError("manifest: K outside [2, 65536]");
  if (bits_per_token != stok::bits_per_token(K)) {
    throw DataError(strformat("manifest: bits_per_token %d != ceil(log2 %d)",
                              bits_per_token, K));
  }
  if (grid_h <= 0 || grid_w <= 0) throw DataError("manifest: empty grid shape");
  std::uint64_t expect =
      kTokenHeaderBytes + packed_body_bytes(num_images, grid_h, grid_w, K);
  if (payload_bytes != expect) {
    throw DataError(strformat(
        "manifest: payload_bytes %llu != header + packed body = %llu",
        (unsigned long long)payload_bytes, (unsigned long long)expect));
  }
  if (raw_pixel_bytes == 0) throw DataError("manifest: raw_pixel_bytes is zero");
}

std::string DatasetManifest::to_json() const {
  json j;
  j["num_images"] = num_images;
  j["grid_h"] = grid_h;
  j["grid_w"] = grid_w;
  j["K"] = K;
  j["bits_per_token"] = bits_per_token;
  j["codebook_id"] = codebook_id;
  j["payload_bytes"] = payload_bytes;
  j["raw_pixel_bytes"] = raw_pixel_bytes;
  j["checksum"] = checksum;
  j["class_names"] = class_names;
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("manifest: invalid JSON: ") + e.what());
  }
  static const std::unordered_set<std::string> keys = {
      "num_images", "grid_h",        "grid_w",          "K",
      "bits_per_token", "codebook_id", "payload_bytes", "raw_pixel_bytes",
      "checksum",   "class_names"};
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) throw DataError("manifest: unknown key '" + key + "'");
  }
  for (const auto& key : keys) {
    if (!j.contains(key)) throw DataError("manifest: missing key '" + key + "'");
  }
  DatasetManifest m;
  try {
    m.num_images = j["num_images"].get<std::uint64_t>();
    m.grid_h = j["grid_h"].get<int>();
    m.grid_w = j["grid_w"].get<int>();
    m.K = j["K"].get<int>();
    m.bits_per_token = j["bits_per_token"].get<int>();
    m.codebook_id = j["codebook_id"].get<std::string>();
    m.payload_bytes = j["payload_bytes"].get<std::uint64_t>();
    m.raw_pixel_bytes = j["raw_pixel_bytes"].get<std::uint64_t>();
    m.checksum = j["checksum"].get<std::string>();
    m.class_names = j["class_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: bad field type: ") + e.what());
  }
  m.validate();
  return m;
}

void write_manifest_file(const std::string& path, const DatasetManifest& m) {
  m.validate();
  write_file_atomic(path, m.to_json());
}

DatasetManifest read_manifest_file(const std::string& path) {
  return DatasetManifest::from_json(read_file(path));
}

StatsReport dataset_stats(const DatasetManifest& m) {
  m.validate();
  StatsReport r;
  r.payload_bytes = m.payload_bytes;
  r.body_bytes = m.payload_bytes - kTokenHeaderBytes;
  r.raw_pixel_bytes = m.raw_pixel_bytes;
  r.bits_per_token = m.bits_per_token;
  r.compression_ratio = double(m.payload_bytes) / double(m.raw_pixel_bytes);
  return r;
}

std::string format_stats(const DatasetManifest& m) {
  StatsReport r = dataset_stats(m);
  std::string out;
  out += strformat("images:            %llu (%dx%d tokens each, K=%d)\n",
                   (unsigned long long)m.num_images, m.grid_h, m.grid_w, m.K);
  out += strformat("bits per token:    %d\n", r.bits_per_token);
  out += strformat("packed body:       %llu bytes\n",
                   (unsigned long long)r.body_bytes);
  out += strformat("payload (w/ hdr):  %llu bytes\n",
                   (unsigned long long)r.payload_bytes);
  out += strformat("raw pixel bytes:   %llu bytes\n",
                   (unsigned long long)r.raw_pixel_bytes);
  out += strformat("compression ratio: %.4f%%\n", 100.0 * r.compression_ratio);
  out += strformat("codebook id:       %s\n", m.codebook_id.c_str());
  out += strformat("payload checksum:  %s\n", m.checksum.c_str());
  return out;
}

}  // namespace stok
