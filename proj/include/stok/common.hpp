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

#ifndef STOK_COMMON_HPP_
#define STOK_COMMON_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stok {

// Error taxonomy. The CLI maps these onto process exit codes
// (config 2, missing prerequisite 3, data/IO 4).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct PrereqError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct IoError : DataError {
  using DataError::DataError;
};

// Minimal printf-style formatter for error messages and logs.
std::string strformat(const char* fmt, ...);

// --- Seeding -----------------------------------------------------------

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a master seed and up to three
// stream coordinates (e.g. epoch, step, sample index). This is the
// stream-splitting contract: workers processing disjoint sample indices
// draw from disjoint streams regardless of scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// --- Hashing -----------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

// --- Little-endian byte IO ---------------------------------------------

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(char(v)); }
  void put_u16(std::uint16_t v);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f32(float v);
  void put_bytes(std::span<const std::uint8_t> b);
  void put_bytes(std::string_view b);
  const std::string& str() const { return buf_; }
  std::string take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t get_u8();
  std::uint16_t get_u16();
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  float get_f32();
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n);
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// Fixed-width bit packing, least-significant bit first within each byte.
class BitWriter {
 public:
  void put(std::uint32_t value, int bits);
  // Flushes the partial byte (zero padded).
  void finish();
  const std::string& str() const { return out_; }

 private:
  std::string out_;
  std::uint64_t acc_ = 0;
  int nbits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint32_t get(int bits);

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint64_t acc_ = 0;
  int nbits_ = 0;
};

// --- Files --------------------------------------------------------------

std::string read_file(const std::string& path);
// Writes via a temp file in the same directory followed by rename.
void write_file_atomic(const std::string& path, std::string_view data);
void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace stok

#endif  // STOK_COMMON_HPP_
