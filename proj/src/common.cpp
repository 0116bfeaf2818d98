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

#include "stok/common.hpp"

#include <openssl/evp.h>

#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace stok {

namespace fs = std::filesystem;

std::string strformat(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list args2;
  va_copy(args2, args);
  int n = std::vsnprintf(nullptr, 0, fmt, args);
  va_end(args);
  std::string out(n > 0 ? std::size_t(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args2);
  va_end(args2);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) !=
      1) {
    throw Error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

void ByteWriter::put_u16(std::uint16_t v) {
  put_u8(std::uint8_t(v));
  put_u8(std::uint8_t(v >> 8));
}
void ByteWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) put_u8(std::uint8_t(v >> (8 * i)));
}
void ByteWriter::put_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) put_u8(std::uint8_t(v >> (8 * i)));
}
void ByteWriter::put_f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(bits);
}
void ByteWriter::put_bytes(std::span<const std::uint8_t> b) {
  buf_.append(reinterpret_cast<const char*>(b.data()), b.size());
}
void ByteWriter::put_bytes(std::string_view b) { buf_.append(b); }

void ByteReader::need(std::size_t n) {
  if (pos_ + n > data_.size()) {
    throw IoError(strformat(
        "truncated input: need %zu bytes at byte offset %zu, only %zu remain",
        n, pos_, data_.size() - pos_));
  }
}
std::uint8_t ByteReader::get_u8() {
  need(1);
  return data_[pos_++];
}
std::uint16_t ByteReader::get_u16() {
  need(2);
  std::uint16_t v = std::uint16_t(data_[pos_]) |
                    (std::uint16_t(data_[pos_ + 1]) << 8);
  pos_ += 2;
  return v;
}
std::uint32_t ByteReader::get_u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}
std::uint64_t ByteReader::get_u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}
float ByteReader::get_f32() {
  std::uint32_t bits = get_u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void BitWriter::put(std::uint32_t value, int bits) {
  acc_ |= std::uint64_t(value) << nbits_;
  nbits_ += bits;
  while (nbits_ >= 8) {
    out_.push_back(char(std::uint8_t(acc_)));
    acc_ >>= 8;
    nbits_ -= 8;
  }
}

void BitWriter::finish() {
  if (nbits_ > 0) {
    out_.push_back(char(std::uint8_t(acc_)));
    acc_ = 0;
    nbits_ = 0;
  }
}

std::uint32_t BitReader::get(int bits) {
  while (nbits_ < bits) {
    if (pos_ >= data_.size()) {
      throw IoError(strformat("bit stream exhausted at byte offset %zu", pos_));
    }
    acc_ |= std::uint64_t(data_[pos_++]) << nbits_;
    nbits_ += 8;
  }
  std::uint32_t v = std::uint32_t(acc_ & ((std::uint64_t(1) << bits) - 1));
  acc_ >>= bits;
  nbits_ -= bits;
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return data;
}

void write_file_atomic(const std::string& path, std::string_view data) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + tmp.string());
    out.write(data.data(), std::streamsize(data.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, p);
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

bool file_exists(const std::string& path) { return fs::exists(path); }

}  // namespace stok
