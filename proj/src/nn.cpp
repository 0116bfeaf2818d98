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

#include "stok/nn.hpp"

#include <cmath>
#include <cstring>

namespace stok::nn {

namespace flops {

namespace {
thread_local std::uint64_t counter = 0;
}

std::uint64_t count() { return counter; }
void reset() { counter = 0; }
void add(std::uint64_t n) { counter += n; }

}  // namespace flops

double cosine_lr(double base, std::int64_t step, std::int64_t total_steps,
                 std::int64_t warmup_steps, double min_lr) {
  if (total_steps <= 0) throw DataError("cosine_lr: total_steps must be > 0");
  if (warmup_steps > 0 && step < warmup_steps) {
    return base * double(step + 1) / double(warmup_steps);
  }
  double span = double(std::max<std::int64_t>(1, total_steps - warmup_steps));
  double progress = double(step - warmup_steps) / span;
  progress = std::clamp(progress, 0.0, 1.0);
  const double pi = std::acos(-1.0);
  return min_lr + (base - min_lr) * 0.5 * (1.0 + std::cos(pi * progress));
}

namespace detail {

void checkpoint_write(const std::string& path, const std::string& magic,
                      const nlohmann::json& config,
                      const std::vector<std::tuple<std::string, int, int>>& manifest,
                      const std::vector<float>& payload) {
  if (magic.size() != 4) throw Error("checkpoint: magic must be 4 bytes");
  nlohmann::json meta;
  meta["config"] = config;
  auto& params = meta["params"] = nlohmann::json::array();
  for (const auto& [name, rows, cols] : manifest) {
    params.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
  }
  std::string meta_str = meta.dump();
  ByteWriter bw;
  bw.put_bytes(magic);
  bw.put_u8(1);
  bw.put_u32(std::uint32_t(meta_str.size()));
  bw.put_bytes(meta_str);
  for (float v : payload) bw.put_f32(v);
  write_file_atomic(path, bw.str());
}

RawCheckpoint checkpoint_read(const std::string& path, const std::string& magic) {
  std::string data = read_file(path);
  ByteReader br(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  char got[4];
  for (char& c : got) c = char(br.get_u8());
  if (std::string_view(got, 4) != magic) {
    throw DataError(strformat("checkpoint %s: bad magic (want %s)", path.c_str(),
                              magic.c_str()));
  }
  if (br.get_u8() != 1) {
    throw DataError("checkpoint " + path + ": unsupported version");
  }
  std::uint32_t len = br.get_u32();
  if (br.remaining() < len) {
    throw DataError("checkpoint " + path + ": truncated metadata block");
  }
  std::string meta_str = data.substr(br.offset(), len);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  RawCheckpoint raw;
  raw.config = meta.at("config");
  std::size_t total = 0;
  for (const auto& p : meta.at("params")) {
    int rows = p.at("rows").get<int>();
    int cols = p.at("cols").get<int>();
    raw.manifest.emplace_back(p.at("name").get<std::string>(), rows, cols);
    total += std::size_t(rows) * cols;
  }
  std::size_t payload_off = br.offset() + len;
  if (data.size() - payload_off != total * 4) {
    throw DataError(strformat(
        "checkpoint %s: payload is %zu bytes, manifest needs %zu", path.c_str(),
        data.size() - payload_off, total * 4));
  }
  raw.payload.resize(total);
  std::memcpy(raw.payload.data(), data.data() + payload_off, total * 4);
  return raw;
}

}  // namespace detail

nlohmann::json read_checkpoint_config(const std::string& path,
                                      const std::string& magic) {
  return detail::checkpoint_read(path, magic).config;
}

}  // namespace stok::nn
