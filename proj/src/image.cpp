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

#include "stok/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace stok {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_u8(float v) {
  float x = std::clamp(v, 0.f, 1.f) * 255.f;
  return std::uint8_t(std::lround(x));
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::string data = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < data.size() &&
           !std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    }
    if (start == pos) throw DataError("malformed ppm header: " + path);
    return data.substr(start, pos - start);
  };
  if (token() != "P6") throw DataError("not a P6 ppm: " + path);
  int w = std::stoi(token());
  int h = std::stoi(token());
  int maxval = std::stoi(token());
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw DataError("unsupported ppm dimensions or maxval: " + path);
  }
  ++pos;  // single whitespace after maxval
  std::size_t need = std::size_t(h) * w * 3;
  if (data.size() - pos < need) throw DataError("truncated ppm: " + path);
  Image img(h, w);
  for (std::size_t i = 0; i < need; ++i) {
    img.pix[i] = float(std::uint8_t(data[pos + i])) / 255.f;
  }
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  std::string out = strformat("P6\n%d %d\n255\n", img.w, img.h);
  out.reserve(out.size() + img.pix.size());
  for (float v : img.pix) out.push_back(char(to_u8(v)));
  write_file_atomic(path, out);
}

std::uint64_t LabeledImages::raw_pixel_bytes() const {
  std::uint64_t total = 0;
  for (const auto& img : images) total += img.raw_bytes();
  return total;
}

void write_simg(const std::string& path, const LabeledImages& data) {
  if (data.images.size() != data.labels.size()) {
    throw DataError("simg: image/label count mismatch");
  }
  int h = data.images.empty() ? 0 : data.images[0].h;
  int w = data.images.empty() ? 0 : data.images[0].w;
  ByteWriter bw;
  bw.put_bytes(std::string_view("SIMG"));
  bw.put_u8(1);
  bw.put_u64(data.images.size());
  bw.put_u16(std::uint16_t(h));
  bw.put_u16(std::uint16_t(w));
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const Image& img = data.images[i];
    if (img.h != h || img.w != w) {
      throw DataError(strformat("simg: image %zu has shape %dx%d, expected %dx%d",
                                i, img.h, img.w, h, w));
    }
    bw.put_u16(data.labels[i]);
    for (float v : img.pix) bw.put_u8(to_u8(v));
  }
  write_file_atomic(path, bw.str());
}

LabeledImages read_simg(const std::string& path) {
  std::string data = read_file(path);
  ByteReader br(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  char magic[4];
  for (char& c : magic) c = char(br.get_u8());
  if (std::string_view(magic, 4) != "SIMG") {
    throw DataError("bad simg magic at byte 0: " + path);
  }
  if (br.get_u8() != 1) throw DataError("unsupported simg version: " + path);
  std::uint64_t count = br.get_u64();
  int h = br.get_u16();
  int w = br.get_u16();
  LabeledImages out;
  out.images.reserve(count);
  out.labels.reserve(count);
  std::uint16_t max_label = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint16_t label = br.get_u16();
    max_label = std::max(max_label, label);
    Image img(h, w);
    for (float& v : img.pix) v = float(br.get_u8()) / 255.f;
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  for (int c = 0; c <= int(count ? max_label : 0); ++c) {
    out.class_names.push_back(strformat("class_%02d", c));
  }
  return out;
}

LabeledImages load_image_dir(const std::string& root) {
  if (!fs::is_directory(root)) {
    throw DataError("image folder not found or not a directory: " + root);
  }
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    throw DataError("image folder has no class subdirectories: " + root);
  }
  LabeledImages out;
  out.class_names = classes;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / classes[c])) {
      if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out.images.push_back(read_ppm(f));
      out.labels.push_back(std::uint16_t(c));
    }
  }
  if (out.images.empty()) {
    throw DataError("image folder contains no .ppm files: " + root);
  }
  return out;
}

}  // namespace stok
