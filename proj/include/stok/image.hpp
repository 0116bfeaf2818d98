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

#ifndef STOK_IMAGE_HPP_
#define STOK_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "stok/common.hpp"

namespace stok {

// RGB image, HWC layout, float values in [0, 1]. Source material is 8-bit,
// so one pixel accounts for 3 bytes of raw storage.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> pix;  // h*w*3

  Image() = default;
  Image(int h_, int w_, float fill = 0.f)
      : h(h_), w(w_), pix(std::size_t(h_) * w_ * 3, fill) {}

  float& at(int y, int x, int c) { return pix[(std::size_t(y) * w + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return pix[(std::size_t(y) * w + x) * 3 + c];
  }
  std::uint64_t raw_bytes() const { return std::uint64_t(h) * w * 3; }
};

// Binary PPM (P6, maxval 255).
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

struct LabeledImages {
  std::vector<Image> images;
  std::vector<std::uint16_t> labels;
  std::vector<std::string> class_names;
  std::uint64_t raw_pixel_bytes() const;
};

// Raw image archive: magic "SIMG", version u8=1, count u64, h u16, w u16,
// little-endian; then per image a u16 label followed by h*w*3 bytes of RGB.
void write_simg(const std::string& path, const LabeledImages& data);
LabeledImages read_simg(const std::string& path);

// Class-per-directory layout: each subdirectory of `root` is one class
// (sorted by name) containing .ppm images (sorted by name).
LabeledImages load_image_dir(const std::string& root);

}  // namespace stok

#endif  // STOK_IMAGE_HPP_
