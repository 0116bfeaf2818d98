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

#ifndef STOK_DATA_HPP_
#define STOK_DATA_HPP_

#include <string>

#include "stok/image.hpp"

namespace stok {

// Procedural labeled images: a class is a (shape, palette) combination
// rendered over a textured gradient background with per-image jitter in
// position, scale, texture phase, brightness and pixel noise. The texture
// and shape edges make most patches left/right asymmetric on purpose.
struct ToySpec {
  int num = 1000;
  int classes = 10;
  int size = 64;
  std::uint64_t seed = 0;
};

LabeledImages make_toy_dataset(const ToySpec& spec);

// Where images come from: "toy" (procedural), "dir" (class-per-directory
// of .ppm files) or "simg" (raw archive).
struct ImagesSource {
  std::string kind;  // toy | dir | simg
  std::string path;  // dir/simg only
  ToySpec toy;       // toy only

  void validate() const;
};

LabeledImages load_images(const ImagesSource& src);

}  // namespace stok

#endif  // STOK_DATA_HPP_
