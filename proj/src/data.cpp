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

#include "stok/data.hpp"

#include <algorithm>
#include <cmath>

namespace stok {

namespace {

struct Rgb {
  float r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
  double c = v * s;
  double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  double m = v - c;
  double r = 0, g = 0, b = 0;
  if (h < 60) {
    r = c; g = x;
  } else if (h < 120) {
    r = x; g = c;
  } else if (h < 180) {
    g = c; b = x;
  } else if (h < 240) {
    g = x; b = c;
  } else if (h < 300) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  return {float(r + m), float(g + m), float(b + m)};
}

enum class Shape { kCircle, kSquare, kTriangle, kCross, kRing };

bool inside_shape(Shape shape, double dx, double dy, double radius, int flip) {
  double ax = std::abs(dx), ay = std::abs(dy);
  switch (shape) {
    case Shape::kCircle:
      return dx * dx + dy * dy <= radius * radius;
    case Shape::kSquare:
      return ax <= radius * 0.85 && ay <= radius * 0.85;
    case Shape::kTriangle: {
      // Right triangle pointing left or right; asymmetric under hflip.
      double u = flip ? -dx : dx;
      return ay <= radius && u >= -radius * 0.6 &&
             ay <= radius * (1.0 - (u + radius * 0.6) / (1.6 * radius));
    }
    case Shape::kCross:
      return (ax <= radius * 0.3 && ay <= radius) ||
             (ay <= radius * 0.3 && ax <= radius);
    case Shape::kRing: {
      double rr = dx * dx + dy * dy;
      return rr <= radius * radius && rr >= 0.45 * 0.45 * radius * radius;
    }
  }
  return false;
}

}  // namespace

LabeledImages make_toy_dataset(const ToySpec& spec) {
  if (spec.num <= 0 || spec.classes < 2 || spec.size < 16) {
    throw DataError("toy dataset: need num > 0, classes >= 2, size >= 16");
  }
  LabeledImages out;
  out.images.reserve(spec.num);
  out.labels.reserve(spec.num);
  for (int c = 0; c < spec.classes; ++c) {
    out.class_names.push_back(strformat("toy_%02d", c));
  }
  const int sz = spec.size;
  for (int i = 0; i < spec.num; ++i) {
    Rng rng = make_rng(derive_seed(spec.seed, 0x70a1, std::uint64_t(i)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int cls = i % spec.classes;
    Shape shape = Shape(cls % 5);
    double fg_hue = 360.0 * cls / spec.classes + 12.0 * (uni(rng) - 0.5);
    double bg_hue = fg_hue + 150.0 + 20.0 * (uni(rng) - 0.5);

    // Background: oblique two-tone gradient plus a stripe texture.
    Rgb bg_a = hsv_to_rgb(bg_hue, 0.55, 0.45 + 0.2 * uni(rng));
    Rgb bg_b = hsv_to_rgb(bg_hue + 40.0, 0.5, 0.75);
    double gdir = 2.0 * 3.14159265358979 * uni(rng);
    double gx = std::cos(gdir), gy = std::sin(gdir);
    double stripe_period = 4.0 + 5.0 * uni(rng);
    double stripe_angle = 2.0 * 3.14159265358979 * uni(rng);
    double sx = std::cos(stripe_angle), sy = std::sin(stripe_angle);
    double stripe_phase = stripe_period * uni(rng);
    double stripe_amp = 0.08 + 0.06 * uni(rng);

    Rgb fg = hsv_to_rgb(fg_hue, 0.85, 0.95);
    double cx = sz * (0.5 + 0.25 * (uni(rng) - 0.5) * 2.0);
    double cy = sz * (0.5 + 0.25 * (uni(rng) - 0.5) * 2.0);
    double radius = sz * (0.20 + 0.12 * uni(rng));
    int flip = uni(rng) < 0.5 ? 0 : 1;
    double brightness = 0.1 * (uni(rng) - 0.5);

    std::normal_distribution<float> noise(0.f, 0.02f);
    Image img(sz, sz);
    for (int y = 0; y < sz; ++y) {
      for (int x = 0; x < sz; ++x) {
        double t = 0.5 + 0.5 * ((x - sz / 2.0) * gx + (y - sz / 2.0) * gy) / (sz * 0.7);
        t = std::clamp(t, 0.0, 1.0);
        double stripe =
            stripe_amp * std::sin(2.0 * 3.14159265358979 *
                                  ((x * sx + y * sy) + stripe_phase) / stripe_period);
        Rgb px{float((1 - t) * bg_a.r + t * bg_b.r + stripe),
               float((1 - t) * bg_a.g + t * bg_b.g + stripe),
               float((1 - t) * bg_a.b + t * bg_b.b - stripe)};
        if (inside_shape(shape, x - cx, y - cy, radius, flip)) px = fg;
        img.at(y, x, 0) = std::clamp(px.r + float(brightness) + noise(rng), 0.f, 1.f);
        img.at(y, x, 1) = std::clamp(px.g + float(brightness) + noise(rng), 0.f, 1.f);
        img.at(y, x, 2) = std::clamp(px.b + float(brightness) + noise(rng), 0.f, 1.f);
      }
    }
    out.images.push_back(std::move(img));
    out.labels.push_back(std::uint16_t(cls));
  }
  return out;
}

void ImagesSource::validate() const {
  if (kind != "toy" && kind != "dir" && kind != "simg") {
    throw ConfigError("images: kind must be toy, dir or simg");
  }
  if (kind != "toy" && path.empty()) {
    throw ConfigError("images: '" + kind + "' source needs a path");
  }
}

LabeledImages load_images(const ImagesSource& src) {
  src.validate();
  if (src.kind == "toy") return make_toy_dataset(src.toy);
  if (src.kind == "dir") {
    if (!file_exists(src.path)) {
      throw PrereqError("image folder does not exist: " + src.path);
    }
    return load_image_dir(src.path);
  }
  if (!file_exists(src.path)) {
    throw PrereqError("image archive does not exist: " + src.path);
  }
  return read_simg(src.path);
}

}  // namespace stok
