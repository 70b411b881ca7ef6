/*
 * Copyright 2026 The airacl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "airacl/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "airacl/error.hpp"
#include "airacl/rng.hpp"

namespace airacl {

namespace {

constexpr std::array<int, 64> kJpegLuma{
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

void defocus(std::span<double> plane, std::size_t h, std::size_t w, double radius) {
  const int r = static_cast<int>(std::ceil(radius));
  std::vector<double> kernel;
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::clamp(radius + 0.5 - std::hypot(dx, dy), 0.0, 1.0);
      kernel.push_back(v);
      total += v;
    }
  const std::vector<double> src(plane.begin(), plane.end());
  const int H = static_cast<int>(h), W = static_cast<int>(w);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      std::size_t t = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx, ++t) {
          const int yy = std::clamp(y + dy, 0, H - 1), xx = std::clamp(x + dx, 0, W - 1);
          acc += kernel[t] * src[static_cast<std::size_t>(yy * W + xx)];
        }
      plane[static_cast<std::size_t>(y * W + x)] = acc / total;
    }
}

void jpeg_like(std::span<double> plane, std::size_t h, std::size_t w, double quality) {
  const double scale = quality < 50.0 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::array<double, 64> q;
  for (std::size_t i = 0; i < 64; ++i)
    q[i] = std::max(1.0, std::floor((kJpegLuma[i] * scale + 50.0) / 100.0));
  std::array<double, 64> basis;  // basis[u * 8 + x] = c(u) cos((2x + 1) u pi / 16)
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x)
      basis[static_cast<std::size_t>(u * 8 + x)] =
          (u == 0 ? std::sqrt(0.125) : 0.5) * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);

  const int H = static_cast<int>(h), W = static_cast<int>(w);
  std::array<double, 64> block, coef;
  for (int by = 0; by < H; by += 8)
    for (int bx = 0; bx < W; bx += 8) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const int yy = std::min(by + y, H - 1), xx = std::min(bx + x, W - 1);
          block[static_cast<std::size_t>(y * 8 + x)] = plane[static_cast<std::size_t>(yy * W + xx)] * 255.0 - 128.0;
        }
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
              s += basis[static_cast<std::size_t>(u * 8 + y)] * basis[static_cast<std::size_t>(v * 8 + x)] *
                   block[static_cast<std::size_t>(y * 8 + x)];
          const auto i = static_cast<std::size_t>(u * 8 + v);
          coef[i] = std::round(s / q[i]) * q[i];
        }
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          if (by + y >= H || bx + x >= W) continue;
          double s = 0.0;
          for (int u = 0; u < 8; ++u)
            for (int v = 0; v < 8; ++v)
              s += basis[static_cast<std::size_t>(u * 8 + y)] * basis[static_cast<std::size_t>(v * 8 + x)] *
                   coef[static_cast<std::size_t>(u * 8 + v)];
          plane[static_cast<std::size_t>((by + y) * W + bx + x)] = (s + 128.0) / 255.0;
        }
    }
}

}  // namespace

const char* to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::defocus_blur: return "defocus_blur";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::jpeg_like: return "jpeg_like";
  }
  return "?";
}

CorruptionKind parse_corruption(const std::string& s) {
  for (CorruptionKind k : kAllCorruptions)
    if (s == to_string(k)) return k;
  throw ConfigError("unknown corruption kind '" + s + "'");
}

double corruption_parameter(const CorruptionSpec& spec) {
  if (spec.severity < 0 || spec.severity > 5)
    throw PreconditionError("corruption severity must be in 1..5 (0 = identity)");
  if (spec.severity == 0) return 0.0;
  const auto i = static_cast<std::size_t>(spec.severity - 1);
  switch (spec.kind) {
    case CorruptionKind::gaussian_noise: return kGaussianSigma[i];
    case CorruptionKind::shot_noise: return kShotRate[i];
    case CorruptionKind::defocus_blur: return kDefocusRadius[i];
    case CorruptionKind::brightness: return kBrightnessDelta[i];
    case CorruptionKind::contrast: return kContrastFactor[i];
    case CorruptionKind::jpeg_like: return kJpegQuality[i];
  }
  throw PreconditionError("unknown corruption kind");
}

Tensor corrupt(const Tensor& images, const CorruptionSpec& spec, std::uint64_t seed) {
  const double p = corruption_parameter(spec);
  Tensor out = images;
  if (spec.severity == 0) return out;
  const Shape& s = images.shape();
  const std::size_t plane = s.h * s.w;
  for (std::size_t n = 0; n < s.n; ++n) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(spec.kind),
                               static_cast<std::uint64_t>(spec.severity), n}));
    for (std::size_t c = 0; c < s.c; ++c) {
      std::span<double> px(out.data() + (n * s.c + c) * plane, plane);
      switch (spec.kind) {
        case CorruptionKind::gaussian_noise: {
          std::normal_distribution<double> noise(0.0, p);
          for (double& v : px) v += noise(rng);
          break;
        }
        case CorruptionKind::shot_noise:
          for (double& v : px) {
            if (v <= 0.0) {
              v = 0.0;
              continue;
            }
            std::poisson_distribution<long> poisson(v * p);
            v = static_cast<double>(poisson(rng)) / p;
          }
          break;
        case CorruptionKind::defocus_blur: defocus(px, s.h, s.w, p); break;
        case CorruptionKind::brightness:
          for (double& v : px) v += p;
          break;
        case CorruptionKind::contrast: {
          double mean = 0.0;
          for (double v : px) mean += v;
          mean /= static_cast<double>(plane);
          for (double& v : px) v = (v - mean) * p + mean;
          break;
        }
        case CorruptionKind::jpeg_like: jpeg_like(px, s.h, s.w, p); break;
      }
      for (double& v : px) v = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace airacl
