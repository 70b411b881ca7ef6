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

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "airacl/tensor.hpp"

namespace airacl {

enum class CorruptionKind { gaussian_noise, shot_noise, defocus_blur, brightness, contrast, jpeg_like };

inline constexpr std::array<CorruptionKind, 6> kAllCorruptions{
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::defocus_blur,
    CorruptionKind::brightness,     CorruptionKind::contrast,   CorruptionKind::jpeg_like};

const char* to_string(CorruptionKind k);
CorruptionKind parse_corruption(const std::string& s);

/// Severity 1..5 selects a row of the table below; severity 0 is the identity.
struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;
};

// Severity -> parameter, indexed by severity - 1. Every row gets harsher left to right.
//   gaussian_noise  additive N(0, sigma^2)            sigma
//   shot_noise      Poisson(x * rate) / rate          rate (lower is noisier)
//   defocus_blur    anti-aliased disk kernel          radius in pixels
//   brightness      x + delta                         delta
//   contrast        (x - mean) * c + mean per channel c (lower is flatter)
//   jpeg_like       8x8 DCT quantization              quality (lower is coarser)
inline constexpr std::array<double, 5> kGaussianSigma{0.04, 0.06, 0.08, 0.09, 0.10};
inline constexpr std::array<double, 5> kShotRate{500.0, 250.0, 100.0, 75.0, 50.0};
inline constexpr std::array<double, 5> kDefocusRadius{1.0, 1.25, 1.5, 2.0, 2.5};
inline constexpr std::array<double, 5> kBrightnessDelta{0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr std::array<double, 5> kContrastFactor{0.75, 0.5, 0.4, 0.3, 0.15};
inline constexpr std::array<double, 5> kJpegQuality{80.0, 65.0, 58.0, 50.0, 40.0};

/// Parameter used for `spec`; throws for severities outside 0..5.
double corruption_parameter(const CorruptionSpec& spec);

/// Corrupted copy of a (N, C, H, W) batch, clamped to [0, 1]. Noise draws are
/// seeded per sample.
Tensor corrupt(const Tensor& images, const CorruptionSpec& spec, std::uint64_t seed);

}  // namespace airacl
