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

#include <cstdint>
#include <optional>
#include <utility>

#include "airacl/tensor.hpp"

namespace airacl {

/// One image (pixels shaped (1, C, H, W), values in [0, 1]) and an optional class id.
struct Sample {
  Tensor pixels;
  std::optional<int> label;
};

/// Upper bounds of each transformation at full strength. Every probability and
/// magnitude below is multiplied by the strength mu before use, so mu = 0 is
/// the identity.
struct AugmentationLimits {
  double crop_min_scale = 0.08;      // area fraction lower bound at mu = 1
  double crop_log_ratio = 0.2876821; // log(4/3)
  double flip_prob = 0.5;
  double jitter_prob = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double grayscale_prob = 0.2;
};

/// Random crop+resize, horizontal flip, color jitter and grayscale, applied in
/// that order with parameters drawn from a seeded stream.
class AugmentationPipeline {
 public:
  AugmentationPipeline() = default;
  explicit AugmentationPipeline(AugmentationLimits limits) : limits_(limits) {}

  const AugmentationLimits& limits() const { return limits_; }

  /// tau(x) for the tau selected by `seed` at strength `mu`.
  Sample apply(const Sample& x, double mu, std::uint64_t seed) const;

 private:
  AugmentationLimits limits_;
};

Sample augment(const Sample& x, double mu, std::uint64_t seed);

/// (tau_i(x), tau_j(x)). Equal seeds would make a degenerate positive pair and
/// are rejected.
std::pair<Sample, Sample> make_view_pair(const Sample& x, double mu, std::uint64_t seed_i,
                                         std::uint64_t seed_j);

/// Bilinear resample of the window (top, left, height, width), given in source
/// pixel units, onto the full (H, W) grid.
Tensor crop_resize(const Tensor& img, double top, double left, double height, double width);

}  // namespace airacl
