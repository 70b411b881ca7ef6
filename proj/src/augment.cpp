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

#include "airacl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "airacl/error.hpp"
#include "airacl/rng.hpp"

namespace airacl {

namespace {

void check_pixels(const Tensor& t) {
  require(t.shape().n == 1, "augment: expected a single sample, got shape " + t.shape().str());
  for (double v : t.values())
    require(v >= 0.0 && v <= 1.0 && std::isfinite(v), "augment: pixel outside [0,1]");
}

void clamp01(Tensor& t) {
  for (double& v : t.values()) v = std::clamp(v, 0.0, 1.0);
}

double luma(const Tensor& t, std::size_t y, std::size_t x) {
  return 0.299 * t.at(0, 0, y, x) + 0.587 * t.at(0, 1, y, x) + 0.114 * t.at(0, 2, y, x);
}

}  // namespace

Tensor crop_resize(const Tensor& img, double top, double left, double height, double width) {
  const Shape& s = img.shape();
  Tensor out(s);
  const double sy = height / static_cast<double>(s.h);
  const double sx = width / static_cast<double>(s.w);
  const auto sample_axis = [](double pos, std::size_t extent, std::size_t& i0, std::size_t& i1,
                              double& frac) {
    pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
    i0 = static_cast<std::size_t>(std::floor(pos));
    i1 = std::min(i0 + 1, extent - 1);
    frac = pos - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < s.h; ++y) {
    std::size_t y0, y1;
    double fy;
    sample_axis(top + (static_cast<double>(y) + 0.5) * sy - 0.5, s.h, y0, y1, fy);
    for (std::size_t x = 0; x < s.w; ++x) {
      std::size_t x0, x1;
      double fx;
      sample_axis(left + (static_cast<double>(x) + 0.5) * sx - 0.5, s.w, x0, x1, fx);
      for (std::size_t c = 0; c < s.c; ++c) {
        const double a = img.at(0, c, y0, x0) * (1 - fx) + img.at(0, c, y0, x1) * fx;
        const double b = img.at(0, c, y1, x0) * (1 - fx) + img.at(0, c, y1, x1) * fx;
        out.at(0, c, y, x) = a * (1 - fy) + b * fy;
      }
    }
  }
  return out;
}

Sample AugmentationPipeline::apply(const Sample& x, double mu, std::uint64_t seed) const {
  require(mu >= 0.0 && mu <= 1.0, "augment: strength must lie in [0,1]");
  check_pixels(x.pixels);
  Sample out = x;
  if (mu == 0.0) return out;

  Rng rng(seed);
  const Shape& s = x.pixels.shape();
  const AugmentationLimits& L = limits_;
  // All draws happen unconditionally so the stream layout is independent of mu.
  const double u_crop = uniform01(rng);
  const double area = uniform(rng, 1.0 - mu * (1.0 - L.crop_min_scale), 1.0);
  const double log_ratio = uniform(rng, -mu * L.crop_log_ratio, mu * L.crop_log_ratio);
  const double u_top = uniform01(rng);
  const double u_left = uniform01(rng);
  const double u_flip = uniform01(rng);
  const double u_jitter = uniform01(rng);
  const double brightness = uniform(rng, 1.0 - mu * L.brightness, 1.0 + mu * L.brightness);
  const double contrast = uniform(rng, 1.0 - mu * L.contrast, 1.0 + mu * L.contrast);
  const double saturation = uniform(rng, 1.0 - mu * L.saturation, 1.0 + mu * L.saturation);
  const double u_gray = uniform01(rng);

  Tensor& img = out.pixels;
  if (u_crop < mu) {
    const double ratio = std::exp(log_ratio);
    const double h_full = static_cast<double>(s.h), w_full = static_cast<double>(s.w);
    const double ch = std::min(h_full, std::sqrt(area / ratio) * h_full);
    const double cw = std::min(w_full, std::sqrt(area * ratio) * w_full);
    img = crop_resize(img, u_top * (h_full - ch), u_left * (w_full - cw), ch, cw);
  }
  if (u_flip < mu * L.flip_prob) {
    Tensor flipped(s);
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx)
          flipped.at(0, c, y, xx) = img.at(0, c, y, s.w - 1 - xx);
    img = std::move(flipped);
  }
  if (u_jitter < mu * L.jitter_prob) {
    for (double& v : img.values()) v *= brightness;
    clamp01(img);
    double mean = 0.0;
    for (double v : img.values()) mean += v;
    mean /= static_cast<double>(img.numel());
    for (double& v : img.values()) v = mean + contrast * (v - mean);
    clamp01(img);
    if (s.c == 3) {
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          const double g = luma(img, y, xx);
          for (std::size_t c = 0; c < 3; ++c)
            img.at(0, c, y, xx) = g + saturation * (img.at(0, c, y, xx) - g);
        }
      clamp01(img);
    }
  }
  if (s.c == 3 && u_gray < mu * L.grayscale_prob) {
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t xx = 0; xx < s.w; ++xx) {
        const double g = luma(img, y, xx);
        for (std::size_t c = 0; c < 3; ++c) img.at(0, c, y, xx) = g;
      }
  }
  clamp01(img);
  return out;
}

Sample augment(const Sample& x, double mu, std::uint64_t seed) {
  static const AugmentationPipeline pipeline;
  return pipeline.apply(x, mu, seed);
}

std::pair<Sample, Sample> make_view_pair(const Sample& x, double mu, std::uint64_t seed_i,
                                         std::uint64_t seed_j) {
  require(seed_i != seed_j, "make_view_pair: equal seeds give a degenerate positive pair");
  return {augment(x, mu, seed_i), augment(x, mu, seed_j)};
}

}  // namespace airacl
