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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace airacl {

/// NCHW shape. Fully-connected activations use H = W = 1.
struct Shape {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t per_sample() const { return c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense double-precision NCHW tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  std::span<double> sample(std::size_t n) {
    return {data_.data() + n * shape_.per_sample(), shape_.per_sample()};
  }
  std::span<const double> sample(std::size_t n) const {
    return {data_.data() + n * shape_.per_sample(), shape_.per_sample()};
  }

  /// Copy of samples [begin, begin + count).
  Tensor slice(std::size_t begin, std::size_t count) const;
  /// Gather samples by index.
  Tensor gather(std::span<const std::size_t> indices) const;
  void fill(double v);
  /// Same data, different shape; element count must match.
  Tensor reshaped(Shape s) const;

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Stacks tensors along N; all per-sample shapes must match.
Tensor concat(std::span<const Tensor* const> parts);
Tensor concat(const Tensor& a, const Tensor& b);

/// Largest |a - b| over all elements.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace airacl
