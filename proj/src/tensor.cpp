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

#include "airacl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "airacl/error.hpp"

namespace airacl {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor Tensor::slice(std::size_t begin, std::size_t count) const {
  require(begin + count <= shape_.n, "Tensor::slice out of range");
  Shape s = shape_;
  s.n = count;
  Tensor out(s);
  const std::size_t stride = shape_.per_sample();
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride), count * stride,
              out.data_.begin());
  return out;
}

Tensor Tensor::gather(std::span<const std::size_t> indices) const {
  Shape s = shape_;
  s.n = indices.size();
  Tensor out(s);
  const std::size_t stride = shape_.per_sample();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] < shape_.n, "Tensor::gather index out of range");
    std::memcpy(out.data() + k * stride, data_.data() + indices[k] * stride, stride * sizeof(double));
  }
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape s) const {
  require(s.numel() == numel(), "Tensor::reshaped element count mismatch");
  Tensor out = *this;
  out.shape_ = s;
  return out;
}

Tensor concat(std::span<const Tensor* const> parts) {
  require(!parts.empty(), "concat of zero tensors");
  Shape s = parts.front()->shape();
  s.n = 0;
  for (const Tensor* t : parts) {
    const Shape& ts = t->shape();
    require(ts.c == s.c && ts.h == s.h && ts.w == s.w, "concat per-sample shape mismatch");
    s.n += ts.n;
  }
  Tensor out(s);
  double* dst = out.data();
  for (const Tensor* t : parts) {
    std::memcpy(dst, t->data(), t->numel() * sizeof(double));
    dst += t->numel();
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor* parts[] = {&a, &b};
  return concat(parts);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace airacl
