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

// Hot loops of the encoder and the clustering step. Every kernel exists twice:
// `serial` is the direct textbook loop nest and serves as the reference in
// tests; `parallel` is what the library calls (OpenMP over samples/channels,
// im2col + GEMM for convolutions). Both must agree to rounding.

#include <cstddef>
#include <span>
#include <vector>

#include "airacl/tensor.hpp"

namespace airacl::kernels {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  std::size_t out_extent(std::size_t in) const { return (in + 2 * pad - kernel) / stride + 1; }
  std::size_t weight_count() const { return out_channels * in_channels * kernel * kernel; }
  Shape out_shape(const Shape& in) const {
    return {in.n, out_channels, out_extent(in.h), out_extent(in.w)};
  }
};

/// Batch statistics captured by a training-mode normalization pass.
struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;     // biased variance, used for normalization
  std::vector<double> invstd;  // 1 / sqrt(var + eps)
};

namespace serial {

void conv2d_forward(const Tensor& in, std::span<const double> weight, const ConvGeometry& g,
                    Tensor& out);
void conv2d_backward_input(const Tensor& grad_out, std::span<const double> weight,
                           const ConvGeometry& g, Tensor& grad_in);
/// Accumulates into grad_weight.
void conv2d_backward_weight(const Tensor& in, const Tensor& grad_out, const ConvGeometry& g,
                            std::span<double> grad_weight);

void batchnorm_forward_train(const Tensor& in, std::span<const double> gamma,
                             std::span<const double> beta, double eps, Tensor& out,
                             Tensor& xhat, BatchNormStats& stats);
void batchnorm_forward_eval(const Tensor& in, std::span<const double> gamma,
                            std::span<const double> beta, std::span<const double> running_mean,
                            std::span<const double> running_var, double eps, Tensor& out);
/// Training-mode backward. Accumulates grad_gamma / grad_beta.
void batchnorm_backward_train(const Tensor& grad_out, const Tensor& xhat,
                              std::span<const double> gamma, std::span<const double> invstd,
                              Tensor& grad_in, std::span<double> grad_gamma,
                              std::span<double> grad_beta);

/// Nearest-center assignment; points and centers are row-major (rows x dim).
void assign_nearest(std::span<const double> points, std::span<const double> centers,
                    std::size_t dim, std::span<int> labels, std::span<double> sq_dist);

}  // namespace serial

namespace parallel {

void conv2d_forward(const Tensor& in, std::span<const double> weight, const ConvGeometry& g,
                    Tensor& out);
void conv2d_backward_input(const Tensor& grad_out, std::span<const double> weight,
                           const ConvGeometry& g, Tensor& grad_in);
void conv2d_backward_weight(const Tensor& in, const Tensor& grad_out, const ConvGeometry& g,
                            std::span<double> grad_weight);

void batchnorm_forward_train(const Tensor& in, std::span<const double> gamma,
                             std::span<const double> beta, double eps, Tensor& out,
                             Tensor& xhat, BatchNormStats& stats);
void batchnorm_forward_eval(const Tensor& in, std::span<const double> gamma,
                            std::span<const double> beta, std::span<const double> running_mean,
                            std::span<const double> running_var, double eps, Tensor& out);
void batchnorm_backward_train(const Tensor& grad_out, const Tensor& xhat,
                              std::span<const double> gamma, std::span<const double> invstd,
                              Tensor& grad_in, std::span<double> grad_gamma,
                              std::span<double> grad_beta);

void assign_nearest(std::span<const double> points, std::span<const double> centers,
                    std::size_t dim, std::span<int> labels, std::span<double> sq_dist);

}  // namespace parallel

}  // namespace airacl::kernels
