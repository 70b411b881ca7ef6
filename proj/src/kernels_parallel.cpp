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

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "airacl/error.hpp"
#include "airacl/kernels.hpp"

namespace airacl::kernels::parallel {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

void check_conv(const Shape& in, std::size_t weight_size, const ConvGeometry& g) {
  require(in.c == g.in_channels, "conv2d: input has " + std::to_string(in.c) +
                                     " channels, expected " + std::to_string(g.in_channels));
  require(weight_size == g.weight_count(), "conv2d: weight size mismatch");
  require(in.h + 2 * g.pad >= g.kernel && in.w + 2 * g.pad >= g.kernel,
          "conv2d: input smaller than kernel");
}

// col is (C*k*k) x (oh*ow), row-major.
void im2col(const double* img, const Shape& s, const ConvGeometry& g, std::size_t oh,
            std::size_t ow, double* col) {
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t cols = oh * ow;
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double* row = col + (c * kk + ky * g.kernel + kx) * cols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(s.h) &&
                                ix < static_cast<std::ptrdiff_t>(s.w);
            row[oy * ow + ox] =
                inside ? img[(c * s.h + static_cast<std::size_t>(iy)) * s.w +
                             static_cast<std::size_t>(ix)]
                       : 0.0;
          }
        }
      }
}

void col2im_add(const double* col, const Shape& s, const ConvGeometry& g, std::size_t oh,
                std::size_t ow, double* img) {
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t cols = oh * ow;
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* row = col + (c * kk + ky * g.kernel + kx) * cols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.h)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.w)) continue;
            img[(c * s.h + static_cast<std::size_t>(iy)) * s.w + static_cast<std::size_t>(ix)] +=
                row[oy * ow + ox];
          }
        }
      }
}

}  // namespace

void conv2d_forward(const Tensor& in, std::span<const double> weight, const ConvGeometry& g,
                    Tensor& out) {
  const Shape& s = in.shape();
  check_conv(s, weight.size(), g);
  out = Tensor(g.out_shape(s));
  const Shape& o = out.shape();
  const std::size_t rows = s.c * g.kernel * g.kernel;
  const std::size_t cols = o.h * o.w;
  ConstRowMap w(weight.data(), static_cast<Eigen::Index>(o.c), static_cast<Eigen::Index>(rows));
  const auto count = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel
  {
    std::vector<double> col(rows * cols);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < count; ++n) {
      const auto ni = static_cast<std::size_t>(n);
      im2col(in.data() + ni * s.per_sample(), s, g, o.h, o.w, col.data());
      ConstRowMap cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      RowMap om(out.data() + ni * o.per_sample(), static_cast<Eigen::Index>(o.c),
                static_cast<Eigen::Index>(cols));
      om.noalias() = w * cm;
    }
  }
}

void conv2d_backward_input(const Tensor& grad_out, std::span<const double> weight,
                           const ConvGeometry& g, Tensor& grad_in) {
  const Shape& o = grad_out.shape();
  const Shape& s = grad_in.shape();
  check_conv(s, weight.size(), g);
  grad_in.fill(0.0);
  const std::size_t rows = s.c * g.kernel * g.kernel;
  const std::size_t cols = o.h * o.w;
  ConstRowMap w(weight.data(), static_cast<Eigen::Index>(o.c), static_cast<Eigen::Index>(rows));
  const auto count = static_cast<std::ptrdiff_t>(o.n);
#pragma omp parallel
  {
    RowMatrix gcol(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < count; ++n) {
      const auto ni = static_cast<std::size_t>(n);
      ConstRowMap gm(grad_out.data() + ni * o.per_sample(), static_cast<Eigen::Index>(o.c),
                     static_cast<Eigen::Index>(cols));
      gcol.noalias() = w.transpose() * gm;
      col2im_add(gcol.data(), s, g, o.h, o.w, grad_in.data() + ni * s.per_sample());
    }
  }
}

void conv2d_backward_weight(const Tensor& in, const Tensor& grad_out, const ConvGeometry& g,
                            std::span<double> grad_weight) {
  const Shape& s = in.shape();
  const Shape& o = grad_out.shape();
  check_conv(s, grad_weight.size(), g);
  const std::size_t rows = s.c * g.kernel * g.kernel;
  const std::size_t cols = o.h * o.w;
  const std::size_t total = cols * s.n;
  // Lay every sample side by side so the reduction over the batch is one GEMM
  // with a fixed summation order.
  RowMatrix col_all(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(total));
  RowMatrix grad_all(static_cast<Eigen::Index>(o.c), static_cast<Eigen::Index>(total));
  const auto count = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel
  {
    std::vector<double> col(rows * cols);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < count; ++n) {
      const auto ni = static_cast<std::size_t>(n);
      im2col(in.data() + ni * s.per_sample(), s, g, o.h, o.w, col.data());
      for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(col.data() + r * cols, cols,
                    col_all.data() + r * total + ni * cols);
      for (std::size_t c = 0; c < o.c; ++c)
        std::copy_n(grad_out.data() + ni * o.per_sample() + c * cols, cols,
                    grad_all.data() + c * total + ni * cols);
    }
  }
  RowMap gw(grad_weight.data(), static_cast<Eigen::Index>(o.c), static_cast<Eigen::Index>(rows));
  gw.noalias() += grad_all * col_all.transpose();
}

void batchnorm_forward_train(const Tensor& in, std::span<const double> gamma,
                             std::span<const double> beta, double eps, Tensor& out,
                             Tensor& xhat, BatchNormStats& stats) {
  const Shape& s = in.shape();
  require(gamma.size() == s.c && beta.size() == s.c, "batchnorm: parameter size mismatch");
  out = Tensor(s);
  xhat = Tensor(s);
  stats.mean.assign(s.c, 0.0);
  stats.var.assign(s.c, 0.0);
  stats.invstd.assign(s.c, 0.0);
  const double count = static_cast<double>(s.n * s.plane());
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(s.c); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double sum = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = in.data() + (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = in.data() + (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
    }
    const double var = sq / count;
    const double invstd = 1.0 / std::sqrt(var + eps);
    stats.mean[c] = mean;
    stats.var[c] = var;
    stats.invstd[c] = invstd;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (in[base + i] - mean) * invstd;
        xhat[base + i] = xh;
        out[base + i] = gamma[c] * xh + beta[c];
      }
    }
  }
}

void batchnorm_forward_eval(const Tensor& in, std::span<const double> gamma,
                            std::span<const double> beta, std::span<const double> running_mean,
                            std::span<const double> running_var, double eps, Tensor& out) {
  const Shape& s = in.shape();
  require(gamma.size() == s.c && running_mean.size() == s.c, "batchnorm: parameter size mismatch");
  out = Tensor(s);
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < static_cast<std::ptrdiff_t>(s.n); ++ni) {
    const auto n = static_cast<std::size_t>(ni);
    for (std::size_t c = 0; c < s.c; ++c) {
      const double scale = gamma[c] / std::sqrt(running_var[c] + eps);
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        out[base + i] = (in[base + i] - running_mean[c]) * scale + beta[c];
    }
  }
}

void batchnorm_backward_train(const Tensor& grad_out, const Tensor& xhat,
                              std::span<const double> gamma, std::span<const double> invstd,
                              Tensor& grad_in, std::span<double> grad_gamma,
                              std::span<double> grad_beta) {
  const Shape& s = grad_out.shape();
  grad_in = Tensor(s);
  const double count = static_cast<double>(s.n * s.plane());
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(s.c); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += grad_out[base + i];
        sum_gx += grad_out[base + i] * xhat[base + i];
      }
    }
    grad_gamma[c] += sum_gx;
    grad_beta[c] += sum_g;
    const double k = gamma[c] * invstd[c] / count;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        grad_in[base + i] = k * (count * grad_out[base + i] - sum_g - xhat[base + i] * sum_gx);
    }
  }
}

void assign_nearest(std::span<const double> points, std::span<const double> centers,
                    std::size_t dim, std::span<int> labels, std::span<double> sq_dist) {
  const auto n = static_cast<std::ptrdiff_t>(points.size() / dim);
  const std::size_t k = centers.size() / dim;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = points[i * dim + j] - centers[c * dim + j];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[i] = arg;
    sq_dist[i] = best;
  }
}

}  // namespace airacl::kernels::parallel
