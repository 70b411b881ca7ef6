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

#include <cmath>
#include <limits>

#include "airacl/error.hpp"
#include "airacl/kernels.hpp"

namespace airacl::kernels::serial {

namespace {

void check_conv(const Shape& in, std::span<const double> weight, const ConvGeometry& g) {
  require(in.c == g.in_channels, "conv2d: input has " + std::to_string(in.c) +
                                     " channels, expected " + std::to_string(g.in_channels));
  require(weight.size() == g.weight_count(), "conv2d: weight size mismatch");
  require(in.h + 2 * g.pad >= g.kernel && in.w + 2 * g.pad >= g.kernel,
          "conv2d: input smaller than kernel");
}

}  // namespace

void conv2d_forward(const Tensor& in, std::span<const double> weight, const ConvGeometry& g,
                    Tensor& out) {
  const Shape& s = in.shape();
  check_conv(s, weight, g);
  out = Tensor(g.out_shape(s));
  const Shape& o = out.shape();
  const auto k = static_cast<std::ptrdiff_t>(g.kernel);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t oc = 0; oc < o.c; ++oc)
      for (std::size_t oy = 0; oy < o.h; ++oy)
        for (std::size_t ox = 0; ox < o.w; ++ox) {
          double acc = 0.0;
          for (std::size_t ic = 0; ic < s.c; ++ic)
            for (std::ptrdiff_t ky = 0; ky < k; ++ky)
              for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride) + ky -
                                          static_cast<std::ptrdiff_t>(g.pad);
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride) + kx -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.h) ||
                    ix >= static_cast<std::ptrdiff_t>(s.w))
                  continue;
                acc += weight[((oc * s.c + ic) * g.kernel + static_cast<std::size_t>(ky)) *
                                  g.kernel +
                              static_cast<std::size_t>(kx)] *
                       in.at(n, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          out.at(n, oc, oy, ox) = acc;
        }
}

void conv2d_backward_input(const Tensor& grad_out, std::span<const double> weight,
                           const ConvGeometry& g, Tensor& grad_in) {
  const Shape& o = grad_out.shape();
  const Shape& s = grad_in.shape();
  check_conv(s, weight, g);
  grad_in.fill(0.0);
  const auto k = static_cast<std::ptrdiff_t>(g.kernel);
  for (std::size_t n = 0; n < o.n; ++n)
    for (std::size_t oc = 0; oc < o.c; ++oc)
      for (std::size_t oy = 0; oy < o.h; ++oy)
        for (std::size_t ox = 0; ox < o.w; ++ox) {
          const double go = grad_out.at(n, oc, oy, ox);
          for (std::size_t ic = 0; ic < s.c; ++ic)
            for (std::ptrdiff_t ky = 0; ky < k; ++ky)
              for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride) + ky -
                                          static_cast<std::ptrdiff_t>(g.pad);
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride) + kx -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.h) ||
                    ix >= static_cast<std::ptrdiff_t>(s.w))
                  continue;
                grad_in.at(n, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                    go * weight[((oc * s.c + ic) * g.kernel + static_cast<std::size_t>(ky)) *
                                    g.kernel +
                                static_cast<std::size_t>(kx)];
              }
        }
}

void conv2d_backward_weight(const Tensor& in, const Tensor& grad_out, const ConvGeometry& g,
                            std::span<double> grad_weight) {
  const Shape& s = in.shape();
  const Shape& o = grad_out.shape();
  check_conv(s, grad_weight, g);
  const auto k = static_cast<std::ptrdiff_t>(g.kernel);
  for (std::size_t n = 0; n < o.n; ++n)
    for (std::size_t oc = 0; oc < o.c; ++oc)
      for (std::size_t oy = 0; oy < o.h; ++oy)
        for (std::size_t ox = 0; ox < o.w; ++ox) {
          const double go = grad_out.at(n, oc, oy, ox);
          for (std::size_t ic = 0; ic < s.c; ++ic)
            for (std::ptrdiff_t ky = 0; ky < k; ++ky)
              for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride) + ky -
                                          static_cast<std::ptrdiff_t>(g.pad);
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride) + kx -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(s.h) ||
                    ix >= static_cast<std::ptrdiff_t>(s.w))
                  continue;
                grad_weight[((oc * s.c + ic) * g.kernel + static_cast<std::size_t>(ky)) *
                                g.kernel +
                            static_cast<std::size_t>(kx)] +=
                    go * in.at(n, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
        }
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
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < s.plane(); ++p) sum += in[(n * s.c + c) * s.plane() + p];
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const double d = in[(n * s.c + c) * s.plane() + p] - mean;
        sq += d * d;
      }
    const double var = sq / count;
    const double invstd = 1.0 / std::sqrt(var + eps);
    stats.mean[c] = mean;
    stats.var[c] = var;
    stats.invstd[c] = invstd;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const std::size_t i = (n * s.c + c) * s.plane() + p;
        xhat[i] = (in[i] - mean) * invstd;
        out[i] = gamma[c] * xhat[i] + beta[c];
      }
  }
}

void batchnorm_forward_eval(const Tensor& in, std::span<const double> gamma,
                            std::span<const double> beta, std::span<const double> running_mean,
                            std::span<const double> running_var, double eps, Tensor& out) {
  const Shape& s = in.shape();
  require(gamma.size() == s.c && running_mean.size() == s.c, "batchnorm: parameter size mismatch");
  out = Tensor(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double scale = gamma[c] / std::sqrt(running_var[c] + eps);
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const std::size_t i = (n * s.c + c) * s.plane() + p;
        out[i] = (in[i] - running_mean[c]) * scale + beta[c];
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
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const std::size_t i = (n * s.c + c) * s.plane() + p;
        sum_g += grad_out[i];
        sum_gx += grad_out[i] * xhat[i];
      }
    grad_gamma[c] += sum_gx;
    grad_beta[c] += sum_g;
    const double k = gamma[c] * invstd[c] / count;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const std::size_t i = (n * s.c + c) * s.plane() + p;
        grad_in[i] = k * (count * grad_out[i] - sum_g - xhat[i] * sum_gx);
      }
  }
}

void assign_nearest(std::span<const double> points, std::span<const double> centers,
                    std::size_t dim, std::span<int> labels, std::span<double> sq_dist) {
  const std::size_t n = points.size() / dim;
  const std::size_t k = centers.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
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

}  // namespace airacl::kernels::serial
