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

// Serial reference kernels against their OpenMP counterparts.
//
//   airacl_bench --benchmark_filter=conv

#include <benchmark/benchmark.h>

#include <vector>

#include "airacl/kernels.hpp"
#include "airacl/rng.hpp"

using namespace airacl;
using namespace airacl::kernels;

namespace {

Tensor filled(Shape s, std::uint64_t seed) {
  Tensor t(s);
  Rng rng(seed);
  for (double& v : t.values()) v = uniform(rng, -1, 1);
  return t;
}

std::vector<double> vec(std::size_t n, std::uint64_t seed) {
  std::vector<double> v(n);
  Rng rng(seed);
  for (double& x : v) x = uniform(rng, -1, 1);
  return v;
}

// Input is (batch, width, 16, 16); the layer keeps the width.
template <auto Conv>
void BM_conv_forward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const ConvGeometry g{width, width, 3, 1, 1};
  const Tensor in = filled({64, width, 16, 16}, 1);
  const auto w = vec(g.weight_count(), 2);
  Tensor out;
  for (auto _ : state) {
    Conv(in, w, g, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Conv>
void BM_conv_backward_input(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const ConvGeometry g{width, width, 3, 1, 1};
  const Tensor gout = filled({64, width, 16, 16}, 3);
  const auto w = vec(g.weight_count(), 4);
  Tensor gin({64, width, 16, 16});
  for (auto _ : state) {
    Conv(gout, w, g, gin);
    benchmark::DoNotOptimize(gin.data());
  }
}

template <auto Conv>
void BM_conv_backward_weight(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const ConvGeometry g{width, width, 3, 1, 1};
  const Tensor in = filled({64, width, 16, 16}, 5);
  const Tensor gout = filled({64, width, 16, 16}, 6);
  std::vector<double> gw(g.weight_count());
  for (auto _ : state) {
    std::fill(gw.begin(), gw.end(), 0.0);
    Conv(in, gout, g, gw);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <auto Bn>
void BM_batchnorm_train(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const Tensor in = filled({128, width, 16, 16}, 7);
  const std::vector<double> gamma(width, 1.0), beta(width, 0.0);
  Tensor out, xhat;
  BatchNormStats stats;
  for (auto _ : state) {
    Bn(in, gamma, beta, 1e-5, out, xhat, stats);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Assign>
void BM_assign_nearest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 32, k = 10;
  const auto points = vec(n * dim, 8);
  const auto centers = vec(k * dim, 9);
  std::vector<int> labels(n);
  std::vector<double> dist(n);
  for (auto _ : state) {
    Assign(points, centers, dim, labels, dist);
    benchmark::DoNotOptimize(labels.data());
  }
}

}  // namespace

BENCHMARK(BM_conv_forward<serial::conv2d_forward>)->Name("conv_forward/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_forward<parallel::conv2d_forward>)->Name("conv_forward/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_backward_input<serial::conv2d_backward_input>)->Name("conv_backward_input/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_backward_input<parallel::conv2d_backward_input>)->Name("conv_backward_input/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_backward_weight<serial::conv2d_backward_weight>)->Name("conv_backward_weight/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_backward_weight<parallel::conv2d_backward_weight>)->Name("conv_backward_weight/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_batchnorm_train<serial::batchnorm_forward_train>)->Name("batchnorm_train/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_batchnorm_train<parallel::batchnorm_forward_train>)->Name("batchnorm_train/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_assign_nearest<serial::assign_nearest>)->Name("assign_nearest/serial")->Arg(1024)->Arg(16384);
BENCHMARK(BM_assign_nearest<parallel::assign_nearest>)->Name("assign_nearest/parallel")->Arg(1024)->Arg(16384);

BENCHMARK_MAIN();
