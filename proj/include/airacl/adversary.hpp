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
#include <functional>
#include <utility>
#include <vector>

#include "airacl/encoder.hpp"
#include "airacl/tensor.hpp"

namespace airacl {

/// l-infinity PGD settings (config keys attack.eps / attack.steps /
/// attack.alpha / attack.random_start).
struct PgdConfig {
  double epsilon = 8.0 / 255.0;
  int steps = 5;
  double step_size = 2.0 / 255.0;
  bool random_start = true;

  void validate() const;

  /// Inner maximization during pre-training.
  static PgdConfig pretraining() { return {8.0 / 255.0, 5, 2.0 / 255.0, true}; }
  /// Adversarial finetuning (ALF / AFF).
  static PgdConfig finetuning() { return {8.0 / 255.0, 10, 2.0 / 255.0, true}; }
  /// Robust-accuracy evaluation.
  static PgdConfig evaluation() { return {8.0 / 255.0, 20, 2.0 / 255.0, true}; }
};

/// Elementwise projection onto B_eps[anchor] intersected with [0,1].
Tensor project_linf(const Tensor& candidate, const Tensor& anchor, double epsilon);

/// Loss at x, and d(loss)/dx written to *grad when grad is non-null.
using LossGradFn = std::function<double(const Tensor& x, Tensor* grad)>;

/// Sign-gradient ascent from `x`, projecting after every step. `loss_trace`
/// receives the loss before each step and at the final iterate.
Tensor pgd_ascend(const Tensor& x, const PgdConfig& cfg, std::uint64_t seed, const LossGradFn& fn,
                  std::vector<double>* loss_trace = nullptr);

/// Contrastive loss of an adversarial pair evaluated on the adversarial branch.
double adversarial_pair_loss(const Tensor& x_i, const Tensor& x_j, const Encoder& encoder,
                             double temperature, Mode mode = Mode::train, Tensor* grad_i = nullptr,
                             Tensor* grad_j = nullptr);

/// Jointly perturbs both views to maximize their contrastive loss, each within
/// its own epsilon ball. The encoder is not modified.
std::pair<Tensor, Tensor> pgd_pair(const Tensor& x_i, const Tensor& x_j, const Encoder& encoder,
                                   double temperature, const PgdConfig& cfg, std::uint64_t seed,
                                   Mode mode = Mode::train,
                                   std::vector<double>* loss_trace = nullptr);

}  // namespace airacl
