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

#include "airacl/adversary.hpp"

#include <algorithm>
#include <cmath>

#include "airacl/error.hpp"
#include "airacl/objectives.hpp"
#include "airacl/rng.hpp"

namespace airacl {

void PgdConfig::validate() const {
  require(epsilon >= 0.0 && epsilon <= 1.0, "PgdConfig: epsilon must lie in [0,1]");
  require(steps >= 0, "PgdConfig: steps must be non-negative");
  require(step_size > 0.0, "PgdConfig: step size must be positive");
}

Tensor project_linf(const Tensor& candidate, const Tensor& anchor, double epsilon) {
  require(epsilon >= 0.0, "project_linf: negative epsilon");
  require(candidate.shape() == anchor.shape(), "project_linf: shape mismatch");
  Tensor out = candidate;
  for (std::size_t k = 0; k < out.numel(); ++k) {
    const double lo = std::max(0.0, anchor[k] - epsilon);
    const double hi = std::min(1.0, anchor[k] + epsilon);
    out[k] = std::clamp(candidate[k], lo, hi);
    // anchor itself may sit outside [0,1]; the box constraint wins.
    if (lo > hi) out[k] = std::clamp(anchor[k], 0.0, 1.0);
  }
  return out;
}

Tensor pgd_ascend(const Tensor& x, const PgdConfig& cfg, std::uint64_t seed, const LossGradFn& fn,
                  std::vector<double>* loss_trace) {
  cfg.validate();
  if (loss_trace) loss_trace->clear();
  Tensor adv = x;
  if (cfg.random_start && cfg.epsilon > 0.0) {
    Rng rng(seed);
    for (double& v : adv.values()) v += uniform(rng, -cfg.epsilon, cfg.epsilon);
  }
  adv = project_linf(adv, x, cfg.epsilon);
  if (cfg.epsilon == 0.0) {
    if (loss_trace) loss_trace->push_back(fn(adv, nullptr));
    return adv;
  }
  Tensor grad;
  for (int step = 0; step < cfg.steps; ++step) {
    const double loss = fn(adv, &grad);
    if (!std::isfinite(loss)) throw NumericError("PGD: non-finite loss at step " + std::to_string(step));
    if (loss_trace) loss_trace->push_back(loss);
    for (std::size_t k = 0; k < adv.numel(); ++k) {
      if (!std::isfinite(grad[k]))
        throw NumericError("PGD: non-finite gradient at step " + std::to_string(step));
      const double s = grad[k] > 0.0 ? 1.0 : (grad[k] < 0.0 ? -1.0 : 0.0);
      adv[k] += cfg.step_size * s;
    }
    adv = project_linf(adv, x, cfg.epsilon);
  }
  if (loss_trace) loss_trace->push_back(fn(adv, nullptr));
  return adv;
}

double adversarial_pair_loss(const Tensor& x_i, const Tensor& x_j, const Encoder& encoder,
                             double temperature, Mode mode, Tensor* grad_i, Tensor* grad_j) {
  require(x_i.shape() == x_j.shape(), "adversarial_pair_loss: view shapes differ");
  const std::size_t beta = x_i.shape().n;
  EncoderTrace trace;
  const Matrix z = encoder.forward(concat(x_i, x_j), Branch::adversarial, mode, &trace);
  const auto b = static_cast<Eigen::Index>(beta);
  const bool want = grad_i || grad_j;
  Matrix ga, gb;
  const double loss = contrastive_loss(z.topRows(b), z.bottomRows(b), temperature,
                                       want ? &ga : nullptr, want ? &gb : nullptr);
  if (want) {
    Matrix g(2 * b, z.cols());
    g << ga, gb;
    const Tensor gin = encoder.backward(trace, g, {}, true);
    if (grad_i) *grad_i = gin.slice(0, beta);
    if (grad_j) *grad_j = gin.slice(beta, beta);
  }
  return loss;
}

std::pair<Tensor, Tensor> pgd_pair(const Tensor& x_i, const Tensor& x_j, const Encoder& encoder,
                                   double temperature, const PgdConfig& cfg, std::uint64_t seed,
                                   Mode mode, std::vector<double>* loss_trace) {
  require(x_i.shape() == x_j.shape(), "pgd_pair: view shapes differ");
  const std::size_t beta = x_i.shape().n;
  // The pair is attacked as one tensor so both views move against the shared loss.
  const LossGradFn fn = [&](const Tensor& stacked, Tensor* grad) {
    const Tensor a = stacked.slice(0, beta), b = stacked.slice(beta, beta);
    if (!grad) return adversarial_pair_loss(a, b, encoder, temperature, mode);
    Tensor ga, gb;
    const double loss = adversarial_pair_loss(a, b, encoder, temperature, mode, &ga, &gb);
    *grad = concat(ga, gb);
    return loss;
  };
  const Tensor adv = pgd_ascend(concat(x_i, x_j), cfg, seed, fn, loss_trace);
  return {adv.slice(0, beta), adv.slice(beta, beta)};
}

}  // namespace airacl
