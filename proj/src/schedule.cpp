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

#include "airacl/schedule.hpp"

#include <cmath>
#include <numbers>

#include "airacl/error.hpp"

namespace airacl {

std::pair<double, double> dynacl_schedule(int epoch, int decay_period, int total_epochs,
                                          double reweight_rate) {
  require(total_epochs > 0 && decay_period > 0, "dynacl_schedule: K and E must be positive");
  require(epoch >= 0 && epoch < total_epochs,
          "dynacl_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
              std::to_string(total_epochs) + ")");
  const int steps_taken = epoch / decay_period;
  const double mu = 1.0 - static_cast<double>(steps_taken) * static_cast<double>(decay_period) /
                              static_cast<double>(total_epochs);
  return {mu, reweight_rate * (1.0 - mu)};
}

SchedulerState make_scheduler_state(int epoch, int decay_period, int total_epochs,
                                    double reweight_rate) {
  const auto [mu, omega] = dynacl_schedule(epoch, decay_period, total_epochs, reweight_rate);
  return {epoch, total_epochs, decay_period, reweight_rate, mu, omega};
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
  require(step >= 0 && step <= total_steps, "cosine_lr: step outside [0, total_steps]");
  if (total_steps == 0) return lr0;
  if (step == total_steps) return 0.0;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

void Sgd::step(std::span<double> params, std::span<const double> grads, double lr) {
  require(params.size() == velocity_.size() && grads.size() == velocity_.size(),
          "Sgd::step: size mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double d = grads[k] + cfg_.weight_decay * params[k];
    velocity_[k] = cfg_.momentum * velocity_[k] + d;
    params[k] -= lr * velocity_[k];
  }
}

}  // namespace airacl
