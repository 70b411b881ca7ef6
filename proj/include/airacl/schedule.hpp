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
#include <span>
#include <utility>
#include <vector>

namespace airacl {

/// Dynamic augmentation schedule: strength mu_e steps down by K/E every K
/// epochs and the loss reweighting omega_e = nu * (1 - mu_e) rises with it.
struct SchedulerState {
  int epoch = 0;
  int total_epochs = 1;
  int decay_period = 50;
  double reweight_rate = 2.0 / 3.0;
  double mu = 1.0;
  double omega = 0.0;
};

/// (mu_e, omega_e) for 0 <= e < E.
std::pair<double, double> dynacl_schedule(int epoch, int decay_period, int total_epochs,
                                          double reweight_rate);
SchedulerState make_scheduler_state(int epoch, int decay_period, int total_epochs,
                                    double reweight_rate);

/// lr0 * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0);

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
/// v <- m v + (g + wd p);  p <- p - lr v.
class Sgd {
 public:
  Sgd() = default;
  Sgd(SgdConfig cfg, std::size_t size) : cfg_(cfg), velocity_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads, double lr);

  const SgdConfig& config() const { return cfg_; }
  std::vector<double>& velocity() { return velocity_; }
  const std::vector<double>& velocity() const { return velocity_; }

 private:
  SgdConfig cfg_;
  std::vector<double> velocity_;
};

}  // namespace airacl
