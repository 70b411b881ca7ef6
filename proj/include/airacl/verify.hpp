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
#include <string>
#include <vector>

#include "airacl/encoder.hpp"
#include "airacl/objectives.hpp"

namespace airacl {

struct VerifyRecord {
  std::string check;
  std::uint64_t seed = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  bool asserted = true;  // false: reported value only, never fails the run
  std::string detail;

  std::string to_json() const;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  int seeds = 1;  // independent passes with seed, seed + 1, ...
  int draws = 100;
  std::size_t pgd_samples = 1000;
  /// Test hook: scales the second decomposition term by 1.01 so the
  /// decomposition check must fail.
  bool break_decomposition = false;
};

/// Small dual-BN encoder (under 1e3 parameters for out_dim 4) on 3x8x8 inputs.
EncoderSpec verify_micro_spec(std::size_t out_dim = 4);

/// Random batch for a micro encoder: uniform originals, two augmented views and
/// adversarial views drawn uniformly inside the epsilon ball.
ViewBatch random_view_batch(const EncoderSpec& spec, std::size_t beta, double epsilon,
                            std::uint64_t seed);

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-3) over every
/// parameter of total_objective, using central differences with step h. The
/// batch (including its adversarial views) is held fixed.
double objective_gradient_error(const ViewBatch& batch, const Encoder& encoder,
                                const RegularizerConfig& cfg, double h = 1e-6);

std::vector<VerifyRecord> run_verification(const VerifyOptions& opts);

bool all_passed(const std::vector<VerifyRecord>& records);

}  // namespace airacl
