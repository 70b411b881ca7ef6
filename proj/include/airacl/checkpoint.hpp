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
#include <filesystem>
#include <string>
#include <vector>

#include "airacl/encoder.hpp"
#include "airacl/schedule.hpp"

namespace airacl {

/// Linear classifier on top of the extractor: weight (classes x in, row-major)
/// followed by bias (classes).
struct LinearHeadState {
  std::size_t in = 0;
  std::size_t classes = 0;
  std::vector<double> params;

  bool empty() const { return classes == 0; }
};

/// Everything needed to resume pre-training or to evaluate a classifier.
struct Checkpoint {
  EncoderSpec spec;
  std::vector<double> params;
  std::vector<double> buffers;
  std::vector<double> optimizer_velocity;
  int epoch = 0;
  SchedulerState scheduler;
  std::string rng_state;  // textual mt19937_64 state
  LinearHeadState head;   // empty for pre-training checkpoints
};

// File layout (little-endian):
//   char[4] "AIRC" | u32 version | u64 spec hash | u64 len + spec text |
//   u64 n + f64[n] params | u64 n + f64[n] buffers | u64 n + f64[n] velocity |
//   i32 epoch | i32 sched.epoch | i32 sched.E | i32 sched.K | f64 nu | f64 mu | f64 omega |
//   u64 len + rng state | u64 head.in | u64 head.classes | u64 n + f64[n] head params
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes to a temporary sibling and renames, so readers never see a partial file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above, but rejects a checkpoint whose encoder spec hash differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const EncoderSpec& expected);

Checkpoint snapshot(const Encoder& encoder);
Encoder restore_encoder(const Checkpoint& ckpt);

}  // namespace airacl
