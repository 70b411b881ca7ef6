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
#include <span>
#include <string>
#include <vector>

#include "airacl/augment.hpp"
#include "airacl/tensor.hpp"

namespace airacl {

/// Contents of a dataset descriptor file (`key = value` lines).
///
///     name     = blobs4
///     channels = 3
///     height   = 32
///     width    = 32
///     classes  = 4
///     packed   = blobs4.bin        # or: raw_dir = images/
///
/// Relative paths resolve against the descriptor's directory.
struct DatasetDescriptor {
  std::string name;
  std::size_t channels = 0, height = 0, width = 0;
  std::size_t classes = 0;
  std::filesystem::path packed;
  std::filesystem::path raw_dir;
};

/// In-memory image set. labels[k] == -1 marks an unlabeled sample.
struct Dataset {
  DatasetDescriptor descriptor;
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return images.shape().n; }
  bool labeled() const;
  Sample sample(std::size_t k) const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

DatasetDescriptor read_descriptor(const std::filesystem::path& path);
void write_descriptor(const DatasetDescriptor& d, const std::filesystem::path& path);

/// Loads pixels from the descriptor's packed file or raw directory and checks
/// them against the declared (C, H, W).
Dataset load_dataset(const DatasetDescriptor& d);
Dataset load_dataset(const std::filesystem::path& descriptor_path);

// Packed binary layout, all little-endian:
//   char[4] magic "AIRD" | u32 version (1) | u32 count | u32 C | u32 H | u32 W |
//   u32 dtype (1 = float32) | count*C*H*W float32 pixels (NCHW) |
//   u32 has_labels | count int32 labels (present iff has_labels == 1)
inline constexpr std::uint32_t kPackedVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;

void write_packed(const Dataset& ds, const std::filesystem::path& path);
Dataset read_packed(const std::filesystem::path& path);

/// Raw directory: one `*.f32` file per sample (C*H*W little-endian float32,
/// loaded in lexicographic filename order) plus an optional `labels.txt`.
Dataset read_raw_dir(const std::filesystem::path& dir, std::size_t c, std::size_t h,
                     std::size_t w);

/// Separable synthetic images: each class is a colored Gaussian blob in its own
/// region of the frame over low-amplitude noise. Per-sample nuisances (a
/// background tint, blob size jitter and a gray distractor blob placed
/// anywhere) carry no class information.
struct BlobSpec {
  std::size_t count = 512;
  std::size_t classes = 4;
  std::size_t channels = 3, height = 32, width = 32;
  double blob_sigma = 4.0;
  double position_jitter = 2.0;
  double noise = 0.05;
  double max_tint = 0.3;      // per-channel background level drawn from [0, max_tint]
  double sigma_jitter = 0.3;  // blob sigma scaled by 1 + U(-j, j)
  double distractor = 0.5;    // distractor amplitude; 0 disables it
  std::uint64_t seed = 0;
};

Dataset make_blobs(const BlobSpec& spec);

}  // namespace airacl
