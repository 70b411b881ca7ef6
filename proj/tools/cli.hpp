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

#include <filesystem>
#include <string>
#include <vector>

#include "airacl/config.hpp"
#include "airacl/dataset.hpp"
#include "airacl/encoder.hpp"

namespace airacl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingArtifact = 3;

/// Config file plus the directory relative paths resolve against.
struct ExperimentConfig {
  KeyValueConfig values;
  std::filesystem::path path;
  std::filesystem::path base_dir;

  static ExperimentConfig load(const std::filesystem::path& path);
  std::string name() const { return values.get_string("name", "experiment"); }
};

/// Training split named by data.descriptor, or synthetic blobs when
/// data.synthetic = true. A missing file is a configuration error.
Dataset load_train_data(const ExperimentConfig& cfg);
/// Held-out split: data.eval_descriptor, or blobs drawn with data.eval_seed.
Dataset load_eval_data(const ExperimentConfig& cfg);
/// model.* keys applied to the preset for the dataset's image shape.
EncoderSpec encoder_spec(const ExperimentConfig& cfg, const Dataset& data);

/// Entry point shared by the binary and the tests; returns the exit code.
int run(const std::vector<std::string>& args);

}  // namespace airacl::cli
