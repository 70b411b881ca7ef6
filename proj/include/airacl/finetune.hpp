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
#include <map>
#include <string>
#include <vector>

#include "airacl/adversary.hpp"
#include "airacl/checkpoint.hpp"
#include "airacl/classifier.hpp"
#include "airacl/config.hpp"
#include "airacl/corruption.hpp"
#include "airacl/dataset.hpp"
#include "airacl/kmeans.hpp"
#include "airacl/schedule.hpp"

namespace airacl {

/// SLF: head on natural features. ALF: head on PGD examples. AFF: every
/// parameter on PGD examples. SLF and ALF keep the extractor frozen.
enum class FinetuneMode { slf, alf, aff };

const char* to_string(FinetuneMode m);
FinetuneMode parse_finetune_mode(const std::string& s);

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::slf;
  int epochs = 25;
  double lr = 0.01;
  std::size_t batch_size = 64;
  SgdConfig sgd{0.9, 2e-4};
  PgdConfig attack = PgdConfig::finetuning();
  std::uint64_t seed = 0;

  bool freeze_extractor() const { return mode != FinetuneMode::aff; }
  void validate() const;

  /// Reads finetune.* keys (mode, epochs, lr, batch_size, momentum,
  /// weight_decay, seed) and finetune.attack.* over the defaults.
  static FinetuneConfig from_config(const KeyValueConfig& kv);
};

/// Extractor output rows in eval mode on the classifier's branch.
Matrix extract_features(const Encoder& encoder, const Tensor& images, std::size_t batch_size = 256);

/// Trains a zero-initialized head (and for AFF the extractor) on `labeled`.
Classifier finetune(const Checkpoint& pretrained, const Dataset& labeled, const FinetuneConfig& cfg);
/// Continues from an existing classifier.
Classifier finetune(Classifier init, const Dataset& labeled, const FinetuneConfig& cfg);

struct LpAffResult {
  Classifier classifier;
  KMeansResult clustering;
};

/// Clusters extractor features into k pseudo classes, fits a linear probe on
/// them, then runs AFF with the pseudo labels. cfg.mode is ignored.
LpAffResult lp_aff(const Checkpoint& pretrained, const Dataset& unlabeled, std::size_t k,
                   const FinetuneConfig& cfg);

/// PGD examples against the classifier's cross-entropy, eval mode.
Tensor attack_classifier(const Classifier& clf, const Tensor& images, std::span<const int> labels,
                         const PgdConfig& attack, std::uint64_t seed);

double robust_accuracy(const Classifier& clf, const Dataset& data, const PgdConfig& attack,
                       std::uint64_t seed, std::size_t batch_size = 256);
double corruption_accuracy(const Classifier& clf, const Dataset& data, const CorruptionSpec& spec,
                           std::uint64_t seed);

struct EvalReport {
  std::string protocol;
  std::string dataset;
  double standard_acc = 0.0;
  double robust_acc = 0.0;
  std::map<std::string, std::map<int, double>> corruption;  // kind -> severity -> accuracy
  std::map<int, double> corruption_mean;                    // severity -> mean over kinds

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

EvalReport evaluate(const Classifier& clf, const Dataset& data, const std::string& protocol,
                    const PgdConfig& attack, const std::vector<int>& severities, std::uint64_t seed);

/// Robust / standard accuracy per protocol, one row per pre-training method.
std::string render_accuracy_table(const std::vector<std::pair<std::string, std::vector<EvalReport>>>& rows);
/// Mean corruption accuracy per protocol and severity, one row per method.
std::string render_corruption_table(const std::vector<std::pair<std::string, std::vector<EvalReport>>>& rows,
                                    const std::vector<int>& severities);

}  // namespace airacl
