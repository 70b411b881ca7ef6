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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airacl/adversary.hpp"
#include "airacl/checkpoint.hpp"
#include "airacl/config.hpp"
#include "airacl/dataset.hpp"
#include "airacl/encoder.hpp"
#include "airacl/objectives.hpp"
#include "airacl/schedule.hpp"

namespace airacl {

enum class PretrainMode { acl, dynacl };

const char* to_string(PretrainMode m);
PretrainMode parse_pretrain_mode(const std::string& s);

struct TrainConfig {
  PretrainMode mode = PretrainMode::acl;
  int epochs = 20;
  std::size_t batch_size = 64;
  double lr = 0.3;
  SgdConfig sgd{0.9, 1e-4};
  RegularizerConfig reg;
  PgdConfig attack = PgdConfig::pretraining();
  int decay_period = 50;
  double reweight_rate = 2.0 / 3.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: max(1, epochs / 20)
  int num_workers = 1;       // augmentation threads

  void validate() const;
  int checkpoint_period() const;

  /// ResNet-18 scale settings: E = 1000, batch 512, lr 5.0, eps = 8/255,
  /// lambda1 = lambda2 = 0.5.
  static TrainConfig full_scale();
  /// 20-epoch laptop-scale run on synthetic blobs.
  static TrainConfig desk();

  /// Reads train.*, loss.*, attack.*, schedule.* keys over the desk defaults.
  static TrainConfig from_config(const KeyValueConfig& kv);
  /// Writes every field back as keys; from_config(to_config()) round-trips.
  KeyValueConfig to_config() const;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;  // learning rate of the epoch's first update
  double mu = 1.0;
  double omega = 0.0;
  double acl_loss = 0.0;  // batch means of each term
  double sir = 0.0;
  double air = 0.0;
  double total = 0.0;

  std::string to_json() const;
};

struct PretrainResult {
  Encoder encoder;
  Sgd optimizer;
  std::vector<EpochMetrics> metrics;
  std::vector<double> lr_trace;  // one entry per applied update
  std::int64_t steps = 0;
};

/// Builds the two augmented views (and keeps the originals) for the samples in
/// `indices`; view seeds derive from (seed, epoch, sample index, view).
ViewBatch make_view_batch(const Dataset& data, std::span<const std::size_t> indices, double mu,
                          std::uint64_t seed, int epoch, int num_workers = 1);

/// One outer update: attack the views, evaluate the objective, backpropagate,
/// fold in the BN statistics and take an SGD step. `batch` receives the
/// adversarial views.
ObjectiveTerms train_step(Encoder& encoder, Sgd& optimizer, ViewBatch& batch,
                          const RegularizerConfig& reg, const PgdConfig& attack, double lr,
                          std::uint64_t attack_seed);

/// Adversarial contrastive pre-training with invariant regularization. When
/// out_dir is set, writes metrics.jsonl, periodic epoch_NNNN.ckpt files and
/// final.ckpt there; a non-finite loss writes diagnostic.ckpt and throws.
/// `on_epoch` sees each epoch's metrics as soon as they are final.
PretrainResult pretrain(const Dataset& data, const EncoderSpec& spec, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                        const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace airacl
