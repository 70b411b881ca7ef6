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
#include <vector>

#include "airacl/checkpoint.hpp"
#include "airacl/dataset.hpp"
#include "airacl/encoder.hpp"

namespace airacl {

/// Downstream classifier: the extractor h followed by a linear head. The
/// projector is carried along unchanged so the checkpoint can be reused.
/// Features come from the adversarial BN branch.
class Classifier {
 public:
  Classifier() = default;
  /// Zero-initialized head: every class scores equally until trained.
  Classifier(Encoder encoder, std::size_t classes);
  Classifier(Encoder encoder, LinearHeadState head);

  static Classifier from_checkpoint(const Checkpoint& ckpt);
  Checkpoint to_checkpoint() const;

  static constexpr Branch kBranch = Branch::adversarial;

  std::size_t classes() const { return head_.classes; }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  LinearHeadState& head() { return head_; }
  const LinearHeadState& head() const { return head_; }

  /// Head applied to precomputed features (rows).
  Matrix head_logits(const Matrix& features) const;
  Matrix logits(const Tensor& x, Mode mode = Mode::eval, EncoderTrace* trace = nullptr) const;
  std::vector<int> predict(const Tensor& x, std::size_t batch_size = 256) const;

  /// Mean cross-entropy of the head on precomputed features; gradient with
  /// respect to the head parameters accumulated into grad_head.
  double head_loss(const Matrix& features, std::span<const int> labels,
                   std::span<double> grad_head, Matrix* grad_features = nullptr) const;

  /// Mean cross-entropy over the batch. Gradients are accumulated into
  /// grad_encoder / grad_head when non-empty; d(loss)/dx is written to
  /// grad_input when non-null. The trace is returned through `trace` so the
  /// caller can commit BN statistics after a training-mode pass.
  double loss(const Tensor& x, std::span<const int> labels, Mode mode, Tensor* grad_input,
              std::span<double> grad_encoder, std::span<double> grad_head,
              EncoderTrace* trace = nullptr) const;

 private:
  Encoder encoder_;
  LinearHeadState head_;
};

/// Fraction of correctly classified samples (eval mode).
double standard_accuracy(const Classifier& clf, const Tensor& images, std::span<const int> labels);
double standard_accuracy(const Classifier& clf, const Dataset& data);

}  // namespace airacl
