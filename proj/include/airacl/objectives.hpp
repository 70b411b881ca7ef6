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

// Contrastive and invariant-regularization losses.
//
// Everything here is computed on embedding rows. The batch-level entry points
// (cl_loss, air_loss, ...) run the encoder first and then call the
// embedding-level functions, which also produce analytic gradients with
// respect to the embeddings for the trainer and the attack.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "airacl/encoder.hpp"
#include "airacl/tensor.hpp"

namespace airacl {

/// One minibatch: originals x, two augmented views, and (once the adversary
/// has run) their adversarial counterparts. Row k of every tensor belongs to
/// sample k; the proxy label of view k of one side is row k of the other side.
struct ViewBatch {
  Tensor originals;
  Tensor view_i, view_j;
  Tensor adv_i, adv_j;

  std::size_t size() const { return view_i.shape().n; }
  bool has_originals() const { return !originals.empty(); }
  bool has_adversarial() const { return !adv_i.empty() && !adv_j.empty(); }
  /// Shapes agree; when `epsilon` is given, adversarial views lie within it.
  void validate(std::optional<double> epsilon = std::nullopt) const;
};

enum class ProbabilityKind { y_given_adv, adv_given_x, y_given_x };
enum class ViewSide { i, j };

/// Softmax over the batch of diagonal similarities; one value per sample.
struct ProbabilityTable {
  ProbabilityKind kind = ProbabilityKind::y_given_x;
  ViewSide side = ViewSide::i;
  std::vector<double> values;

  double sum() const;
};

struct RegularizerConfig {
  double lambda1 = 0.5;  // weight of the natural (epsilon = 0) regularizer
  double lambda2 = 0.5;  // weight of the adversarial regularizer
  double epsilon = 8.0 / 255.0;
  double temperature = 0.5;
  double omega = 0.0;
  bool calibrated = true;

  void validate() const;
};

/// Floor applied to the second argument of a KL divergence before the log.
inline constexpr double kKlFloor = 1e-12;

// ------------------------------------------------------------ embedding level

/// Raw (unnormalized) embeddings of each role; rows are samples. Empty
/// matrices mark absent roles.
struct Embeddings {
  Matrix originals, nat_i, nat_j, adv_i, adv_j;
};

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Sum over k of the two-direction NT-Xent loss between rows a_k and b_k.
/// Gradients with respect to a and b are written when the pointers are set.
double contrastive_loss(const Matrix& a, const Matrix& b, double temperature,
                        Matrix* grad_a = nullptr, Matrix* grad_b = nullptr);
/// Per-sample terms of contrastive_loss.
std::vector<double> contrastive_loss_terms(const Matrix& a, const Matrix& b, double temperature);

/// softmax_k(sim(a_k, b_k) / t).
std::vector<double> diagonal_softmax(const Matrix& a, const Matrix& b, double temperature);

ProbabilityTable probability_table(const Embeddings& e, ProbabilityKind kind, ViewSide side,
                                   double temperature);

/// KL(p || q; B) = sum_k p_k log(p_k / q_k), with 0 log 0 = 0 and q floored at kKlFloor.
double kl_batch(std::span<const double> p, std::span<const double> q);
double kl_batch(const ProbabilityTable& p, const ProbabilityTable& q);

double air_value(const Embeddings& e, double temperature);
double sir_value(const Embeddings& e, double temperature);
double uncalibrated_air_value(const Embeddings& e, double temperature);
/// (expectation over p_i(adv|x) of the per-sample KL of p(y|adv),
///  expectation over p_i(y|adv) of the per-sample KL of p(adv|x)).
std::pair<double, double> air_decomposition_value(const Embeddings& e, double temperature);

struct ObjectiveTerms {
  double cl_adv = 0.0;
  double cl_nat = 0.0;
  double acl = 0.0;
  double sir = 0.0;
  double air = 0.0;  // calibrated or uncalibrated, per config
  double total = 0.0;
};

/// acl + lambda1 * sir + lambda2 * air, and optionally its gradient with
/// respect to every embedding role present in `e`.
ObjectiveTerms objective(const Embeddings& e, const RegularizerConfig& cfg,
                         Embeddings* grads = nullptr);

// ------------------------------------------------------------ batch level

struct EmbeddingTraces {
  EncoderTrace standard;     // rows: view_i, view_j
  EncoderTrace originals;    // rows: originals, a separate pass so view statistics exclude them
  EncoderTrace adversarial;  // rows: adv_i, adv_j
  bool has_originals = false;
  bool has_adversarial = false;
};

/// Runs the encoder over every view present in the batch: natural inputs on
/// the standard branch, adversarial inputs on the adversarial branch.
Embeddings embed(const ViewBatch& batch, const Encoder& encoder, Mode mode = Mode::train,
                 EmbeddingTraces* traces = nullptr);

/// Pushes embedding gradients back through the recorded passes.
void backprop_embeddings(const Encoder& encoder, const EmbeddingTraces& traces,
                         const Embeddings& grads, std::span<double> grad_params);

double cl_loss(const ViewBatch& batch, const Encoder& encoder, double temperature, bool use_adv,
               Mode mode = Mode::train);
double acl_loss(const ViewBatch& batch, const Encoder& encoder, double temperature, double omega,
                Mode mode = Mode::train);
ProbabilityTable prob_y_given_adv(const ViewBatch& batch, const Encoder& encoder,
                                  double temperature, ViewSide side, Mode mode = Mode::train);
ProbabilityTable prob_adv_given_x(const ViewBatch& batch, const Encoder& encoder,
                                  double temperature, ViewSide side, Mode mode = Mode::train);
ProbabilityTable prob_y_given_x(const ViewBatch& batch, const Encoder& encoder, double temperature,
                                ViewSide side, Mode mode = Mode::train);
double air_loss(const ViewBatch& batch, const Encoder& encoder, double temperature,
                Mode mode = Mode::train);
double sir_loss(const ViewBatch& batch, const Encoder& encoder, double temperature,
                Mode mode = Mode::train);
std::pair<double, double> air_decomposition(const ViewBatch& batch, const Encoder& encoder,
                                            double temperature, Mode mode = Mode::train);
double uncalibrated_air(const ViewBatch& batch, const Encoder& encoder, double temperature,
                        Mode mode = Mode::train);
double total_objective(const ViewBatch& batch, const Encoder& encoder,
                       const RegularizerConfig& cfg, Mode mode = Mode::train);

/// Largest per-sample gap between the contrastive loss and the negative log
/// of the two peer-view conditional probabilities, each evaluated as an
/// explicit ratio of exponentials. Uses adversarial views when use_adv.
double theorem1_identity(const ViewBatch& batch, const Encoder& encoder, double temperature,
                         bool use_adv = false, Mode mode = Mode::train);

}  // namespace airacl
