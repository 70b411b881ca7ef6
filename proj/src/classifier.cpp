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

#include "airacl/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "airacl/error.hpp"

namespace airacl {

namespace {

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> head_weight(
    const LinearHeadState& h) {
  return {h.params.data(), static_cast<Eigen::Index>(h.classes), static_cast<Eigen::Index>(h.in)};
}

void check_labels(std::span<const int> labels, std::size_t n, std::size_t classes) {
  if (labels.size() != n)
    throw PreconditionError("label count " + std::to_string(labels.size()) +
                            " does not match batch size " + std::to_string(n));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw PreconditionError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
}

}  // namespace

Classifier::Classifier(Encoder encoder, std::size_t classes) : encoder_(std::move(encoder)) {
  require(classes >= 2, "classifier needs at least two classes");
  head_.in = encoder_.spec().representation_dim();
  head_.classes = classes;
  head_.params.assign(head_.classes * head_.in + head_.classes, 0.0);
}

Classifier::Classifier(Encoder encoder, LinearHeadState head)
    : encoder_(std::move(encoder)), head_(std::move(head)) {
  require(head_.in == encoder_.spec().representation_dim(), "head input width mismatch");
  require(head_.params.size() == head_.classes * head_.in + head_.classes, "head size mismatch");
}

Classifier Classifier::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.head.empty()) throw ConfigError("checkpoint has no classifier head");
  return Classifier(restore_encoder(ckpt), ckpt.head);
}

Checkpoint Classifier::to_checkpoint() const {
  Checkpoint c = snapshot(encoder_);
  c.head = head_;
  return c;
}

Matrix Classifier::head_logits(const Matrix& features) const {
  require(static_cast<std::size_t>(features.cols()) == head_.in, "feature width mismatch");
  const Eigen::Map<const Eigen::RowVectorXd> bias(head_.params.data() + head_.classes * head_.in,
                                                  static_cast<Eigen::Index>(head_.classes));
  Matrix out = features * head_weight(head_).transpose();
  out.rowwise() += bias;
  return out;
}

Matrix Classifier::logits(const Tensor& x, Mode mode, EncoderTrace* trace) const {
  return head_logits(encoder_.representation(x, kBranch, mode, trace));
}

std::vector<int> Classifier::predict(const Tensor& x, std::size_t batch_size) const {
  std::vector<int> out;
  out.reserve(x.shape().n);
  for (std::size_t b = 0; b < x.shape().n; b += batch_size) {
    const std::size_t count = std::min(batch_size, x.shape().n - b);
    const Matrix z = logits(x.slice(b, count), Mode::eval);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      Eigen::Index arg = 0;
      z.row(r).maxCoeff(&arg);
      out.push_back(static_cast<int>(arg));
    }
  }
  return out;
}

double Classifier::head_loss(const Matrix& features, std::span<const int> labels,
                             std::span<double> grad_head, Matrix* grad_features) const {
  const auto n = static_cast<std::size_t>(features.rows());
  check_labels(labels, n, head_.classes);
  const Matrix z = head_logits(features);
  Matrix g(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(r).array() - m).exp();
    const double s = e.sum();
    loss += std::log(s) + m - z(r, labels[static_cast<std::size_t>(r)]);
    g.row(r) = e / s;
    g(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  }
  g /= static_cast<double>(n);
  if (!grad_head.empty()) {
    require(grad_head.size() == head_.params.size(), "head gradient size mismatch");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        grad_head.data(), static_cast<Eigen::Index>(head_.classes),
        static_cast<Eigen::Index>(head_.in));
    gw += g.transpose() * features;
    Eigen::Map<Eigen::RowVectorXd> gb(grad_head.data() + head_.classes * head_.in,
                                      static_cast<Eigen::Index>(head_.classes));
    gb += g.colwise().sum();
  }
  if (grad_features) *grad_features = g * head_weight(head_);
  return loss / static_cast<double>(n);
}

double Classifier::loss(const Tensor& x, std::span<const int> labels, Mode mode,
                        Tensor* grad_input, std::span<double> grad_encoder,
                        std::span<double> grad_head, EncoderTrace* trace) const {
  EncoderTrace local;
  EncoderTrace& tr = trace ? *trace : local;
  const Matrix features = encoder_.representation(x, kBranch, mode, &tr);
  const bool need_back = grad_input != nullptr || !grad_encoder.empty();
  Matrix gf;
  const double l = head_loss(features, labels, grad_head, need_back ? &gf : nullptr);
  if (need_back) {
    Tensor gi = encoder_.backward(tr, gf, grad_encoder, grad_input != nullptr);
    if (grad_input) *grad_input = std::move(gi);
  }
  return l;
}

double standard_accuracy(const Classifier& clf, const Tensor& images,
                         std::span<const int> labels) {
  require(labels.size() == images.shape().n, "label count mismatch");
  require(!labels.empty(), "accuracy of an empty set");
  const std::vector<int> pred = clf.predict(images);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == labels[k] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double standard_accuracy(const Classifier& clf, const Dataset& data) {
  if (!data.labeled()) throw ConfigError("accuracy needs a labeled dataset");
  return standard_accuracy(clf, data.images, data.labels);
}

}  // namespace airacl
