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

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "airacl/kernels.hpp"
#include "airacl/tensor.hpp"

namespace airacl {

using Matrix = Eigen::MatrixXd;

/// Which normalization statistics a forward pass uses. In dual-BN mode the two
/// branches own separate BN affine parameters and running statistics while all
/// convolution and linear weights are shared.
enum class Branch { standard, adversarial };
enum class BnMode { single, dual };
enum class Mode { train, eval };

const char* to_string(Branch b);

struct BlockSpec {
  std::size_t width = 0;
  std::size_t stride = 1;
  bool operator==(const BlockSpec&) const = default;
};

/// Architecture of f = g . h: a residual CNN extractor h followed by a two-layer
/// MLP projector g (linear, optional BN, ReLU, linear).
struct EncoderSpec {
  std::size_t in_channels = 3, in_height = 32, in_width = 32;
  std::size_t stem_width = 8, stem_stride = 2;
  std::vector<BlockSpec> blocks{{8, 1}, {16, 2}, {32, 2}, {32, 1}};
  std::size_t projector_hidden = 512;
  std::size_t projector_out = 128;
  bool projector_bn = true;  // batch norm (per branch) between the projector layers
  BnMode bn_mode = BnMode::dual;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::size_t representation_dim() const {
    return blocks.empty() ? stem_width : blocks.back().width;
  }
  Shape input_shape(std::size_t n) const { return {n, in_channels, in_height, in_width}; }

  /// Canonical `key = value` text; stable across versions of this library.
  std::string to_text() const;
  static EncoderSpec from_text(const std::string& text);
  /// FNV-1a of to_text().
  std::uint64_t hash() const;

  bool operator==(const EncoderSpec&) const = default;

  /// CIFAR-style ResNet-18 (3x3 stem, stride 1, widths 64..512).
  static EncoderSpec resnet18(std::size_t c, std::size_t h, std::size_t w);
  /// Four-block micro variant used for desk-scale runs.
  static EncoderSpec micro(std::size_t c, std::size_t h, std::size_t w);
};

/// Named slice of a flat vector.
struct ParamSlice {
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct BnTrace {
  Tensor xhat;
  kernels::BatchNormStats stats;  // empty in eval mode
};

struct BlockTrace {
  Tensor input;
  Tensor conv1_out, relu1_out, conv2_out;
  BnTrace bn1, bn2, bn_short;
  Tensor short_out;  // shortcut branch output before the sum
  Tensor output;     // after the final ReLU
};

/// Intermediate values of one forward pass, needed to run the matching backward.
struct EncoderTrace {
  Branch branch = Branch::standard;
  Mode mode = Mode::train;
  bool projected = true;
  Tensor input;
  Tensor stem_conv_out;
  BnTrace stem_bn;
  Tensor stem_out;
  std::vector<BlockTrace> blocks;
  Matrix pooled;      // (n x z)
  Tensor hidden_lin;  // fc1 output as (n, hidden, 1, 1), the projector BN input
  BnTrace proj_bn;
  Matrix hidden_pre;  // (n x hidden), ReLU input
  Matrix hidden;      // after ReLU
};

class Encoder {
 public:
  Encoder() = default;
  /// He-initialized weights; BN gamma = 1, beta = 0; running stats (0, 1).
  Encoder(EncoderSpec spec, std::uint64_t seed);

  const EncoderSpec& spec() const { return spec_; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> buffers() { return buffers_; }
  std::span<const double> buffers() const { return buffers_; }

  const std::map<std::string, ParamSlice>& param_layout() const { return param_layout_; }
  std::span<double> param(const std::string& name);
  std::span<const double> param(const std::string& name) const;
  /// True for parameters owned by one BN branch (the only ones that differ per branch).
  static bool is_branch_param(const std::string& name);

  /// f(x): one embedding row per input sample.
  Matrix forward(const Tensor& x, Branch branch, Mode mode, EncoderTrace* trace = nullptr) const;
  /// h(x): extractor output without the projector.
  Matrix representation(const Tensor& x, Branch branch, Mode mode,
                        EncoderTrace* trace = nullptr) const;
  /// g(z) in eval mode on the given branch.
  Matrix project(const Matrix& rep, Branch branch = Branch::standard) const;

  /// Backpropagates d(loss)/d(output rows) through a recorded pass. Parameter
  /// gradients are accumulated into grad_params (size num_params(), may be
  /// empty to skip). Returns d(loss)/d(input) when want_input_grad.
  Tensor backward(const EncoderTrace& trace, const Matrix& grad_out, std::span<double> grad_params,
                  bool want_input_grad) const;

  /// Folds the batch statistics of a training-mode pass into the running
  /// statistics of that pass's branch.
  void commit_running_stats(const EncoderTrace& trace);

 private:
  struct ConvLayer {
    kernels::ConvGeometry geom;
    ParamSlice weight;
  };
  struct BnLayer {
    std::size_t channels = 0;
    ParamSlice gamma[2], beta[2];
    ParamSlice running_mean[2], running_var[2];
  };
  struct Block {
    ConvLayer conv1, conv2, shortcut;
    BnLayer bn1, bn2, bn_short;
    bool projection = false;
  };
  struct Linear {
    std::size_t in = 0, out = 0;
    ParamSlice weight, bias;
  };

  ParamSlice add_param(const std::string& name, std::size_t size);
  ParamSlice add_buffer(std::size_t size);
  ConvLayer make_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                      std::size_t stride, std::size_t pad);
  BnLayer make_bn(const std::string& name, std::size_t channels);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out);
  int bn_index(Branch b) const;

  void bn_forward(const BnLayer& bn, int idx, Mode mode, const Tensor& in, Tensor& out,
                  BnTrace& trace) const;
  Tensor bn_backward(const BnLayer& bn, int idx, Mode mode, const Tensor& grad_out,
                     const BnTrace& trace, std::span<double> grad_params) const;
  Matrix linear_forward(const Linear& l, const Matrix& x) const;
  Matrix extract(const Tensor& x, Branch branch, Mode mode, EncoderTrace& trace) const;

  EncoderSpec spec_;
  std::vector<double> params_;
  std::vector<double> buffers_;
  std::map<std::string, ParamSlice> param_layout_;
  ConvLayer stem_conv_;
  BnLayer stem_bn_;
  std::vector<Block> blocks_;
  Linear fc1_, fc2_;
  BnLayer proj_bn_;
  Matrix project_hidden(const Matrix& rep, int idx, Mode mode, EncoderTrace& t) const;
};

}  // namespace airacl
