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

#include "airacl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "airacl/config.hpp"
#include "airacl/error.hpp"
#include "airacl/rng.hpp"

namespace airacl {

namespace kp = kernels::parallel;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

const char* to_string(Branch b) { return b == Branch::standard ? "standard" : "adversarial"; }

// ---------------------------------------------------------------- EncoderSpec

std::string EncoderSpec::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "in_channels = " << in_channels << "\nin_height = " << in_height
      << "\nin_width = " << in_width << "\nstem_width = " << stem_width
      << "\nstem_stride = " << stem_stride << "\nblocks = ";
  for (std::size_t i = 0; i < blocks.size(); ++i)
    out << (i ? "," : "") << blocks[i].width << ":" << blocks[i].stride;
  out << "\nprojector_hidden = " << projector_hidden << "\nprojector_out = " << projector_out
      << "\nprojector_bn = " << (projector_bn ? "true" : "false") << "\nbn_mode = " << (bn_mode == BnMode::dual ? "dual" : "single")
      << "\nbn_eps = " << bn_eps << "\nbn_momentum = " << bn_momentum << "\n";
  return out.str();
}

EncoderSpec EncoderSpec::from_text(const std::string& text) {
  const KeyValueConfig kv = KeyValueConfig::parse(text, "encoder spec");
  EncoderSpec s;
  s.in_channels = static_cast<std::size_t>(kv.require_int("in_channels"));
  s.in_height = static_cast<std::size_t>(kv.require_int("in_height"));
  s.in_width = static_cast<std::size_t>(kv.require_int("in_width"));
  s.stem_width = static_cast<std::size_t>(kv.require_int("stem_width"));
  s.stem_stride = static_cast<std::size_t>(kv.require_int("stem_stride"));
  s.blocks.clear();
  std::istringstream blocks(kv.require_string("blocks"));
  std::string item;
  while (std::getline(blocks, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("encoder spec: bad block entry " + item);
    s.blocks.push_back({std::stoul(item.substr(0, colon)), std::stoul(item.substr(colon + 1))});
  }
  s.projector_hidden = static_cast<std::size_t>(kv.require_int("projector_hidden"));
  s.projector_out = static_cast<std::size_t>(kv.require_int("projector_out"));
  s.projector_bn = kv.get_bool("projector_bn", true);
  const std::string mode = kv.require_string("bn_mode");
  if (mode != "dual" && mode != "single") throw ConfigError("encoder spec: bad bn_mode " + mode);
  s.bn_mode = mode == "dual" ? BnMode::dual : BnMode::single;
  s.bn_eps = kv.require_double("bn_eps");
  s.bn_momentum = kv.require_double("bn_momentum");
  return s;
}

std::uint64_t EncoderSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EncoderSpec EncoderSpec::resnet18(std::size_t c, std::size_t h, std::size_t w) {
  EncoderSpec s;
  s.in_channels = c;
  s.in_height = h;
  s.in_width = w;
  s.stem_width = 64;
  s.stem_stride = 1;
  s.blocks = {{64, 1}, {64, 1}, {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1}};
  s.projector_hidden = 512;
  s.projector_out = 128;
  return s;
}

EncoderSpec EncoderSpec::micro(std::size_t c, std::size_t h, std::size_t w) {
  EncoderSpec s;
  s.in_channels = c;
  s.in_height = h;
  s.in_width = w;
  return s;
}

// ---------------------------------------------------------------- construction

namespace {

double normal(Rng& rng) {
  // Box-Muller on the platform-independent uniform stream.
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

// grad *= (activation > 0)
void relu_mask(Tensor& grad, const Tensor& activation) {
  for (std::size_t i = 0; i < grad.numel(); ++i)
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
}

void add_inplace(Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

std::span<double> slice_of(std::span<double> v, const ParamSlice& s) {
  return v.empty() ? v : v.subspan(s.offset, s.size);
}

}  // namespace

ParamSlice Encoder::add_param(const std::string& name, std::size_t size) {
  ParamSlice s{params_.size(), size};
  params_.resize(params_.size() + size, 0.0);
  param_layout_[name] = s;
  return s;
}

ParamSlice Encoder::add_buffer(std::size_t size) {
  ParamSlice s{buffers_.size(), size};
  buffers_.resize(buffers_.size() + size, 0.0);
  return s;
}

Encoder::ConvLayer Encoder::make_conv(const std::string& name, std::size_t in, std::size_t out,
                                      std::size_t k, std::size_t stride, std::size_t pad) {
  ConvLayer c;
  c.geom = {in, out, k, stride, pad};
  c.weight = add_param(name + ".weight", c.geom.weight_count());
  return c;
}

Encoder::BnLayer Encoder::make_bn(const std::string& name, std::size_t channels) {
  BnLayer b;
  b.channels = channels;
  const int sets = spec_.bn_mode == BnMode::dual ? 2 : 1;
  for (int i = 0; i < 2; ++i) {
    if (i < sets) {
      const std::string tag = i == 0 ? ".std" : ".adv";
      b.gamma[i] = add_param(name + tag + ".gamma", channels);
      b.beta[i] = add_param(name + tag + ".beta", channels);
      b.running_mean[i] = add_buffer(channels);
      b.running_var[i] = add_buffer(channels);
    } else {
      b.gamma[i] = b.gamma[0];
      b.beta[i] = b.beta[0];
      b.running_mean[i] = b.running_mean[0];
      b.running_var[i] = b.running_var[0];
    }
  }
  return b;
}

Encoder::Linear Encoder::make_linear(const std::string& name, std::size_t in, std::size_t out) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = add_param(name + ".weight", in * out);
  l.bias = add_param(name + ".bias", out);
  return l;
}

Encoder::Encoder(EncoderSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  require(spec_.in_channels > 0 && spec_.in_height > 0 && spec_.in_width > 0,
          "EncoderSpec: empty input shape");
  require(spec_.projector_out > 0 && spec_.projector_hidden > 0, "EncoderSpec: empty projector");
  stem_conv_ = make_conv("stem.conv", spec_.in_channels, spec_.stem_width, 3, spec_.stem_stride, 1);
  stem_bn_ = make_bn("stem.bn", spec_.stem_width);
  std::size_t width = spec_.stem_width;
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    const BlockSpec& bs = spec_.blocks[i];
    const std::string p = "block" + std::to_string(i);
    Block b;
    b.conv1 = make_conv(p + ".conv1", width, bs.width, 3, bs.stride, 1);
    b.bn1 = make_bn(p + ".bn1", bs.width);
    b.conv2 = make_conv(p + ".conv2", bs.width, bs.width, 3, 1, 1);
    b.bn2 = make_bn(p + ".bn2", bs.width);
    b.projection = bs.stride != 1 || bs.width != width;
    if (b.projection) {
      b.shortcut = make_conv(p + ".shortcut", width, bs.width, 1, bs.stride, 0);
      b.bn_short = make_bn(p + ".bn_short", bs.width);
    }
    blocks_.push_back(b);
    width = bs.width;
  }
  fc1_ = make_linear("proj.fc1", width, spec_.projector_hidden);
  if (spec_.projector_bn) proj_bn_ = make_bn("proj.bn", spec_.projector_hidden);
  fc2_ = make_linear("proj.fc2", spec_.projector_hidden, spec_.projector_out);

  Rng rng(seed);
  for (const auto& [name, slice] : param_layout_) {
    double* p = params_.data() + slice.offset;
    if (name.ends_with(".gamma")) {
      std::fill_n(p, slice.size, 1.0);
    } else if (name.ends_with(".beta") || name.ends_with(".bias")) {
      std::fill_n(p, slice.size, 0.0);
    }
  }
  // Weights are drawn in layer order so the layout above fixes the stream.
  const auto he = [&](const ParamSlice& s, double fan_in, double gain) {
    const double std = std::sqrt(gain / fan_in);
    for (std::size_t i = 0; i < s.size; ++i) params_[s.offset + i] = std * normal(rng);
  };
  const auto conv_fan = [](const ConvLayer& c) {
    return static_cast<double>(c.geom.in_channels * c.geom.kernel * c.geom.kernel);
  };
  he(stem_conv_.weight, conv_fan(stem_conv_), 2.0);
  for (const Block& b : blocks_) {
    he(b.conv1.weight, conv_fan(b.conv1), 2.0);
    he(b.conv2.weight, conv_fan(b.conv2), 2.0);
    if (b.projection) he(b.shortcut.weight, conv_fan(b.shortcut), 2.0);
  }
  he(fc1_.weight, static_cast<double>(fc1_.in), 2.0);
  he(fc2_.weight, static_cast<double>(fc2_.in), 1.0);

  // Running variance starts at 1.
  const auto init_bn = [&](const BnLayer& bn) {
    for (int i = 0; i < 2; ++i)
      std::fill_n(buffers_.data() + bn.running_var[i].offset, bn.channels, 1.0);
  };
  init_bn(stem_bn_);
  for (const Block& b : blocks_) {
    init_bn(b.bn1);
    init_bn(b.bn2);
    if (b.projection) init_bn(b.bn_short);
  }
}

std::span<double> Encoder::param(const std::string& name) {
  const auto it = param_layout_.find(name);
  require(it != param_layout_.end(), "unknown parameter " + name);
  return std::span<double>(params_).subspan(it->second.offset, it->second.size);
}

std::span<const double> Encoder::param(const std::string& name) const {
  const auto it = param_layout_.find(name);
  require(it != param_layout_.end(), "unknown parameter " + name);
  return std::span<const double>(params_).subspan(it->second.offset, it->second.size);
}

bool Encoder::is_branch_param(const std::string& name) {
  return name.find(".std.") != std::string::npos || name.find(".adv.") != std::string::npos;
}

int Encoder::bn_index(Branch b) const {
  return spec_.bn_mode == BnMode::dual && b == Branch::adversarial ? 1 : 0;
}

// ---------------------------------------------------------------- forward

void Encoder::bn_forward(const BnLayer& bn, int idx, Mode mode, const Tensor& in, Tensor& out,
                         BnTrace& trace) const {
  std::span<const double> gamma(params_.data() + bn.gamma[idx].offset, bn.channels);
  std::span<const double> beta(params_.data() + bn.beta[idx].offset, bn.channels);
  if (mode == Mode::train) {
    kp::batchnorm_forward_train(in, gamma, beta, spec_.bn_eps, out, trace.xhat, trace.stats);
    return;
  }
  std::span<const double> rm(buffers_.data() + bn.running_mean[idx].offset, bn.channels);
  std::span<const double> rv(buffers_.data() + bn.running_var[idx].offset, bn.channels);
  kp::batchnorm_forward_eval(in, gamma, beta, rm, rv, spec_.bn_eps, out);
  // xhat for the gamma gradient.
  trace.xhat = Tensor(in.shape());
  const Shape& s = in.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double inv = 1.0 / std::sqrt(rv[c] + spec_.bn_eps);
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const std::size_t i = (n * s.c + c) * s.plane() + p;
        trace.xhat[i] = (in[i] - rm[c]) * inv;
      }
    }
  trace.stats = {};
}

Matrix Encoder::linear_forward(const Linear& l, const Matrix& x) const {
  ConstRowMap w(params_.data() + l.weight.offset, static_cast<Eigen::Index>(l.out),
                static_cast<Eigen::Index>(l.in));
  Eigen::Map<const Eigen::VectorXd> b(params_.data() + l.bias.offset,
                                      static_cast<Eigen::Index>(l.out));
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

Matrix Encoder::extract(const Tensor& x, Branch branch, Mode mode, EncoderTrace& t) const {
  const Shape& s = x.shape();
  require(s.n >= 1, "encoder: empty batch");
  require(s.c == spec_.in_channels && s.h == spec_.in_height && s.w == spec_.in_width,
          "encoder: input shaped " + s.str() + " does not match spec " +
              spec_.input_shape(s.n).str());
  const int idx = bn_index(branch);
  t.branch = branch;
  t.mode = mode;
  t.input = x;
  kp::conv2d_forward(x, std::span<const double>(params_).subspan(stem_conv_.weight.offset,
                                                                 stem_conv_.weight.size),
                     stem_conv_.geom, t.stem_conv_out);
  Tensor tmp;
  bn_forward(stem_bn_, idx, mode, t.stem_conv_out, tmp, t.stem_bn);
  t.stem_out = relu(tmp);

  const Tensor* cur = &t.stem_out;
  t.blocks.assign(blocks_.size(), {});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    BlockTrace& bt = t.blocks[i];
    bt.input = *cur;
    const auto w = [&](const ConvLayer& c) {
      return std::span<const double>(params_).subspan(c.weight.offset, c.weight.size);
    };
    kp::conv2d_forward(bt.input, w(b.conv1), b.conv1.geom, bt.conv1_out);
    bn_forward(b.bn1, idx, mode, bt.conv1_out, tmp, bt.bn1);
    bt.relu1_out = relu(tmp);
    kp::conv2d_forward(bt.relu1_out, w(b.conv2), b.conv2.geom, bt.conv2_out);
    Tensor main;
    bn_forward(b.bn2, idx, mode, bt.conv2_out, main, bt.bn2);
    if (b.projection) {
      Tensor sc;
      kp::conv2d_forward(bt.input, w(b.shortcut), b.shortcut.geom, sc);
      bn_forward(b.bn_short, idx, mode, sc, bt.short_out, bt.bn_short);
      add_inplace(main, bt.short_out);
    } else {
      add_inplace(main, bt.input);
    }
    bt.output = relu(main);
    cur = &bt.output;
  }

  const Shape& fs = cur->shape();
  Matrix pooled(static_cast<Eigen::Index>(fs.n), static_cast<Eigen::Index>(fs.c));
  for (std::size_t n = 0; n < fs.n; ++n)
    for (std::size_t c = 0; c < fs.c; ++c) {
      double sum = 0.0;
      const double* p = cur->data() + (n * fs.c + c) * fs.plane();
      for (std::size_t j = 0; j < fs.plane(); ++j) sum += p[j];
      pooled(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) =
          sum / static_cast<double>(fs.plane());
    }
  t.pooled = pooled;
  return pooled;
}

Matrix Encoder::representation(const Tensor& x, Branch branch, Mode mode,
                               EncoderTrace* trace) const {
  EncoderTrace local;
  EncoderTrace& t = trace ? *trace : local;
  t.projected = false;
  return extract(x, branch, mode, t);
}

Matrix Encoder::forward(const Tensor& x, Branch branch, Mode mode, EncoderTrace* trace) const {
  EncoderTrace local;
  EncoderTrace& t = trace ? *trace : local;
  t.projected = true;
  const Matrix rep = extract(x, branch, mode, t);
  return project_hidden(rep, bn_index(branch), mode, t);
}

Matrix Encoder::project_hidden(const Matrix& rep, int idx, Mode mode, EncoderTrace& t) const {
  Matrix lin = linear_forward(fc1_, rep);
  if (spec_.projector_bn) {
    const auto n = static_cast<std::size_t>(lin.rows());
    t.hidden_lin = Tensor({n, fc1_.out, 1, 1});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < fc1_.out; ++c)
        t.hidden_lin[r * fc1_.out + c] = lin(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    Tensor normed;
    bn_forward(proj_bn_, idx, mode, t.hidden_lin, normed, t.proj_bn);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < fc1_.out; ++c)
        lin(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = normed[r * fc1_.out + c];
  }
  t.hidden_pre = std::move(lin);
  t.hidden = t.hidden_pre.cwiseMax(0.0);
  return linear_forward(fc2_, t.hidden);
}

Matrix Encoder::project(const Matrix& rep, Branch branch) const {
  require(static_cast<std::size_t>(rep.cols()) == fc1_.in, "project: representation width mismatch");
  EncoderTrace t;
  return project_hidden(rep, bn_index(branch), Mode::eval, t);
}

// ---------------------------------------------------------------- backward

Tensor Encoder::bn_backward(const BnLayer& bn, int idx, Mode mode, const Tensor& grad_out,
                            const BnTrace& trace, std::span<double> grad_params) const {
  std::span<const double> gamma(params_.data() + bn.gamma[idx].offset, bn.channels);
  std::vector<double> scratch_gamma(bn.channels, 0.0), scratch_beta(bn.channels, 0.0);
  std::span<double> gg = grad_params.empty() ? std::span<double>(scratch_gamma)
                                             : slice_of(grad_params, bn.gamma[idx]);
  std::span<double> gb = grad_params.empty() ? std::span<double>(scratch_beta)
                                             : slice_of(grad_params, bn.beta[idx]);
  Tensor grad_in;
  if (mode == Mode::train) {
    kp::batchnorm_backward_train(grad_out, trace.xhat, gamma, trace.stats.invstd, grad_in, gg, gb);
    return grad_in;
  }
  const Shape& s = grad_out.shape();
  grad_in = Tensor(s);
  const double* rv = buffers_.data() + bn.running_var[idx].offset;
  for (std::size_t c = 0; c < s.c; ++c) {
    const double scale = gamma[c] / std::sqrt(rv[c] + spec_.bn_eps);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < s.plane(); ++p) {
        const std::size_t i = (n * s.c + c) * s.plane() + p;
        gg[c] += grad_out[i] * trace.xhat[i];
        gb[c] += grad_out[i];
        grad_in[i] = grad_out[i] * scale;
      }
  }
  return grad_in;
}

Tensor Encoder::backward(const EncoderTrace& t, const Matrix& grad_out,
                         std::span<double> grad_params, bool want_input_grad) const {
  require(grad_params.empty() || grad_params.size() == params_.size(),
          "Encoder::backward: gradient buffer has wrong size");
  const int idx = bn_index(t.branch);
  const auto n = static_cast<Eigen::Index>(t.input.shape().n);
  require(grad_out.rows() == n, "Encoder::backward: gradient row count mismatch");

  Matrix g_pooled;
  if (t.projected) {
    require(static_cast<std::size_t>(grad_out.cols()) == fc2_.out,
            "Encoder::backward: embedding width mismatch");
    ConstRowMap w2(params_.data() + fc2_.weight.offset, static_cast<Eigen::Index>(fc2_.out),
                   static_cast<Eigen::Index>(fc2_.in));
    ConstRowMap w1(params_.data() + fc1_.weight.offset, static_cast<Eigen::Index>(fc1_.out),
                   static_cast<Eigen::Index>(fc1_.in));
    if (!grad_params.empty()) {
      RowMap(grad_params.data() + fc2_.weight.offset, static_cast<Eigen::Index>(fc2_.out),
             static_cast<Eigen::Index>(fc2_.in))
          .noalias() += grad_out.transpose() * t.hidden;
      Eigen::Map<Eigen::VectorXd>(grad_params.data() + fc2_.bias.offset,
                                  static_cast<Eigen::Index>(fc2_.out)) +=
          grad_out.colwise().sum().transpose();
    }
    Matrix g_hidden = grad_out * w2;
    g_hidden = (t.hidden_pre.array() > 0.0).select(g_hidden, 0.0);
    if (spec_.projector_bn) {
      const auto rows = static_cast<std::size_t>(g_hidden.rows());
      Tensor gt({rows, fc1_.out, 1, 1});
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < fc1_.out; ++c)
          gt[r * fc1_.out + c] = g_hidden(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      const Tensor gl = bn_backward(proj_bn_, idx, t.mode, gt, t.proj_bn, grad_params);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < fc1_.out; ++c)
          g_hidden(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = gl[r * fc1_.out + c];
    }
    if (!grad_params.empty()) {
      RowMap(grad_params.data() + fc1_.weight.offset, static_cast<Eigen::Index>(fc1_.out),
             static_cast<Eigen::Index>(fc1_.in))
          .noalias() += g_hidden.transpose() * t.pooled;
      Eigen::Map<Eigen::VectorXd>(grad_params.data() + fc1_.bias.offset,
                                  static_cast<Eigen::Index>(fc1_.out)) +=
          g_hidden.colwise().sum().transpose();
    }
    g_pooled = g_hidden * w1;
  } else {
    require(grad_out.cols() == t.pooled.cols(), "Encoder::backward: representation width mismatch");
    g_pooled = grad_out;
  }

  const Tensor& feat = t.blocks.empty() ? t.stem_out : t.blocks.back().output;
  const Shape& fs = feat.shape();
  Tensor g(fs);
  for (std::size_t s = 0; s < fs.n; ++s)
    for (std::size_t c = 0; c < fs.c; ++c) {
      const double v = g_pooled(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) /
                       static_cast<double>(fs.plane());
      double* p = g.data() + (s * fs.c + c) * fs.plane();
      std::fill_n(p, fs.plane(), v);
    }

  const auto conv_back = [&](const ConvLayer& c, const Tensor& input, const Tensor& grad,
                             bool need_input) {
    std::span<const double> w =
        std::span<const double>(params_).subspan(c.weight.offset, c.weight.size);
    if (!grad_params.empty()) kp::conv2d_backward_weight(input, grad, c.geom, slice_of(grad_params, c.weight));
    Tensor gin;
    if (need_input) {
      gin = Tensor(input.shape());
      kp::conv2d_backward_input(grad, w, c.geom, gin);
    }
    return gin;
  };

  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const Block& b = blocks_[i];
    const BlockTrace& bt = t.blocks[i];
    relu_mask(g, bt.output);
    Tensor g_main = bn_backward(b.bn2, idx, t.mode, g, bt.bn2, grad_params);
    g_main = conv_back(b.conv2, bt.relu1_out, g_main, true);
    relu_mask(g_main, bt.relu1_out);
    g_main = bn_backward(b.bn1, idx, t.mode, g_main, bt.bn1, grad_params);
    g_main = conv_back(b.conv1, bt.input, g_main, true);
    if (b.projection) {
      Tensor g_short = bn_backward(b.bn_short, idx, t.mode, g, bt.bn_short, grad_params);
      g_short = conv_back(b.shortcut, bt.input, g_short, true);
      add_inplace(g_main, g_short);
    } else {
      add_inplace(g_main, g);
    }
    g = std::move(g_main);
  }
  relu_mask(g, t.stem_out);
  g = bn_backward(stem_bn_, idx, t.mode, g, t.stem_bn, grad_params);
  return conv_back(stem_conv_, t.input, g, want_input_grad);
}

void Encoder::commit_running_stats(const EncoderTrace& t) {
  if (t.mode != Mode::train) return;
  const int idx = bn_index(t.branch);
  const double m = spec_.bn_momentum;
  const auto update = [&](const BnLayer& bn, const BnTrace& tr, const Tensor& normalized_input) {
    if (tr.stats.mean.empty()) return;
    const Shape& s = normalized_input.shape();
    const double count = static_cast<double>(s.n * s.plane());
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    double* rm = buffers_.data() + bn.running_mean[idx].offset;
    double* rv = buffers_.data() + bn.running_var[idx].offset;
    for (std::size_t c = 0; c < bn.channels; ++c) {
      rm[c] = (1 - m) * rm[c] + m * tr.stats.mean[c];
      rv[c] = (1 - m) * rv[c] + m * tr.stats.var[c] * unbias;
    }
  };
  update(stem_bn_, t.stem_bn, t.stem_conv_out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    const BlockTrace& bt = t.blocks[i];
    update(b.bn1, bt.bn1, bt.conv1_out);
    update(b.bn2, bt.bn2, bt.conv2_out);
    if (b.projection) update(b.bn_short, bt.bn_short, bt.short_out);
  }
  if (t.projected && spec_.projector_bn) update(proj_bn_, t.proj_bn, t.hidden_lin);
}

}  // namespace airacl
