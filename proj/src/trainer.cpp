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

#include "airacl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "airacl/error.hpp"
#include "airacl/rng.hpp"
#include "json.hpp"

namespace airacl {

namespace fs = std::filesystem;

const char* to_string(PretrainMode m) { return m == PretrainMode::acl ? "acl" : "dynacl"; }

PretrainMode parse_pretrain_mode(const std::string& s) {
  if (s == "acl") return PretrainMode::acl;
  if (s == "dynacl") return PretrainMode::dynacl;
  throw ConfigError("unknown pre-training mode '" + s + "' (expected acl or dynacl)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (decay_period < 1) throw ConfigError("schedule.decay_period must be >= 1");
  if (num_workers < 1) throw ConfigError("num_workers must be >= 1");
  try {
    reg.validate();
    attack.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

int TrainConfig::checkpoint_period() const {
  return checkpoint_every > 0 ? checkpoint_every : std::max(1, epochs / 20);
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.epochs = 1000;
  c.batch_size = 512;
  c.lr = 5.0;
  c.reg.lambda1 = 0.5;
  c.reg.lambda2 = 0.5;
  c.reg.epsilon = 8.0 / 255.0;
  c.attack.epsilon = 8.0 / 255.0;
  return c;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.mode = PretrainMode::dynacl;
  c.lr = 0.3;
  c.decay_period = 1;
  return c;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c = desk();
  c.mode = parse_pretrain_mode(kv.get_string("train.mode", to_string(c.mode)));
  c.epochs = static_cast<int>(kv.get_int("train.epochs", c.epochs));
  c.batch_size = static_cast<std::size_t>(kv.get_int("train.batch_size", static_cast<long long>(c.batch_size)));
  c.lr = kv.get_double("train.lr", c.lr);
  c.sgd.momentum = kv.get_double("train.momentum", c.sgd.momentum);
  c.sgd.weight_decay = kv.get_double("train.weight_decay", c.sgd.weight_decay);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(c.seed)));
  c.checkpoint_every = static_cast<int>(kv.get_int("train.checkpoint_every", c.checkpoint_every));
  c.reg.temperature = kv.get_double("loss.temperature", c.reg.temperature);
  c.reg.omega = kv.get_double("loss.omega", c.reg.omega);
  c.reg.lambda1 = kv.get_double("loss.lambda1", c.reg.lambda1);
  c.reg.lambda2 = kv.get_double("loss.lambda2", c.reg.lambda2);
  c.reg.calibrated = kv.get_bool("loss.calibrated", c.reg.calibrated);
  c.attack.epsilon = kv.get_double("attack.eps", c.attack.epsilon);
  c.attack.steps = static_cast<int>(kv.get_int("attack.steps", c.attack.steps));
  c.attack.step_size = kv.get_double("attack.alpha", c.attack.step_size);
  c.attack.random_start = kv.get_bool("attack.random_start", c.attack.random_start);
  c.reg.epsilon = c.attack.epsilon;
  c.decay_period = static_cast<int>(kv.get_int("schedule.decay_period", c.decay_period));
  c.reweight_rate = kv.get_double("schedule.reweight_rate", c.reweight_rate);
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig kv;
  const auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
  };
  kv.set("train.mode", to_string(mode));
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.lr", num(lr));
  kv.set("train.momentum", num(sgd.momentum));
  kv.set("train.weight_decay", num(sgd.weight_decay));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.checkpoint_every", std::to_string(checkpoint_every));
  kv.set("loss.temperature", num(reg.temperature));
  kv.set("loss.omega", num(reg.omega));
  kv.set("loss.lambda1", num(reg.lambda1));
  kv.set("loss.lambda2", num(reg.lambda2));
  kv.set("loss.calibrated", reg.calibrated ? "true" : "false");
  kv.set("attack.eps", num(attack.epsilon));
  kv.set("attack.steps", std::to_string(attack.steps));
  kv.set("attack.alpha", num(attack.step_size));
  kv.set("attack.random_start", attack.random_start ? "true" : "false");
  kv.set("schedule.decay_period", std::to_string(decay_period));
  kv.set("schedule.reweight_rate", num(reweight_rate));
  return kv;
}

std::string EpochMetrics::to_json() const {
  const nlohmann::json j = {{"epoch", epoch}, {"lr", lr},   {"mu", mu},       {"omega", omega},
                            {"acl_loss", acl_loss}, {"sir", sir}, {"air", air}, {"total", total}};
  return j.dump();
}

ViewBatch make_view_batch(const Dataset& data, std::span<const std::size_t> indices, double mu,
                          std::uint64_t seed, int epoch, int num_workers) {
  require(!indices.empty(), "make_view_batch: no samples");
  ViewBatch b;
  b.originals = data.images.gather(indices);
  b.view_i = Tensor(b.originals.shape());
  b.view_j = Tensor(b.originals.shape());
  const std::size_t stride = b.originals.shape().per_sample();
  const auto count = static_cast<std::ptrdiff_t>(indices.size());
#pragma omp parallel for num_threads(num_workers) schedule(static)
  for (std::ptrdiff_t kk = 0; kk < count; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    const Sample x = data.sample(indices[k]);
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto [vi, vj] = make_view_pair(x, mu, derive_seed(seed, {e, indices[k], 0}),
                                         derive_seed(seed, {e, indices[k], 1}));
    std::copy_n(vi.pixels.data(), stride, b.view_i.data() + k * stride);
    std::copy_n(vj.pixels.data(), stride, b.view_j.data() + k * stride);
  }
  return b;
}

ObjectiveTerms train_step(Encoder& encoder, Sgd& optimizer, ViewBatch& batch,
                          const RegularizerConfig& reg, const PgdConfig& attack, double lr,
                          std::uint64_t attack_seed) {
  auto [adv_i, adv_j] =
      pgd_pair(batch.view_i, batch.view_j, encoder, reg.temperature, attack, attack_seed);
  batch.adv_i = std::move(adv_i);
  batch.adv_j = std::move(adv_j);

  EmbeddingTraces traces;
  const Embeddings e = embed(batch, encoder, Mode::train, &traces);
  Embeddings grads;
  const ObjectiveTerms terms = objective(e, reg, &grads);

  std::vector<double> g(encoder.num_params(), 0.0);
  backprop_embeddings(encoder, traces, grads, g);
  // The objective sums over all 2B anchors; the update uses the per-anchor mean.
  const double scale = 1.0 / (2.0 * static_cast<double>(batch.size()));
  for (double& v : g) {
    if (!std::isfinite(v)) throw NumericError("non-finite parameter gradient");
    v *= scale;
  }
  encoder.commit_running_stats(traces.standard);
  encoder.commit_running_stats(traces.adversarial);
  optimizer.step(encoder.params(), g, lr);
  return terms;
}

PretrainResult pretrain(const Dataset& data, const EncoderSpec& spec, const TrainConfig& cfg,
                        const std::optional<fs::path>& out_dir,
                        const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  if (data.size() < cfg.batch_size)
    throw ConfigError("dataset has " + std::to_string(data.size()) +
                      " samples, fewer than one batch of " + std::to_string(cfg.batch_size));
  const Shape& s = data.images.shape();
  if (s.c != spec.in_channels || s.h != spec.in_height || s.w != spec.in_width)
    throw ConfigError("dataset images " + s.str() + " do not match the encoder input");

  PretrainResult result{Encoder(spec, derive_seed(cfg.seed, {0x1417})), Sgd(), {}, {}, 0};
  Encoder& encoder = result.encoder;
  result.optimizer = Sgd(cfg.sgd, encoder.num_params());

  // Incomplete trailing batches are dropped so every softmax sees the same batch size.
  const std::size_t batches = data.size() / cfg.batch_size;
  const auto total_steps = static_cast<std::int64_t>(batches) * cfg.epochs;
  Rng shuffle_rng(derive_seed(cfg.seed, {0x5u}));

  std::ofstream metrics_file;
  if (out_dir) {
    fs::create_directories(*out_dir);
    metrics_file.open(*out_dir / "metrics.jsonl");
    if (!metrics_file) throw IoError("cannot write metrics in " + out_dir->string());
  }
  const auto make_ckpt = [&](int epoch, const SchedulerState& sched) {
    Checkpoint c = snapshot(encoder);
    c.optimizer_velocity = result.optimizer.velocity();
    c.epoch = epoch;
    c.scheduler = sched;
    std::ostringstream rs;
    rs << shuffle_rng;
    c.rng_state = rs.str();
    return c;
  };

  std::vector<std::size_t> order(data.size());
  SchedulerState sched;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.mode == PretrainMode::dynacl) {
      sched = make_scheduler_state(epoch, cfg.decay_period, cfg.epochs, cfg.reweight_rate);
    } else {
      sched = {epoch, cfg.epochs, cfg.decay_period, cfg.reweight_rate, 1.0, cfg.reg.omega};
    }
    RegularizerConfig reg = cfg.reg;
    reg.omega = sched.omega;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochMetrics m;
    m.epoch = epoch;
    m.mu = sched.mu;
    m.omega = sched.omega;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size, cfg.batch_size);
      ViewBatch batch = make_view_batch(data, idx, sched.mu, cfg.seed, epoch, cfg.num_workers);
      const double lr = cosine_lr(result.steps, total_steps, cfg.lr);
      if (b == 0) m.lr = lr;
      ObjectiveTerms terms;
      try {
        terms = train_step(encoder, result.optimizer, batch, reg, cfg.attack, lr,
                           derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), b, 0xA77}));
      } catch (const NumericError& e) {
        if (out_dir) save_checkpoint(make_ckpt(epoch, sched), *out_dir / "diagnostic.ckpt");
        throw NumericError(std::string("pre-training halted at epoch ") + std::to_string(epoch) +
                           ", batch " + std::to_string(b) + ": " + e.what());
      }
      result.lr_trace.push_back(lr);
      ++result.steps;
      m.acl_loss += terms.acl;
      m.sir += terms.sir;
      m.air += terms.air;
      m.total += terms.total;
    }
    const double nb = static_cast<double>(batches);
    m.acl_loss /= nb;
    m.sir /= nb;
    m.air /= nb;
    m.total /= nb;
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
    if (out_dir) {
      metrics_file << m.to_json() << "\n" << std::flush;
      if ((epoch + 1) % cfg.checkpoint_period() == 0 && epoch + 1 < cfg.epochs) {
        std::ostringstream name;
        name << "epoch_" << std::setw(4) << std::setfill('0') << epoch + 1 << ".ckpt";
        save_checkpoint(make_ckpt(epoch + 1, sched), *out_dir / name.str());
      }
    }
  }
  if (out_dir) save_checkpoint(make_ckpt(cfg.epochs, sched), *out_dir / "final.ckpt");
  return result;
}

}  // namespace airacl
