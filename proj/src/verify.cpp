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

#include "airacl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "airacl/adversary.hpp"
#include "airacl/augment.hpp"
#include "airacl/error.hpp"
#include "airacl/rng.hpp"
#include "json.hpp"

namespace airacl {

std::string VerifyRecord::to_json() const {
  nlohmann::json j = {{"check", check},         {"seed", seed}, {"max_error", max_error},
                      {"tolerance", tolerance}, {"pass", pass}, {"asserted", asserted}};
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

bool all_passed(const std::vector<VerifyRecord>& records) {
  return std::all_of(records.begin(), records.end(),
                     [](const VerifyRecord& r) { return r.pass || !r.asserted; });
}

EncoderSpec verify_micro_spec(std::size_t out_dim) {
  EncoderSpec s;
  s.in_channels = 3;
  s.in_height = 8;
  s.in_width = 8;
  s.stem_width = 4;
  s.stem_stride = 1;
  s.blocks = {{4, 2}};
  s.projector_hidden = 32;
  s.projector_out = out_dim;
  return s;
}

ViewBatch random_view_batch(const EncoderSpec& spec, std::size_t beta, double epsilon,
                            std::uint64_t seed) {
  Rng rng(seed);
  ViewBatch b;
  b.originals = Tensor(spec.input_shape(beta));
  for (double& v : b.originals.values()) v = uniform01(rng);
  b.view_i = Tensor(b.originals.shape());
  b.view_j = Tensor(b.originals.shape());
  const std::size_t stride = b.originals.shape().per_sample();
  for (std::size_t k = 0; k < beta; ++k) {
    const Sample x{b.originals.slice(k, 1), std::nullopt};
    const auto [vi, vj] = make_view_pair(x, 1.0, derive_seed(seed, {k, 0}), derive_seed(seed, {k, 1}));
    std::copy_n(vi.pixels.data(), stride, b.view_i.data() + k * stride);
    std::copy_n(vj.pixels.data(), stride, b.view_j.data() + k * stride);
  }
  const auto perturb = [&](const Tensor& v) {
    Tensor a = v;
    for (double& p : a.values()) p += uniform(rng, -epsilon, epsilon);
    return project_linf(a, v, epsilon);
  };
  b.adv_i = perturb(b.view_i);
  b.adv_j = perturb(b.view_j);
  return b;
}

double objective_gradient_error(const ViewBatch& batch, const Encoder& encoder,
                                const RegularizerConfig& cfg, double h) {
  EmbeddingTraces traces;
  const Embeddings e = embed(batch, encoder, Mode::train, &traces);
  Embeddings g;
  objective(e, cfg, &g);
  std::vector<double> analytic(encoder.num_params(), 0.0);
  backprop_embeddings(encoder, traces, g, analytic);

  Encoder probe = encoder;
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.num_params(); ++p) {
    const double orig = probe.params()[p];
    probe.params()[p] = orig + h;
    const double up = total_objective(batch, probe, cfg, Mode::train);
    probe.params()[p] = orig - h;
    const double down = total_objective(batch, probe, cfg, Mode::train);
    probe.params()[p] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-3});
    worst = std::max(worst, std::abs(analytic[p] - numeric) / scale);
  }
  return worst;
}

namespace {

constexpr double kTemperature = 0.5;
constexpr double kEps = 8.0 / 255.0;

struct Draw {
  Encoder encoder;
  ViewBatch batch;
};

Draw make_draw(std::uint64_t seed, int index) {
  static constexpr std::size_t kBetas[] = {2, 4, 8};
  static constexpr std::size_t kDims[] = {4, 16};
  const auto i = static_cast<std::size_t>(index);
  const EncoderSpec spec = verify_micro_spec(kDims[(i / 3) % 2]);
  const std::uint64_t s = derive_seed(seed, {i});
  return {Encoder(spec, derive_seed(s, {1})), random_view_batch(spec, kBetas[i % 3], kEps, derive_seed(s, {2}))};
}

VerifyRecord record(const std::string& name, std::uint64_t seed, double err, double tol,
                    std::string detail = {}) {
  return {name, seed, err, tol, err <= tol, true, std::move(detail)};
}

VerifyRecord check_air_decomposition(const VerifyOptions& o, std::uint64_t seed) {
  double worst = 0.0;
  for (int d = 0; d < o.draws; ++d) {
    const Draw w = make_draw(seed, d);
    const double air = air_loss(w.batch, w.encoder, kTemperature);
    auto [t1, t2] = air_decomposition(w.batch, w.encoder, kTemperature);
    if (o.break_decomposition) t2 *= 1.01;
    worst = std::max(worst, std::abs(air - (t1 + t2)) / (1.0 + std::abs(air)));
  }
  return record("air_decomposition", seed, worst, 1e-6);
}

VerifyRecord check_peer_likelihood(const VerifyOptions& o, std::uint64_t seed, bool adv) {
  double worst = 0.0;
  for (int d = 0; d < o.draws; ++d) {
    const Draw w = make_draw(derive_seed(seed, {0x71}), d);
    worst = std::max(worst, theorem1_identity(w.batch, w.encoder, kTemperature, adv));
  }
  return record(adv ? "peer_likelihood_adversarial" : "peer_likelihood_natural", seed, worst, 1e-6);
}

std::vector<VerifyRecord> check_tables(const VerifyOptions& o, std::uint64_t seed) {
  double sir_gap = 0.0, sir_same = 0.0, norm = 0.0, negative = 0.0, kl_neg = 0.0, kl_self = 0.0,
         zero_reg = 0.0;
  for (int d = 0; d < o.draws; ++d) {
    Draw w = make_draw(derive_seed(seed, {0x5A}), d);
    const double sir = sir_loss(w.batch, w.encoder, kTemperature);
    const ProbabilityTable ci = prob_y_given_x(w.batch, w.encoder, kTemperature, ViewSide::i);
    const ProbabilityTable cj = prob_y_given_x(w.batch, w.encoder, kTemperature, ViewSide::j);
    sir_gap = std::max(sir_gap, std::abs(sir - kl_batch(ci, cj)));
    kl_neg = std::max(kl_neg, -std::min(0.0, kl_batch(ci, cj)));
    kl_self = std::max(kl_self, std::abs(kl_batch(ci, ci)));
    for (ViewSide side : {ViewSide::i, ViewSide::j}) {
      for (const ProbabilityTable& t :
           {prob_y_given_adv(w.batch, w.encoder, kTemperature, side),
            prob_adv_given_x(w.batch, w.encoder, kTemperature, side),
            prob_y_given_x(w.batch, w.encoder, kTemperature, side)}) {
        norm = std::max(norm, std::abs(t.sum() - 1.0));
        for (double v : t.values) negative = std::max(negative, -std::min(0.0, v));
      }
    }
    ViewBatch same = w.batch;
    same.view_j = same.view_i;
    same.adv_j = same.adv_i;
    sir_same = std::max(sir_same, std::abs(sir_loss(same, w.encoder, kTemperature)));
    zero_reg = std::max(zero_reg, std::abs(air_loss(same, w.encoder, kTemperature)));
  }
  return {record("sir_definition", seed, sir_gap, 0.0),
          record("sir_zero_for_equal_views", seed, sir_same, 0.0),
          record("air_zero_for_equal_views", seed, zero_reg, 0.0),
          record("probability_normalization", seed, norm, 1e-6),
          record("probability_nonnegative", seed, negative, 0.0),
          record("kl_nonnegative", seed, kl_neg, 0.0),
          record("kl_self_zero", seed, kl_self, 0.0)};
}

VerifyRecord check_gradient(std::uint64_t seed) {
  const EncoderSpec spec = verify_micro_spec(4);
  const Encoder enc(spec, derive_seed(seed, {0x6A}));
  ViewBatch b = random_view_batch(spec, 4, kEps, derive_seed(seed, {0x6B}));
  auto [ai, aj] = pgd_pair(b.view_i, b.view_j, enc, kTemperature, PgdConfig::pretraining(),
                           derive_seed(seed, {0x6C}));
  b.adv_i = std::move(ai);
  b.adv_j = std::move(aj);
  RegularizerConfig cfg;
  cfg.lambda1 = 0.5;
  cfg.lambda2 = 0.5;
  cfg.epsilon = kEps;
  cfg.temperature = kTemperature;
  std::ostringstream detail;
  detail << "params=" << enc.num_params();
  return record("gradient_check", seed, objective_gradient_error(b, enc, cfg), 1e-4, detail.str());
}

std::vector<VerifyRecord> check_pgd(const VerifyOptions& o, std::uint64_t seed) {
  const EncoderSpec spec = verify_micro_spec(4);
  const Encoder enc(spec, derive_seed(seed, {0x9A}));
  const PgdConfig cfg = PgdConfig::pretraining();
  const std::size_t pairs = std::max<std::size_t>(1, o.pgd_samples / 2);
  const std::size_t beta = 8;
  double violation = 0.0, identity = 0.0, sign = 0.0;
  for (std::size_t done = 0, chunk = 0; done < pairs; done += beta, ++chunk) {
    const ViewBatch b = random_view_batch(spec, std::min(beta, std::max<std::size_t>(2, pairs - done)),
                                          cfg.epsilon, derive_seed(seed, {0x9B, chunk}));
    const auto [ai, aj] = pgd_pair(b.view_i, b.view_j, enc, kTemperature, cfg, derive_seed(seed, {0x9C, chunk}));
    for (const auto* pr : {&ai, &aj}) {
      const Tensor& anchor = pr == &ai ? b.view_i : b.view_j;
      for (std::size_t k = 0; k < anchor.numel(); ++k) {
        const double a = pr->data()[k];
        violation = std::max({violation, std::abs(a - anchor.data()[k]) - cfg.epsilon, -a, a - 1.0});
      }
    }
    if (chunk == 0) {
      const PgdConfig none{cfg.epsilon, 0, cfg.step_size, false};
      const auto [ii, ij] = pgd_pair(b.view_i, b.view_j, enc, kTemperature, none, 1);
      identity = std::max(max_abs_diff(ii, b.view_i), max_abs_diff(ij, b.view_j));

      const PgdConfig one{cfg.epsilon, 1, cfg.step_size, false};
      const auto [si, sj] = pgd_pair(b.view_i, b.view_j, enc, kTemperature, one, 1);
      Tensor gi, gj;
      adversarial_pair_loss(b.view_i, b.view_j, enc, kTemperature, Mode::train, &gi, &gj);
      for (int side = 0; side < 2; ++side) {
        const Tensor& x = side == 0 ? b.view_i : b.view_j;
        const Tensor& g = side == 0 ? gi : gj;
        const Tensor& got = side == 0 ? si : sj;
        for (std::size_t k = 0; k < x.numel(); ++k) {
          const double gk = g.data()[k];
          const double s = gk > 0.0 ? 1.0 : (gk < 0.0 ? -1.0 : 0.0);
          const double lo = std::max(0.0, x.data()[k] - cfg.epsilon);
          const double hi = std::min(1.0, x.data()[k] + cfg.epsilon);
          const double want = std::clamp(x.data()[k] + cfg.step_size * s, lo, hi);
          sign = std::max(sign, std::abs(want - got.data()[k]));
        }
      }
    }
  }
  return {record("pgd_feasibility", seed, std::max(0.0, violation), 1e-6),
          record("pgd_zero_steps_identity", seed, identity, 0.0),
          record("pgd_sign_step", seed, sign, 0.0)};
}

VerifyRecord check_scale_invariance(const VerifyOptions& o, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x5C}));
  RegularizerConfig cfg;
  double worst = 0.0;
  for (int d = 0; d < o.draws; ++d) {
    const Eigen::Index beta = 2 + d % 7, dim = d % 2 ? 4 : 16;
    Embeddings e;
    for (Matrix* m : {&e.originals, &e.nat_i, &e.nat_j, &e.adv_i, &e.adv_j}) {
      *m = Matrix(beta, dim);
      for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = uniform(rng, -1.0, 1.0);
    }
    const double base = objective(e, cfg).total;
    Embeddings scaled = e;
    for (Matrix* m : {&scaled.originals, &scaled.nat_i, &scaled.nat_j, &scaled.adv_i, &scaled.adv_j})
      for (Eigen::Index r = 0; r < m->rows(); ++r) m->row(r) *= uniform(rng, 0.1, 10.0);
    worst = std::max(worst, std::abs(objective(scaled, cfg).total - base) / (1.0 + std::abs(base)));
  }
  return record("scale_invariance", seed, worst, 1e-9);
}

VerifyRecord check_calibration(const VerifyOptions& o, std::uint64_t seed) {
  int differ = 0, finite = 0;
  for (int d = 0; d < o.draws; ++d) {
    const Draw w = make_draw(derive_seed(seed, {0xCA}), d);
    const double a = air_loss(w.batch, w.encoder, kTemperature);
    const double u = uncalibrated_air(w.batch, w.encoder, kTemperature);
    if (std::isfinite(a) && std::isfinite(u)) ++finite;
    if (a != u) ++differ;
  }
  const int need = (95 * o.draws + 99) / 100;
  VerifyRecord r{"calibration_distinct", seed, static_cast<double>(o.draws - differ),
                 static_cast<double>(o.draws - need), finite == o.draws && differ >= need, true,
                 "differ=" + std::to_string(differ) + "/" + std::to_string(o.draws)};
  return r;
}

VerifyRecord report_ir_limit(std::uint64_t seed) {
  // With the adversarial views equal to the natural ones, p(adv|x) is uniform,
  // so the adversarial term collapses to a 1/beta-scaled copy of SIR.
  const EncoderSpec spec = verify_micro_spec(4);
  const Encoder enc(spec, derive_seed(seed, {0x1A}));
  ViewBatch b = random_view_batch(spec, 8, 0.0, derive_seed(seed, {0x1B}));
  b.adv_i = b.view_i;
  b.adv_j = b.view_j;
  const double sir = sir_loss(b, enc, kTemperature, Mode::eval);
  const double ir0 = air_loss(b, enc, kTemperature, Mode::eval);
  std::ostringstream detail;
  detail.precision(12);
  detail << "sir=" << sir << " ir_eps0=" << ir0 << " beta=8";
  return {"ir_limit_vs_sir", seed, std::abs(ir0 * 8.0 - sir), 0.0, true, false, detail.str()};
}

}  // namespace

std::vector<VerifyRecord> run_verification(const VerifyOptions& opts) {
  require(opts.seeds >= 1 && opts.draws >= 1, "verification needs at least one seed and draw");
  std::vector<VerifyRecord> out;
  for (int s = 0; s < opts.seeds; ++s) {
    const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(s);
    out.push_back(check_air_decomposition(opts, seed));
    out.push_back(check_peer_likelihood(opts, seed, false));
    out.push_back(check_peer_likelihood(opts, seed, true));
    for (auto& r : check_tables(opts, seed)) out.push_back(std::move(r));
    out.push_back(check_gradient(seed));
    for (auto& r : check_pgd(opts, seed)) out.push_back(std::move(r));
    out.push_back(check_scale_invariance(opts, seed));
    out.push_back(check_calibration(opts, seed));
    out.push_back(report_ir_limit(seed));
  }
  return out;
}

}  // namespace airacl
