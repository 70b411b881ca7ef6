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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   airacl_acceptance            all criteria
//   airacl_acceptance 1 3 9      a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "airacl/adversary.hpp"
#include "airacl/checkpoint.hpp"
#include "airacl/corruption.hpp"
#include "airacl/finetune.hpp"
#include "airacl/objectives.hpp"
#include "airacl/schedule.hpp"
#include "airacl/trainer.hpp"
#include "airacl/verify.hpp"
#include "cli.hpp"

using namespace airacl;
namespace fs = std::filesystem;

namespace {

constexpr double kT = 0.5;
constexpr double kEps = 8.0 / 255.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ------------------------------------------------------------- test-side oracles

double cos_rows(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

std::vector<double> softmax_diag(const Matrix& a, const Matrix& b) {
  std::vector<double> e(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index k = 0; k < a.rows(); ++k) e[static_cast<std::size_t>(k)] = std::exp(cos_rows(a, k, b, k) / kT);
  const double s = std::accumulate(e.begin(), e.end(), 0.0);
  for (double& v : e) v /= s;
  return e;
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0) s += p[k] * std::log(p[k] / std::max(q[k], kKlFloor));
  return s;
}

// -log of the probability that row r of [a; b] picks its peer among the other 2*beta - 1 rows.
double neg_log_peer(const Matrix& a, const Matrix& b, Eigen::Index r) {
  const Eigen::Index beta = a.rows();
  Matrix z(2 * beta, a.cols());
  z << a, b;
  const Eigen::Index peer = (r + beta) % (2 * beta);
  double denom = 0.0;
  for (Eigen::Index c = 0; c < 2 * beta; ++c)
    if (c != r) denom += std::exp(cos_rows(z, r, z, c) / kT);
  return -std::log(std::exp(cos_rows(z, r, z, peer) / kT) / denom);
}

struct Draw {
  Encoder encoder;
  ViewBatch batch;
};

Draw draw(std::uint64_t i) {
  static constexpr std::size_t kBetas[] = {2, 4, 8};
  static constexpr std::size_t kDims[] = {4, 16};
  const EncoderSpec spec = verify_micro_spec(kDims[(i / 3) % 2]);
  return {Encoder(spec, 1000 + i), random_view_batch(spec, kBetas[i % 3], kEps, 5000 + i)};
}

// ------------------------------------------------------------------ criteria

Outcome decomposition_identity() {
  double worst = 0.0, worst_oracle = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Draw d = draw(i);
    const double air = air_loss(d.batch, d.encoder, kT);
    const auto [t1, t2] = air_decomposition(d.batch, d.encoder, kT);
    worst = std::max(worst, std::abs(air - (t1 + t2)) / (1 + std::abs(air)));

    const Embeddings e = embed(d.batch, d.encoder);
    const auto yi = softmax_diag(e.originals, e.adv_i), yj = softmax_diag(e.originals, e.adv_j);
    const auto ai = softmax_diag(e.adv_i, e.nat_i), aj = softmax_diag(e.adv_j, e.nat_j);
    std::vector<double> pi(yi.size()), pj(yi.size());
    for (std::size_t k = 0; k < yi.size(); ++k) {
      pi[k] = yi[k] * ai[k];
      pj[k] = yj[k] * aj[k];
    }
    worst_oracle = std::max(worst_oracle, std::abs(air - kl(pi, pj)) / (1 + std::abs(air)));
  }
  return {worst <= 1e-6 && worst_oracle <= 1e-6,
          "max |air - (term1 + term2)| / (1 + |air|) = " + fmt(worst) +
              ", vs table oracle " + fmt(worst_oracle)};
}

Outcome peer_likelihood() {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Draw d = draw(i);
    const Embeddings e = embed(d.batch, d.encoder);
    for (const auto& [a, b] : {std::pair{&e.nat_i, &e.nat_j}, std::pair{&e.adv_i, &e.adv_j}}) {
      const auto terms = contrastive_loss_terms(*a, *b, kT);
      const auto beta = a->rows();
      for (Eigen::Index k = 0; k < beta; ++k) {
        const double rhs = neg_log_peer(*a, *b, k) + neg_log_peer(*a, *b, k + beta);
        worst = std::max(worst, std::abs(terms[static_cast<std::size_t>(k)] - rhs));
      }
    }
  }
  return {worst <= 1e-6, "max per-sample gap (natural and adversarial) = " + fmt(worst)};
}

Outcome sir_definition() {
  bool exact = true, zero = true;
  double worst_norm = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Draw d = draw(i);
    const double sir = sir_loss(d.batch, d.encoder, kT);
    exact &= sir == kl_batch(prob_y_given_x(d.batch, d.encoder, kT, ViewSide::i),
                             prob_y_given_x(d.batch, d.encoder, kT, ViewSide::j));
    for (ViewSide s : {ViewSide::i, ViewSide::j})
      for (const auto& t : {prob_y_given_adv(d.batch, d.encoder, kT, s),
                            prob_adv_given_x(d.batch, d.encoder, kT, s),
                            prob_y_given_x(d.batch, d.encoder, kT, s)})
        worst_norm = std::max(worst_norm, std::abs(t.sum() - 1.0));
    ViewBatch same = d.batch;
    same.view_j = same.view_i;
    zero &= sir_loss(same, d.encoder, kT) == 0.0;
  }
  return {exact && zero && worst_norm <= 1e-6,
          std::string("exact match ") + (exact ? "yes" : "no") + ", zero for equal views " +
              (zero ? "yes" : "no") + ", max |sum - 1| = " + fmt(worst_norm)};
}

Outcome gradient_check() {
  const EncoderSpec spec = verify_micro_spec(4);
  const Encoder enc(spec, 77);
  const ViewBatch batch = random_view_batch(spec, 4, kEps, 78);
  RegularizerConfig cfg;
  cfg.lambda1 = cfg.lambda2 = 0.5;
  cfg.epsilon = kEps;

  EmbeddingTraces traces;
  const Embeddings e = embed(batch, enc, Mode::train, &traces);
  Embeddings g;
  objective(e, cfg, &g);
  std::vector<double> analytic(enc.num_params(), 0.0);
  backprop_embeddings(enc, traces, g, analytic);

  Encoder probe = enc;
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.num_params(); ++p) {
    const double orig = probe.params()[p];
    probe.params()[p] = orig + h;
    const double up = total_objective(batch, probe, cfg);
    probe.params()[p] = orig - h;
    const double down = total_objective(batch, probe, cfg);
    probe.params()[p] = orig;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-3});
    worst = std::max(worst, std::abs(analytic[p] - numeric) / scale);
  }
  return {worst <= 1e-4 && enc.num_params() <= 1000,
          std::to_string(enc.num_params()) + " params, max relative error " + fmt(worst)};
}

Outcome pgd_contracts() {
  const EncoderSpec spec = verify_micro_spec(4);
  const Encoder enc(spec, 91);
  const PgdConfig cfg = PgdConfig::pretraining();
  std::size_t checked = 0;
  double worst_ball = 0.0;
  bool in_cube = true;
  for (std::uint64_t b = 0; checked < 1000; ++b) {
    const ViewBatch v = random_view_batch(spec, 10, 0.0, 9000 + b);
    const auto [ai, aj] = pgd_pair(v.view_i, v.view_j, enc, kT, cfg, b);
    for (const auto& [adv, nat] : {std::pair{&ai, &v.view_i}, std::pair{&aj, &v.view_j}}) {
      for (std::size_t i = 0; i < adv->numel(); ++i) {
        worst_ball = std::max(worst_ball, std::abs((*adv)[i] - (*nat)[i]));
        in_cube &= (*adv)[i] >= 0.0 && (*adv)[i] <= 1.0;
      }
      checked += nat->shape().n;
    }
  }

  const ViewBatch v = random_view_batch(spec, 4, 0.0, 9999);
  PgdConfig zero{kEps, 0, 2.0 / 255.0, false};
  const auto [zi, zj] = pgd_pair(v.view_i, v.view_j, enc, kT, zero, 1);
  const bool identity = zi == v.view_i && zj == v.view_j;

  // One step from the clean pair must equal clip(x + alpha * sign(grad)).
  PgdConfig one{kEps, 1, 2.0 / 255.0, false};
  const auto [si, sj] = pgd_pair(v.view_i, v.view_j, enc, kT, one, 1);
  Tensor gi, gj;
  adversarial_pair_loss(v.view_i, v.view_j, enc, kT, Mode::train, &gi, &gj);
  bool sign_exact = true;
  for (const auto& [out, x, g] : {std::tuple{&si, &v.view_i, &gi}, std::tuple{&sj, &v.view_j, &gj}})
    for (std::size_t i = 0; i < x->numel(); ++i) {
      const double sg = (*g)[i] > 0 ? 1.0 : ((*g)[i] < 0 ? -1.0 : 0.0);
      double expect = (*x)[i] + one.step_size * sg;
      expect = std::clamp(expect, (*x)[i] - kEps, (*x)[i] + kEps);
      expect = std::clamp(expect, 0.0, 1.0);
      sign_exact &= (*out)[i] == expect;
    }
  return {worst_ball <= kEps + 1e-6 && in_cube && identity && sign_exact,
          std::to_string(checked) + " samples, max |x_adv - x| = " + fmt(worst_ball) +
              " (eps " + fmt(kEps) + "), in [0,1] " + (in_cube ? "yes" : "no") +
              ", steps=0 identity " + (identity ? "yes" : "no") + ", sign oracle " +
              (sign_exact ? "exact" : "mismatch")};
}

Outcome scheduler() {
  const double nu = 2.0 / 3.0;
  auto formula = [&](int e) {
    const double mu = 1.0 - std::floor(static_cast<double>(e) / 50.0) * 50.0 / 1000.0;
    return std::pair{mu, nu * (1.0 - mu)};
  };
  bool points = true;
  for (int e : {0, 500, 999}) {
    const auto [mu, omega] = dynacl_schedule(e, 50, 1000, nu);
    const auto [rm, ro] = formula(e);
    points &= std::abs(mu - rm) < 1e-12 && std::abs(omega - ro) < 1e-12;
  }
  const auto [m999, o999] = dynacl_schedule(999, 50, 1000, nu);
  points &= std::abs(m999 - 0.05) < 1e-12 && std::abs(o999 - 0.63333) < 1e-5;
  bool monotone = true;
  double mu_prev = 1.0, om_prev = 0.0;
  for (int e = 0; e < 1000; ++e) {
    const auto [mu, omega] = dynacl_schedule(e, 50, 1000, nu);
    monotone &= mu <= mu_prev && omega >= om_prev;
    mu_prev = mu;
    om_prev = omega;
  }
  return {points && monotone, std::string("reference points ") + (points ? "match" : "differ") +
                                  ", monotone " + (monotone ? "yes" : "no") + ", (e=999) -> (" +
                                  fmt(m999) + ", " + fmt(o999) + ")"};
}

Outcome calibration() {
  int differ = 0;
  bool finite = true;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Draw d = draw(i);
    const double a = air_loss(d.batch, d.encoder, kT);
    const double u = uncalibrated_air(d.batch, d.encoder, kT);
    finite &= std::isfinite(a) && std::isfinite(u);
    differ += std::abs(a - u) > 1e-12 * (1 + std::abs(a)) ? 1 : 0;
  }
  return {finite && differ >= 95,
          std::to_string(differ) + "/100 batches differ, all finite " + (finite ? "yes" : "no")};
}

// Desk run shared by criteria 7 and 8.
struct DeskRun {
  cli::ExperimentConfig cfg;
  Dataset train, eval;
  std::optional<PretrainResult> result;
};

DeskRun& desk() {
  static DeskRun run = [] {
    DeskRun r{cli::ExperimentConfig::load(fs::path(AIRACL_SOURCE_DIR) / "configs" / "desk.toml"),
              {}, {}, std::nullopt};
    r.train = cli::load_train_data(r.cfg);
    r.eval = cli::load_eval_data(r.cfg);
    return r;
  }();
  if (!run.result) {
    const TrainConfig tc = TrainConfig::from_config(run.cfg.values);
    run.result = pretrain(run.train, cli::encoder_spec(run.cfg, run.train), tc, std::nullopt,
                          [](const EpochMetrics& m) {
                            std::fprintf(stderr, "  epoch %2d  total %.2f  sir+air %.5f\n",
                                         m.epoch + 1, m.total, m.sir + m.air);
                          });
  }
  return run;
}

Outcome smoke_training() {
  const auto& m = desk().result->metrics;
  const double first = m.front().total, last = m.back().total;
  const double reg_first = m.front().sir + m.front().air, reg_last = m.back().sir + m.back().air;
  const double ratio = last / first;
  const bool drop = ratio <= 0.8;
  const bool reg = reg_last < reg_first;
  return {drop && reg && m.size() == 20,
          std::to_string(m.size()) + " epochs, total " + fmt(first) + " -> " + fmt(last) +
              " (ratio " + fmt(ratio) + ", need <= 0.8: " + (drop ? "met" : "not met") +
              "), sir+air " + fmt(reg_first) + " -> " + fmt(reg_last) +
              (reg ? " (decreased)" : " (did not decrease)")};
}

Outcome protocol_contracts() {
  DeskRun& run = desk();
  const Checkpoint ckpt = snapshot(run.result->encoder);
  FinetuneConfig fc = FinetuneConfig::from_config(run.cfg.values);

  bool frozen = true;
  Classifier slf;
  for (FinetuneMode mode : {FinetuneMode::slf, FinetuneMode::alf}) {
    FinetuneConfig c = fc;
    c.mode = mode;
    if (mode == FinetuneMode::alf) c.epochs = 3;
    Classifier clf = finetune(ckpt, run.train, c);
    frozen &= std::equal(ckpt.params.begin(), ckpt.params.end(), clf.encoder().params().begin()) &&
              std::equal(ckpt.buffers.begin(), ckpt.buffers.end(), clf.encoder().buffers().begin());
    if (mode == FinetuneMode::slf) slf = std::move(clf);
  }

  const double clean = standard_accuracy(slf, run.eval);
  PgdConfig none = PgdConfig::evaluation();
  none.epsilon = 0.0;
  const double robust0 = robust_accuracy(slf, run.eval, none, 1);

  const double sev1 = corruption_accuracy(slf, run.eval, {CorruptionKind::gaussian_noise, 1}, 2);
  const double sev5 = corruption_accuracy(slf, run.eval, {CorruptionKind::gaussian_noise, 5}, 2);
  return {frozen && robust0 == clean && sev5 <= sev1,
          std::string("extractor bit-identical after SLF/ALF ") + (frozen ? "yes" : "no") +
              ", standard " + fmt(clean) + " vs robust(eps=0) " + fmt(robust0) +
              ", gaussian_noise sev1 " + fmt(sev1) + " sev5 " + fmt(sev5)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AIR decomposition identity", decomposition_identity},
      {"contrastive loss as peer-view log-likelihood", peer_likelihood},
      {"SIR definition and table normalization", sir_definition},
      {"objective gradient vs finite differences", gradient_check},
      {"PGD feasibility, identity and sign step", pgd_contracts},
      {"dynamic schedule", scheduler},
      {"desk pre-training smoke run", smoke_training},
      {"finetuning and evaluation contracts", protocol_contracts},
      {"calibrated vs uncalibrated AIR", calibration},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << criteria[i].first
              << ": " << o.detail << "  [" << fmt(secs) << " s]" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion(s) failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
