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

#include "airacl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "airacl/error.hpp"

namespace airacl {

namespace {

struct Normalized {
  Matrix rows;
  Eigen::VectorXd norms;
};

Normalized normalize_rows(const Matrix& a) {
  Normalized out{a, a.rowwise().norm()};
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double n = out.norms(r);
    if (!std::isfinite(n)) throw NumericError("non-finite embedding row");
    if (n == 0.0) throw NumericError("zero embedding row; cosine similarity undefined");
    out.rows.row(r) /= n;
  }
  return out;
}

// d/da of f(a / |a|) given d/dn.
Matrix normalize_backward(const Normalized& n, const Matrix& grad_n) {
  Matrix g = grad_n;
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    const double dot = grad_n.row(r).dot(n.rows.row(r));
    g.row(r) = (grad_n.row(r) - dot * n.rows.row(r)) / n.norms(r);
  }
  return g;
}

void require_same_rows(const Matrix& a, const Matrix& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(what) + ": embedding blocks have different shapes");
  require(a.rows() >= 1, std::string(what) + ": empty batch");
}

// Softmax of diagonal similarities on already-normalized rows.
std::vector<double> diag_softmax_normalized(const Matrix& na, const Matrix& nb, double t) {
  const auto n = static_cast<std::size_t>(na.rows());
  std::vector<double> logits(n);
  for (std::size_t k = 0; k < n; ++k) {
    logits[k] = na.row(static_cast<Eigen::Index>(k)).dot(nb.row(static_cast<Eigen::Index>(k))) / t;
    if (!std::isfinite(logits[k])) throw NumericError("non-finite similarity");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) z += (v = std::exp(v - m));
  for (double& v : logits) v /= z;
  return logits;
}

// Accumulates the gradient of a loss through p = diag_softmax(na, nb).
void diag_softmax_backward(const Matrix& na, const Matrix& nb, double t,
                           const std::vector<double>& p, const std::vector<double>& grad_p,
                           Matrix& grad_na, Matrix& grad_nb) {
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) dot += p[k] * grad_p[k];
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double g_logit = p[k] * (grad_p[k] - dot) / t;
    const auto r = static_cast<Eigen::Index>(k);
    grad_na.row(r) += g_logit * nb.row(r);
    grad_nb.row(r) += g_logit * na.row(r);
  }
}

// KL value and gradients (w.r.t. p and q) with the documented conventions.
double kl_with_grad(const std::vector<double>& p, const std::vector<double>& q,
                    std::vector<double>* grad_p, std::vector<double>* grad_q) {
  require(p.size() == q.size(), "kl_batch: length mismatch");
  if (grad_p) grad_p->assign(p.size(), 0.0);
  if (grad_q) grad_q->assign(q.size(), 0.0);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double qk = std::max(q[k], kKlFloor);
    if (p[k] > 0.0) {
      const double lr = std::log(p[k]) - std::log(qk);
      kl += p[k] * lr;
      if (grad_p) (*grad_p)[k] = lr + 1.0;
      if (grad_q && q[k] >= kKlFloor) (*grad_q)[k] = -p[k] / q[k];
    }
  }
  return kl;
}

// Normalized embeddings of each role, and gradient accumulators in the same layout.
struct Roles {
  Normalized orig, nat_i, nat_j, adv_i, adv_j;
  bool has_orig = false, has_nat = false, has_adv = false;
};

Roles normalize_roles(const Embeddings& e) {
  Roles r;
  r.has_orig = e.originals.size() > 0;
  r.has_nat = e.nat_i.size() > 0 && e.nat_j.size() > 0;
  r.has_adv = e.adv_i.size() > 0 && e.adv_j.size() > 0;
  if (r.has_orig) r.orig = normalize_rows(e.originals);
  if (r.has_nat) {
    require_same_rows(e.nat_i, e.nat_j, "embeddings");
    r.nat_i = normalize_rows(e.nat_i);
    r.nat_j = normalize_rows(e.nat_j);
  }
  if (r.has_adv) {
    require_same_rows(e.adv_i, e.adv_j, "embeddings");
    r.adv_i = normalize_rows(e.adv_i);
    r.adv_j = normalize_rows(e.adv_j);
  }
  return r;
}

const Normalized& nat(const Roles& r, ViewSide s) { return s == ViewSide::i ? r.nat_i : r.nat_j; }
const Normalized& adv(const Roles& r, ViewSide s) { return s == ViewSide::i ? r.adv_i : r.adv_j; }

// The two normalized blocks whose diagonal similarities define a table.
std::pair<const Normalized*, const Normalized*> table_operands(const Roles& r, ProbabilityKind kind,
                                                               ViewSide side) {
  switch (kind) {
    case ProbabilityKind::y_given_adv:
      require(r.has_orig && r.has_adv, "p(y|adv) needs originals and adversarial views");
      return {&r.orig, &adv(r, side)};
    case ProbabilityKind::adv_given_x:
      require(r.has_nat && r.has_adv, "p(adv|x) needs natural and adversarial views");
      return {&adv(r, side), &nat(r, side)};
    case ProbabilityKind::y_given_x:
      require(r.has_orig && r.has_nat, "p(y|x) needs originals and natural views");
      return {&r.orig, &nat(r, side)};
  }
  throw PreconditionError("unknown probability kind");
}

// Contrastive loss on normalized rows. Fills per-row terms and, optionally, the
// gradient w.r.t. the stacked normalized rows [na; nb].
double contrastive_normalized(const Matrix& na, const Matrix& nb, double t,
                              std::vector<double>* per_sample, Matrix* grad_z) {
  require(t > 0.0, "contrastive loss: temperature must be positive");
  const Eigen::Index beta = na.rows();
  Matrix z(2 * beta, na.cols());
  z << na, nb;
  const Matrix s = (z * z.transpose()) / t;
  if (!s.allFinite()) throw NumericError("contrastive loss: non-finite similarity");
  Matrix g;
  if (grad_z) g = Matrix::Zero(2 * beta, 2 * beta);
  if (per_sample) per_sample->assign(static_cast<std::size_t>(beta), 0.0);
  double total = 0.0;
  for (Eigen::Index r = 0; r < 2 * beta; ++r) {
    const Eigen::Index pos = (r + beta) % (2 * beta);
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < 2 * beta; ++c)
      if (c != r) m = std::max(m, s(r, c));
    double denom = 0.0;
    for (Eigen::Index c = 0; c < 2 * beta; ++c)
      if (c != r) denom += std::exp(s(r, c) - m);
    const double lse = m + std::log(denom);
    const double term = lse - s(r, pos);
    total += term;
    if (per_sample) (*per_sample)[static_cast<std::size_t>(r % beta)] += term;
    if (grad_z) {
      for (Eigen::Index c = 0; c < 2 * beta; ++c)
        if (c != r) g(r, c) = std::exp(s(r, c) - lse);
      g(r, pos) -= 1.0;
    }
  }
  if (grad_z) *grad_z = (g + g.transpose()) * z / t;
  return total;
}

}  // namespace

// ------------------------------------------------------------ types

void ViewBatch::validate(std::optional<double> epsilon) const {
  const Shape& s = view_i.shape();
  require(s.n >= 1, "ViewBatch: empty batch");
  require(view_j.shape() == s, "ViewBatch: view shapes differ");
  if (has_originals()) require(originals.shape() == s, "ViewBatch: originals shape differs");
  if (!adv_i.empty() || !adv_j.empty()) {
    require(adv_i.shape() == s && adv_j.shape() == s, "ViewBatch: adversarial shape differs");
    if (epsilon) {
      const double tol = *epsilon + 1e-6;
      require(max_abs_diff(adv_i, view_i) <= tol && max_abs_diff(adv_j, view_j) <= tol,
              "ViewBatch: adversarial view outside the epsilon ball");
    }
  }
}

double ProbabilityTable::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

void RegularizerConfig::validate() const {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "RegularizerConfig: lambdas must be non-negative");
  require(epsilon >= 0.0, "RegularizerConfig: epsilon must be non-negative");
  require(temperature > 0.0, "RegularizerConfig: temperature must be positive");
  require(omega >= 0.0 && omega <= 1.0, "RegularizerConfig: omega must lie in [0,1]");
}

// ------------------------------------------------------------ embedding level

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    nu += u[k] * u[k];
    nv += v[k] * v[k];
  }
  require(nu > 0.0 && nv > 0.0, "cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double contrastive_loss(const Matrix& a, const Matrix& b, double temperature, Matrix* grad_a,
                        Matrix* grad_b) {
  require_same_rows(a, b, "contrastive_loss");
  const Normalized na = normalize_rows(a), nb = normalize_rows(b);
  Matrix gz;
  const bool want = grad_a || grad_b;
  const double loss = contrastive_normalized(na.rows, nb.rows, temperature, nullptr,
                                             want ? &gz : nullptr);
  if (want) {
    const Eigen::Index beta = a.rows();
    if (grad_a) *grad_a = normalize_backward(na, gz.topRows(beta));
    if (grad_b) *grad_b = normalize_backward(nb, gz.bottomRows(beta));
  }
  return loss;
}

std::vector<double> contrastive_loss_terms(const Matrix& a, const Matrix& b, double temperature) {
  require_same_rows(a, b, "contrastive_loss_terms");
  std::vector<double> terms;
  contrastive_normalized(normalize_rows(a).rows, normalize_rows(b).rows, temperature, &terms,
                         nullptr);
  return terms;
}

std::vector<double> diagonal_softmax(const Matrix& a, const Matrix& b, double temperature) {
  require_same_rows(a, b, "diagonal_softmax");
  require(temperature > 0.0, "diagonal_softmax: temperature must be positive");
  return diag_softmax_normalized(normalize_rows(a).rows, normalize_rows(b).rows, temperature);
}

ProbabilityTable probability_table(const Embeddings& e, ProbabilityKind kind, ViewSide side,
                                   double temperature) {
  require(temperature > 0.0, "probability table: temperature must be positive");
  const Roles r = normalize_roles(e);
  const auto [a, b] = table_operands(r, kind, side);
  require_same_rows(a->rows, b->rows, "probability table");
  return {kind, side, diag_softmax_normalized(a->rows, b->rows, temperature)};
}

double kl_batch(std::span<const double> p, std::span<const double> q) {
  return kl_with_grad({p.begin(), p.end()}, {q.begin(), q.end()}, nullptr, nullptr);
}

double kl_batch(const ProbabilityTable& p, const ProbabilityTable& q) {
  return kl_batch(p.values, q.values);
}

namespace {

struct Tables {
  std::vector<double> y_adv[2], adv_x[2], y_x[2];
};

std::vector<double> product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
  return out;
}

std::vector<double> table(const Roles& r, ProbabilityKind kind, ViewSide side, double t) {
  const auto [a, b] = table_operands(r, kind, side);
  require_same_rows(a->rows, b->rows, "probability table");
  return diag_softmax_normalized(a->rows, b->rows, t);
}

double air_from_roles(const Roles& r, double t) {
  const auto P = product(table(r, ProbabilityKind::y_given_adv, ViewSide::i, t),
                         table(r, ProbabilityKind::adv_given_x, ViewSide::i, t));
  const auto Q = product(table(r, ProbabilityKind::y_given_adv, ViewSide::j, t),
                         table(r, ProbabilityKind::adv_given_x, ViewSide::j, t));
  return kl_with_grad(P, Q, nullptr, nullptr);
}

double sir_from_roles(const Roles& r, double t) {
  return kl_with_grad(table(r, ProbabilityKind::y_given_x, ViewSide::i, t),
                      table(r, ProbabilityKind::y_given_x, ViewSide::j, t), nullptr, nullptr);
}

double uncalibrated_from_roles(const Roles& r, double t) {
  return kl_with_grad(table(r, ProbabilityKind::y_given_adv, ViewSide::i, t),
                      table(r, ProbabilityKind::y_given_adv, ViewSide::j, t), nullptr, nullptr) +
         kl_with_grad(table(r, ProbabilityKind::adv_given_x, ViewSide::i, t),
                      table(r, ProbabilityKind::adv_given_x, ViewSide::j, t), nullptr, nullptr);
}

}  // namespace

double air_value(const Embeddings& e, double temperature) {
  return air_from_roles(normalize_roles(e), temperature);
}

double sir_value(const Embeddings& e, double temperature) {
  return sir_from_roles(normalize_roles(e), temperature);
}

double uncalibrated_air_value(const Embeddings& e, double temperature) {
  return uncalibrated_from_roles(normalize_roles(e), temperature);
}

std::pair<double, double> air_decomposition_value(const Embeddings& e, double temperature) {
  const Roles r = normalize_roles(e);
  const auto ai = table(r, ProbabilityKind::y_given_adv, ViewSide::i, temperature);
  const auto aj = table(r, ProbabilityKind::y_given_adv, ViewSide::j, temperature);
  const auto bi = table(r, ProbabilityKind::adv_given_x, ViewSide::i, temperature);
  const auto bj = table(r, ProbabilityKind::adv_given_x, ViewSide::j, temperature);
  // Per-sample KL contributions weighted by the other factor's branch-i probability.
  double term1 = 0.0, term2 = 0.0;
  for (std::size_t k = 0; k < ai.size(); ++k) {
    if (ai[k] > 0.0)
      term1 += bi[k] * ai[k] * (std::log(ai[k]) - std::log(std::max(aj[k], kKlFloor)));
    if (bi[k] > 0.0)
      term2 += ai[k] * bi[k] * (std::log(bi[k]) - std::log(std::max(bj[k], kKlFloor)));
  }
  return {term1, term2};
}

ObjectiveTerms objective(const Embeddings& e, const RegularizerConfig& cfg, Embeddings* grads) {
  cfg.validate();
  const double t = cfg.temperature;
  const Roles r = normalize_roles(e);
  require(r.has_nat && r.has_adv, "objective: natural and adversarial views are required");
  const bool need_orig = cfg.lambda1 > 0.0 || cfg.lambda2 > 0.0;
  require(!need_orig || r.has_orig, "objective: regularizers need the original samples");

  const Eigen::Index beta = e.nat_i.rows();
  const Eigen::Index dim = e.nat_i.cols();
  // Gradients w.r.t. normalized rows.
  Matrix g_orig, g_nat_i, g_nat_j, g_adv_i, g_adv_j;
  if (grads) {
    g_orig = Matrix::Zero(r.has_orig ? beta : 0, dim);
    g_nat_i = g_nat_j = g_adv_i = g_adv_j = Matrix::Zero(beta, dim);
  }

  ObjectiveTerms out;
  {
    Matrix gz;
    out.cl_adv = contrastive_normalized(r.adv_i.rows, r.adv_j.rows, t, nullptr, grads ? &gz : nullptr);
    if (grads) {
      g_adv_i += (1.0 + cfg.omega) * gz.topRows(beta);
      g_adv_j += (1.0 + cfg.omega) * gz.bottomRows(beta);
    }
    out.cl_nat = contrastive_normalized(r.nat_i.rows, r.nat_j.rows, t, nullptr, grads ? &gz : nullptr);
    if (grads) {
      g_nat_i += (1.0 - cfg.omega) * gz.topRows(beta);
      g_nat_j += (1.0 - cfg.omega) * gz.bottomRows(beta);
    }
    out.acl = (1.0 + cfg.omega) * out.cl_adv + (1.0 - cfg.omega) * out.cl_nat;
  }

  const bool sir_grad = grads && cfg.lambda1 > 0.0;
  const bool air_grad = grads && cfg.lambda2 > 0.0;
  if (r.has_orig) {
    const auto ci = diag_softmax_normalized(r.orig.rows, r.nat_i.rows, t);
    const auto cj = diag_softmax_normalized(r.orig.rows, r.nat_j.rows, t);
    std::vector<double> gci, gcj;
    out.sir = kl_with_grad(ci, cj, sir_grad ? &gci : nullptr, sir_grad ? &gcj : nullptr);
    if (sir_grad) {
      for (auto& v : gci) v *= cfg.lambda1;
      for (auto& v : gcj) v *= cfg.lambda1;
      diag_softmax_backward(r.orig.rows, r.nat_i.rows, t, ci, gci, g_orig, g_nat_i);
      diag_softmax_backward(r.orig.rows, r.nat_j.rows, t, cj, gcj, g_orig, g_nat_j);
    }
  }

  if (r.has_orig) {
    const auto ai = diag_softmax_normalized(r.orig.rows, r.adv_i.rows, t);
    const auto aj = diag_softmax_normalized(r.orig.rows, r.adv_j.rows, t);
    const auto bi = diag_softmax_normalized(r.adv_i.rows, r.nat_i.rows, t);
    const auto bj = diag_softmax_normalized(r.adv_j.rows, r.nat_j.rows, t);
    std::vector<double> gai(ai.size(), 0.0), gaj(ai.size(), 0.0), gbi(ai.size(), 0.0),
        gbj(ai.size(), 0.0);
    if (cfg.calibrated) {
      const auto P = product(ai, bi), Q = product(aj, bj);
      std::vector<double> gP, gQ;
      out.air = kl_with_grad(P, Q, air_grad ? &gP : nullptr, air_grad ? &gQ : nullptr);
      if (air_grad)
        for (std::size_t k = 0; k < ai.size(); ++k) {
          gai[k] = gP[k] * bi[k];
          gbi[k] = gP[k] * ai[k];
          gaj[k] = gQ[k] * bj[k];
          gbj[k] = gQ[k] * aj[k];
        }
    } else {
      out.air = kl_with_grad(ai, aj, air_grad ? &gai : nullptr, air_grad ? &gaj : nullptr) +
                kl_with_grad(bi, bj, air_grad ? &gbi : nullptr, air_grad ? &gbj : nullptr);
    }
    if (air_grad) {
      for (auto* g : {&gai, &gaj, &gbi, &gbj})
        for (auto& v : *g) v *= cfg.lambda2;
      diag_softmax_backward(r.orig.rows, r.adv_i.rows, t, ai, gai, g_orig, g_adv_i);
      diag_softmax_backward(r.orig.rows, r.adv_j.rows, t, aj, gaj, g_orig, g_adv_j);
      diag_softmax_backward(r.adv_i.rows, r.nat_i.rows, t, bi, gbi, g_adv_i, g_nat_i);
      diag_softmax_backward(r.adv_j.rows, r.nat_j.rows, t, bj, gbj, g_adv_j, g_nat_j);
    }
  }

  out.total = out.acl + cfg.lambda1 * out.sir + cfg.lambda2 * out.air;
  if (!std::isfinite(out.total)) throw NumericError("objective is not finite");

  if (grads) {
    grads->originals = r.has_orig ? normalize_backward(r.orig, g_orig) : Matrix();
    grads->nat_i = normalize_backward(r.nat_i, g_nat_i);
    grads->nat_j = normalize_backward(r.nat_j, g_nat_j);
    grads->adv_i = normalize_backward(r.adv_i, g_adv_i);
    grads->adv_j = normalize_backward(r.adv_j, g_adv_j);
  }
  return out;
}

// ------------------------------------------------------------ batch level

Embeddings embed(const ViewBatch& batch, const Encoder& encoder, Mode mode,
                 EmbeddingTraces* traces) {
  batch.validate();
  const auto beta = static_cast<Eigen::Index>(batch.size());
  EmbeddingTraces local;
  EmbeddingTraces& t = traces ? *traces : local;
  Embeddings e;

  const Matrix nat =
      encoder.forward(concat(batch.view_i, batch.view_j), Branch::standard, mode, &t.standard);
  e.nat_i = nat.topRows(beta);
  e.nat_j = nat.bottomRows(beta);
  t.has_originals = batch.has_originals();
  if (t.has_originals)
    e.originals = encoder.forward(batch.originals, Branch::standard, mode, &t.originals);

  t.has_adversarial = batch.has_adversarial();
  if (t.has_adversarial) {
    const Matrix a = encoder.forward(concat(batch.adv_i, batch.adv_j), Branch::adversarial, mode,
                                     &t.adversarial);
    e.adv_i = a.topRows(beta);
    e.adv_j = a.bottomRows(beta);
  }
  return e;
}

void backprop_embeddings(const Encoder& encoder, const EmbeddingTraces& traces,
                         const Embeddings& g, std::span<double> grad_params) {
  const Eigen::Index beta = g.nat_i.rows();
  Matrix g_nat(2 * beta, g.nat_i.cols());
  g_nat << g.nat_i, g.nat_j;
  encoder.backward(traces.standard, g_nat, grad_params, false);
  if (traces.has_originals && g.originals.size() > 0)
    encoder.backward(traces.originals, g.originals, grad_params, false);
  if (traces.has_adversarial && g.adv_i.size() > 0) {
    Matrix g_adv(2 * beta, g.adv_i.cols());
    g_adv << g.adv_i, g.adv_j;
    encoder.backward(traces.adversarial, g_adv, grad_params, false);
  }
}

double cl_loss(const ViewBatch& batch, const Encoder& encoder, double temperature, bool use_adv,
               Mode mode) {
  require(batch.size() >= 1, "cl_loss: empty batch");
  require(!use_adv || batch.has_adversarial(), "cl_loss: adversarial views missing");
  const Embeddings e = embed(batch, encoder, mode);
  return use_adv ? contrastive_loss(e.adv_i, e.adv_j, temperature)
                 : contrastive_loss(e.nat_i, e.nat_j, temperature);
}

double acl_loss(const ViewBatch& batch, const Encoder& encoder, double temperature, double omega,
                Mode mode) {
  require(batch.has_adversarial(), "acl_loss: adversarial views missing");
  require(omega >= 0.0 && omega <= 1.0, "acl_loss: omega must lie in [0,1]");
  const Embeddings e = embed(batch, encoder, mode);
  return (1.0 + omega) * contrastive_loss(e.adv_i, e.adv_j, temperature) +
         (1.0 - omega) * contrastive_loss(e.nat_i, e.nat_j, temperature);
}

ProbabilityTable prob_y_given_adv(const ViewBatch& batch, const Encoder& encoder,
                                  double temperature, ViewSide side, Mode mode) {
  return probability_table(embed(batch, encoder, mode), ProbabilityKind::y_given_adv, side,
                           temperature);
}

ProbabilityTable prob_adv_given_x(const ViewBatch& batch, const Encoder& encoder,
                                  double temperature, ViewSide side, Mode mode) {
  return probability_table(embed(batch, encoder, mode), ProbabilityKind::adv_given_x, side,
                           temperature);
}

ProbabilityTable prob_y_given_x(const ViewBatch& batch, const Encoder& encoder, double temperature,
                                ViewSide side, Mode mode) {
  return probability_table(embed(batch, encoder, mode), ProbabilityKind::y_given_x, side,
                           temperature);
}

double air_loss(const ViewBatch& batch, const Encoder& encoder, double temperature, Mode mode) {
  require(batch.has_adversarial() && batch.has_originals(),
          "air_loss: originals and both adversarial views are required");
  return air_value(embed(batch, encoder, mode), temperature);
}

double sir_loss(const ViewBatch& batch, const Encoder& encoder, double temperature, Mode mode) {
  require(batch.has_originals(), "sir_loss: originals are required");
  return sir_value(embed(batch, encoder, mode), temperature);
}

std::pair<double, double> air_decomposition(const ViewBatch& batch, const Encoder& encoder,
                                            double temperature, Mode mode) {
  require(batch.has_adversarial() && batch.has_originals(),
          "air_decomposition: originals and both adversarial views are required");
  return air_decomposition_value(embed(batch, encoder, mode), temperature);
}

double uncalibrated_air(const ViewBatch& batch, const Encoder& encoder, double temperature,
                        Mode mode) {
  require(batch.has_adversarial() && batch.has_originals(),
          "uncalibrated_air: originals and both adversarial views are required");
  return uncalibrated_air_value(embed(batch, encoder, mode), temperature);
}

double total_objective(const ViewBatch& batch, const Encoder& encoder,
                       const RegularizerConfig& cfg, Mode mode) {
  require(batch.has_adversarial(), "total_objective: adversarial views missing");
  return objective(embed(batch, encoder, mode), cfg).total;
}

double theorem1_identity(const ViewBatch& batch, const Encoder& encoder, double temperature,
                         bool use_adv, Mode mode) {
  require(!use_adv || batch.has_adversarial(), "theorem1_identity: adversarial views missing");
  const Embeddings e = embed(batch, encoder, mode);
  const Matrix& a = use_adv ? e.adv_i : e.nat_i;
  const Matrix& b = use_adv ? e.adv_j : e.nat_j;
  const std::vector<double> loss = contrastive_loss_terms(a, b, temperature);

  const auto beta = static_cast<std::size_t>(a.rows());
  const auto row = [&](std::size_t idx) {
    const Matrix& m = idx < beta ? a : b;
    const Eigen::RowVectorXd r = m.row(static_cast<Eigen::Index>(idx % beta));
    return std::vector<double>(r.data(), r.data() + r.size());
  };
  std::vector<std::vector<double>> rows;
  for (std::size_t idx = 0; idx < 2 * beta; ++idx) rows.push_back(row(idx));
  // p(1_peer | anchor) as an explicit ratio over B^i u B^j minus the anchor.
  const auto peer_prob = [&](std::size_t anchor, std::size_t peer) {
    double denom = 0.0;
    for (std::size_t c = 0; c < 2 * beta; ++c)
      if (c != anchor) denom += std::exp(cosine_similarity(rows[anchor], rows[c]) / temperature);
    return std::exp(cosine_similarity(rows[anchor], rows[peer]) / temperature) / denom;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < beta; ++k) {
    const double rhs = -std::log(peer_prob(k, k + beta)) - std::log(peer_prob(k + beta, k));
    worst = std::max(worst, std::abs(loss[k] - rhs));
  }
  return worst;
}

}  // namespace airacl
