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

#include <cmath>
#include <numeric>

#include "airacl/augment.hpp"
#include "airacl/dataset.hpp"
#include "airacl/error.hpp"
#include "airacl/objectives.hpp"
#include "airacl/verify.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace airacl;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1, 1);
  return m;
}

Embeddings random_embeddings(Eigen::Index beta, Eigen::Index dim, std::uint64_t seed) {
  return {random_matrix(beta, dim, seed), random_matrix(beta, dim, seed + 1),
          random_matrix(beta, dim, seed + 2), random_matrix(beta, dim, seed + 3),
          random_matrix(beta, dim, seed + 4)};
}

double cos_rows(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

// Loop-form NT-Xent over the 2*beta views: every anchor against all others.
double oracle_contrastive(const Matrix& a, const Matrix& b, double t) {
  const Eigen::Index beta = a.rows();
  Matrix z(2 * beta, a.cols());
  z << a, b;
  double total = 0.0;
  for (Eigen::Index r = 0; r < 2 * beta; ++r) {
    const Eigen::Index pos = (r + beta) % (2 * beta);
    double denom = 0.0;
    for (Eigen::Index c = 0; c < 2 * beta; ++c)
      if (c != r) denom += std::exp(cos_rows(z, r, z, c) / t);
    total += -std::log(std::exp(cos_rows(z, r, z, pos) / t) / denom);
  }
  return total;
}

std::vector<double> oracle_softmax_diag(const Matrix& a, const Matrix& b, double t) {
  std::vector<double> e(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index k = 0; k < a.rows(); ++k) e[static_cast<std::size_t>(k)] = std::exp(cos_rows(a, k, b, k) / t);
  const double s = std::accumulate(e.begin(), e.end(), 0.0);
  for (double& v : e) v /= s;
  return e;
}

double oracle_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0) s += p[k] * std::log(p[k] / q[k]);
  return s;
}

// Two-dimensional rows at the given cosine to e1.
Matrix rows_at_cosines(const std::vector<double>& cosines) {
  Matrix m(static_cast<Eigen::Index>(cosines.size()), 2);
  for (std::size_t k = 0; k < cosines.size(); ++k) {
    m(static_cast<Eigen::Index>(k), 0) = cosines[k];
    m(static_cast<Eigen::Index>(k), 1) = std::sqrt(1 - cosines[k] * cosines[k]);
  }
  return m;
}

Matrix e1_rows(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, 2);
  m.col(0).setOnes();
  return m;
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("cosine similarity") {
    const std::vector<double> u{1, 2, 3}, neg{-1, -2, -3}, x{1, 0}, y{0, 1}, zero{0, 0, 0};
    CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
    CHECK(cosine_similarity(u, neg) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
    const std::vector<double> u3{3, 6, 9};
    CHECK(cosine_similarity(u3, neg) == doctest::Approx(-1.0));
    CHECK_THROWS(cosine_similarity(u, zero));
  }

  TEST_CASE("orthogonal pair of classes, hand-enumerated softmax") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 0, 0, 1;
    b = a;
    // Each anchor sees its positive at sim 1 and two negatives at sim 0.
    const double per_anchor = std::log(std::exp(2.0) + 2.0) - 2.0;
    CHECK(contrastive_loss(a, b, 0.5) == doctest::Approx(4 * per_anchor).epsilon(1e-12));
  }

  TEST_CASE("contrastive loss matches the loop oracle, is additive and vanishes at beta 1") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Matrix a = random_matrix(5, 6, 10 * s), b = random_matrix(5, 6, 10 * s + 1);
      CHECK(contrastive_loss(a, b, 0.5) == doctest::Approx(oracle_contrastive(a, b, 0.5)).epsilon(1e-10));
      const auto terms = contrastive_loss_terms(a, b, 0.5);
      CHECK(std::accumulate(terms.begin(), terms.end(), 0.0) ==
            doctest::Approx(contrastive_loss(a, b, 0.5)).epsilon(1e-12));
    }
    CHECK(contrastive_loss(random_matrix(1, 4, 1), random_matrix(1, 4, 2), 0.5) ==
          doctest::Approx(0.0));
  }

  TEST_CASE("contrastive gradient matches central differences") {
    const Matrix a = random_matrix(3, 4, 31), b = random_matrix(3, 4, 32);
    Matrix ga, gb;
    contrastive_loss(a, b, 0.5, &ga, &gb);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      Matrix p = a, m = a;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (contrastive_loss(p, b, 0.5) - contrastive_loss(m, b, 0.5)) / (2 * h);
      CHECK(ga.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("diagonal softmax examples") {
    const auto p3 = diagonal_softmax(e1_rows(3), rows_at_cosines({1.0, 0.0, -1.0}), 1.0);
    CHECK(p3[0] == doctest::Approx(0.6652).epsilon(1e-4));
    CHECK(p3[1] == doctest::Approx(0.2447).epsilon(1e-4));
    CHECK(p3[2] == doctest::Approx(0.0900).epsilon(1e-3));
    const auto p2 = diagonal_softmax(e1_rows(2), rows_at_cosines({0.8, 0.2}), 0.5);
    CHECK(p2[0] == doctest::Approx(0.7685).epsilon(1e-4));
    CHECK(p2[1] == doctest::Approx(0.2315).epsilon(1e-4));
    CHECK(diagonal_softmax(e1_rows(1), rows_at_cosines({0.3}), 0.5) == std::vector<double>{1.0});
    const auto flat = diagonal_softmax(e1_rows(4), e1_rows(4), 0.5);
    for (double v : flat) CHECK(v == doctest::Approx(0.25));
  }

  TEST_CASE("probability tables read the documented roles") {
    const Embeddings e = random_embeddings(6, 5, 40);
    const double t = 0.5;
    auto check = [&](ProbabilityKind k, ViewSide s, const Matrix& a, const Matrix& b) {
      const ProbabilityTable p = probability_table(e, k, s, t);
      const auto ref = oracle_softmax_diag(a, b, t);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(p.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    };
    check(ProbabilityKind::y_given_adv, ViewSide::i, e.originals, e.adv_i);
    check(ProbabilityKind::y_given_adv, ViewSide::j, e.originals, e.adv_j);
    check(ProbabilityKind::adv_given_x, ViewSide::i, e.adv_i, e.nat_i);
    check(ProbabilityKind::adv_given_x, ViewSide::j, e.adv_j, e.nat_j);
    check(ProbabilityKind::y_given_x, ViewSide::i, e.originals, e.nat_i);
    check(ProbabilityKind::y_given_x, ViewSide::j, e.originals, e.nat_j);
  }

  TEST_CASE("KL divergence hand values and asymmetry") {
    const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
    CHECK(kl_batch(p, q) == doctest::Approx(std::log(2.0)));
    CHECK(kl_batch(q, q) == 0.0);
    const double reverse = kl_batch(q, p);
    CHECK(std::isfinite(reverse));
    CHECK(reverse > kl_batch(p, q));
    CHECK(reverse == doctest::Approx(0.5 * std::log(0.5) + 0.5 * std::log(0.5 / kKlFloor)));
    const std::vector<double> three{0.2, 0.3, 0.5};
    CHECK_THROWS(kl_batch(p, three));
  }

  TEST_CASE("regularizers against an independent table oracle") {
    for (std::uint64_t s = 0; s < 4; ++s) {
      const Embeddings e = random_embeddings(5, 4, 100 + 10 * s);
      const double t = 0.5;
      const auto yai = oracle_softmax_diag(e.originals, e.adv_i, t);
      const auto yaj = oracle_softmax_diag(e.originals, e.adv_j, t);
      const auto axi = oracle_softmax_diag(e.adv_i, e.nat_i, t);
      const auto axj = oracle_softmax_diag(e.adv_j, e.nat_j, t);
      const auto yxi = oracle_softmax_diag(e.originals, e.nat_i, t);
      const auto yxj = oracle_softmax_diag(e.originals, e.nat_j, t);
      std::vector<double> pi(5), pj(5);
      double term1 = 0.0, term2 = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        pi[k] = yai[k] * axi[k];
        pj[k] = yaj[k] * axj[k];
        term1 += axi[k] * yai[k] * std::log(yai[k] / yaj[k]);
        term2 += yai[k] * axi[k] * std::log(axi[k] / axj[k]);
      }
      const double air = air_value(e, t);
      CHECK(air == doctest::Approx(oracle_kl(pi, pj)).epsilon(1e-12));
      CHECK(sir_value(e, t) == doctest::Approx(oracle_kl(yxi, yxj)).epsilon(1e-12));
      CHECK(uncalibrated_air_value(e, t) ==
            doctest::Approx(oracle_kl(yai, yaj) + oracle_kl(axi, axj)).epsilon(1e-12));
      const auto [d1, d2] = air_decomposition_value(e, t);
      CHECK(d1 == doctest::Approx(term1).epsilon(1e-12));
      CHECK(d2 == doctest::Approx(term2).epsilon(1e-12));
      CHECK(std::abs(air - (d1 + d2)) <= 1e-6 * (1 + std::abs(air)));
    }
  }

  TEST_CASE("regularizers vanish when the two views coincide") {
    Embeddings e = random_embeddings(6, 4, 7);
    e.nat_j = e.nat_i;
    e.adv_j = e.adv_i;
    CHECK(air_value(e, 0.5) == doctest::Approx(0.0));
    CHECK(sir_value(e, 0.5) == doctest::Approx(0.0));
    CHECK(uncalibrated_air_value(e, 0.5) == doctest::Approx(0.0));
    const auto [a, b] = air_decomposition_value(e, 0.5);
    CHECK(a == doctest::Approx(0.0));
    CHECK(b == doctest::Approx(0.0));
  }

  TEST_CASE("objective composition and weights") {
    const Embeddings e = random_embeddings(4, 5, 11);
    RegularizerConfig cfg;
    cfg.lambda1 = cfg.lambda2 = 0.0;
    cfg.omega = 0.0;
    ObjectiveTerms t = objective(e, cfg);
    const double cl_adv = contrastive_loss(e.adv_i, e.adv_j, cfg.temperature);
    const double cl_nat = contrastive_loss(e.nat_i, e.nat_j, cfg.temperature);
    CHECK(t.total == doctest::Approx(cl_adv + cl_nat));
    cfg.omega = 1.0;
    CHECK(objective(e, cfg).total == doctest::Approx(2 * cl_adv));
    cfg.omega = 0.3;
    cfg.lambda1 = 0.5;
    cfg.lambda2 = 0.5;
    t = objective(e, cfg);
    CHECK(t.acl == doctest::Approx(1.3 * cl_adv + 0.7 * cl_nat));
    CHECK(t.total == doctest::Approx(t.acl + 0.5 * sir_value(e, 0.5) + 0.5 * air_value(e, 0.5)));
    cfg.calibrated = false;
    CHECK(objective(e, cfg).air == doctest::Approx(uncalibrated_air_value(e, 0.5)));
  }

  TEST_CASE("objective gradient with respect to every role") {
    const Embeddings e = random_embeddings(3, 4, 55);
    RegularizerConfig cfg;
    cfg.omega = 0.2;
    Embeddings g;
    objective(e, cfg, &g);
    const double h = 1e-6;
    auto fd_check = [&](Matrix Embeddings::*role) {
      for (Eigen::Index i = 0; i < (e.*role).size(); ++i) {
        Embeddings p = e, m = e;
        (p.*role).data()[i] += h;
        (m.*role).data()[i] -= h;
        const double fd = (objective(p, cfg).total - objective(m, cfg).total) / (2 * h);
        CHECK((g.*role).data()[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
      }
    };
    fd_check(&Embeddings::originals);
    fd_check(&Embeddings::nat_i);
    fd_check(&Embeddings::nat_j);
    fd_check(&Embeddings::adv_i);
    fd_check(&Embeddings::adv_j);
  }

  TEST_CASE("batch-level losses on a micro encoder") {
    const EncoderSpec spec = verify_micro_spec(4);
    const Encoder enc(spec, 3);
    ViewBatch b = random_view_batch(spec, 4, 8.0 / 255.0, 17);
    const double t = 0.5;
    CHECK(acl_loss(b, enc, t, 1.0) == doctest::Approx(2 * cl_loss(b, enc, t, true)));
    CHECK(acl_loss(b, enc, t, 0.0) ==
          doctest::Approx(cl_loss(b, enc, t, true) + cl_loss(b, enc, t, false)));
    CHECK(sir_loss(b, enc, t) == kl_batch(prob_y_given_x(b, enc, t, ViewSide::i),
                                          prob_y_given_x(b, enc, t, ViewSide::j)));
    const auto [t1, t2] = air_decomposition(b, enc, t);
    const double air = air_loss(b, enc, t);
    CHECK(std::abs(air - (t1 + t2)) <= 1e-6 * (1 + air));
    CHECK(theorem1_identity(b, enc, t, false) < 1e-6);
    CHECK(theorem1_identity(b, enc, t, true) < 1e-6);
    RegularizerConfig cfg;
    cfg.lambda1 = cfg.lambda2 = 0.0;
    CHECK(total_objective(b, enc, cfg) == doctest::Approx(acl_loss(b, enc, t, 0.0)));

    ViewBatch same = b;
    same.view_j = same.view_i;
    same.adv_j = same.adv_i;
    CHECK(air_loss(same, enc, t) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sir_loss(same, enc, t) == doctest::Approx(0.0).epsilon(1e-12));

    ViewBatch natural_only = b;
    natural_only.adv_i = Tensor();
    natural_only.adv_j = Tensor();
    CHECK_THROWS(acl_loss(natural_only, enc, t, 0.0));
  }

  TEST_CASE("degenerate adversary in single-BN mode doubles the natural loss") {
    EncoderSpec spec = verify_micro_spec(4);
    spec.bn_mode = BnMode::single;
    const Encoder enc(spec, 4);
    ViewBatch b = random_view_batch(spec, 4, 0.0, 18);
    b.adv_i = b.view_i;
    b.adv_j = b.view_j;
    CHECK(acl_loss(b, enc, 0.5, 0.0) == doctest::Approx(2 * cl_loss(b, enc, 0.5, false)));
  }

  TEST_CASE("view pairs need distinct seeds") {
    BlobSpec bs;
    bs.count = 1;
    const Sample x = make_blobs(bs).sample(0);
    const auto [a, b] = make_view_pair(x, 0.0, 1, 2);
    CHECK(a.pixels == x.pixels);
    CHECK(b.pixels == x.pixels);
    const auto [c, d] = make_view_pair(x, 0.5, 1, 2);
    CHECK_FALSE(c.pixels == d.pixels);
    CHECK_THROWS(make_view_pair(x, 1.0, 3, 3));
  }
}
