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

#include "airacl/adversary.hpp"
#include "airacl/error.hpp"
#include "airacl/schedule.hpp"
#include "airacl/verify.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace airacl;

TEST_SUITE("adversary") {
  TEST_CASE("projection onto the ball and the unit cube") {
    Tensor anchor({1, 1, 1, 3}, 0.5), cand({1, 1, 1, 3});
    cand[0] = 0.9;
    cand[1] = 0.51;
    cand[2] = -0.4;
    const double eps = 8.0 / 255.0;
    const Tensor r = project_linf(cand, anchor, eps);
    CHECK(r[0] == doctest::Approx(0.5 + eps));
    CHECK(r[0] == doctest::Approx(0.53137).epsilon(1e-5));
    CHECK(r[1] == 0.51);
    CHECK(r[2] == doctest::Approx(0.5 - eps));
    CHECK(project_linf(cand, anchor, 0.0) == anchor);
    Tensor edge({1, 1, 1, 1}, 0.99), up({1, 1, 1, 1}, 1.2);
    CHECK(project_linf(up, edge, 0.1)[0] == 1.0);
    CHECK_THROWS(project_linf(cand, anchor, -0.1));
  }

  TEST_CASE("pgd on a quadratic follows the sign of the gradient") {
    // loss = sum (x - target)^2 pushed away from target; gradient sign is known.
    Tensor x({1, 1, 2, 2}, 0.5);
    x[1] = 0.2;
    LossGradFn fn = [](const Tensor& z, Tensor* g) {
      double l = 0.0;
      if (g) *g = Tensor(z.shape());
      for (std::size_t i = 0; i < z.numel(); ++i) {
        const double d = z[i] - 0.4;
        l += d * d;
        if (g) (*g)[i] = 2 * d;
      }
      return l;
    };
    PgdConfig cfg{0.1, 1, 0.03, false};
    const Tensor one = pgd_ascend(x, cfg, 0, fn);
    CHECK(one[0] == doctest::Approx(0.53));
    CHECK(one[1] == doctest::Approx(0.17));
    cfg.steps = 10;
    std::vector<double> trace;
    const Tensor many = pgd_ascend(x, cfg, 0, fn, &trace);
    CHECK(many[0] == doctest::Approx(0.6));
    CHECK(many[1] == doctest::Approx(0.1));
    CHECK(trace.size() == 11);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1]);
    cfg.steps = 0;
    CHECK(pgd_ascend(x, cfg, 0, fn) == x);
  }

  TEST_CASE("pgd_pair stays feasible and raises the pair loss") {
    const EncoderSpec spec = verify_micro_spec(4);
    const Encoder enc(spec, 2);
    const ViewBatch b = random_view_batch(spec, 4, 8.0 / 255.0, 3);
    PgdConfig cfg = PgdConfig::pretraining();
    std::vector<double> trace;
    const auto [ai, aj] = pgd_pair(b.view_i, b.view_j, enc, 0.5, cfg, 9, Mode::train, &trace);
    for (const auto* p : {&ai, &aj}) {
      const Tensor& anchor = p == &ai ? b.view_i : b.view_j;
      for (std::size_t i = 0; i < p->numel(); ++i) {
        REQUIRE(std::abs((*p)[i] - anchor[i]) <= cfg.epsilon + 1e-12);
        REQUIRE(((*p)[i] >= 0.0 && (*p)[i] <= 1.0));
      }
    }
    CHECK(adversarial_pair_loss(ai, aj, enc, 0.5) > adversarial_pair_loss(b.view_i, b.view_j, enc, 0.5));
    CHECK(trace.back() > trace.front());

    cfg.steps = 0;
    cfg.random_start = false;
    const auto [zi, zj] = pgd_pair(b.view_i, b.view_j, enc, 0.5, cfg, 9);
    CHECK(zi == b.view_i);
    CHECK(zj == b.view_j);
    cfg = PgdConfig::pretraining();
    cfg.epsilon = 0.0;
    const auto [ei, ej] = pgd_pair(b.view_i, b.view_j, enc, 0.5, cfg, 9);
    CHECK(ei == b.view_i);
    CHECK(ej == b.view_j);
  }

  TEST_CASE("attack presets") {
    CHECK(PgdConfig::pretraining().steps == 5);
    CHECK(PgdConfig::finetuning().steps == 10);
    CHECK(PgdConfig::evaluation().steps == 20);
    for (const auto& c : {PgdConfig::pretraining(), PgdConfig::finetuning(), PgdConfig::evaluation()}) {
      CHECK(c.epsilon == doctest::Approx(8.0 / 255.0));
      CHECK(c.step_size == doctest::Approx(2.0 / 255.0));
      CHECK(c.random_start);
    }
    PgdConfig bad{-1.0, 1, 0.1, false};
    CHECK_THROWS(bad.validate());
  }
}

TEST_SUITE("schedule") {
  TEST_CASE("dynamic schedule reference points") {
    auto [m0, w0] = dynacl_schedule(0, 50, 1000, 2.0 / 3.0);
    CHECK(m0 == 1.0);
    CHECK(w0 == 0.0);
    auto [m5, w5] = dynacl_schedule(500, 50, 1000, 2.0 / 3.0);
    CHECK(m5 == doctest::Approx(0.5));
    CHECK(w5 == doctest::Approx(1.0 / 3.0));
    auto [m9, w9] = dynacl_schedule(999, 50, 1000, 2.0 / 3.0);
    CHECK(m9 == doctest::Approx(0.05));
    CHECK(w9 == doctest::Approx(0.63333).epsilon(1e-5));
    CHECK_THROWS(dynacl_schedule(1000, 50, 1000, 2.0 / 3.0));
  }

  TEST_CASE("schedule is monotone") {
    double mu = 2.0, omega = -1.0;
    for (int e = 0; e < 1000; ++e) {
      const auto [m, w] = dynacl_schedule(e, 50, 1000, 2.0 / 3.0);
      CHECK(m <= mu);
      CHECK(w >= omega);
      mu = m;
      omega = w;
    }
  }

  TEST_CASE("cosine learning rate") {
    CHECK(cosine_lr(0, 100, 5.0) == doctest::Approx(5.0));
    CHECK(cosine_lr(50, 100, 5.0) == doctest::Approx(2.5));
    CHECK(cosine_lr(100, 100, 5.0) == doctest::Approx(0.0));
  }

  TEST_CASE("sgd with momentum and weight decay") {
    Sgd opt({0.9, 0.1}, 1);
    std::vector<double> p{1.0};
    const std::vector<double> g{0.5};
    opt.step(p, g, 0.1);
    // v = 0.5 + 0.1 * 1 = 0.6; p = 1 - 0.06
    CHECK(p[0] == doctest::Approx(0.94));
    opt.step(p, g, 0.1);
    // v = 0.9 * 0.6 + 0.5 + 0.094 = 1.134
    CHECK(opt.velocity()[0] == doctest::Approx(1.134));
    CHECK(p[0] == doctest::Approx(0.94 - 0.1134));
  }
}
