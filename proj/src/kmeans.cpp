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

#include "airacl/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "airacl/error.hpp"
#include "airacl/kernels.hpp"
#include "airacl/rng.hpp"

namespace airacl {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix plus_plus_init(const RowMatrix& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  RowMatrix c(static_cast<Eigen::Index>(k), x.cols());
  c.row(0) = x.row(static_cast<Eigen::Index>(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * n))));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(j - 1))).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * n));
    }
    c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
  }
  return c;
}

KMeansResult lloyd(const RowMatrix& x, RowMatrix centers, int max_iterations) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(centers.rows());
  const auto dim = static_cast<std::size_t>(x.cols());
  const std::span<const double> pts(x.data(), n * dim);
  KMeansResult r;
  r.labels.assign(n, -1);
  std::vector<int> labels(n);
  std::vector<double> d2(n);
  for (int it = 0; it < max_iterations; ++it) {
    kernels::parallel::assign_nearest(pts, {centers.data(), k * dim}, dim, labels, d2);
    r.iterations = it + 1;
    const bool converged = labels == r.labels;
    r.labels = labels;
    if (converged) break;

    RowMatrix sums = RowMatrix::Zero(centers.rows(), centers.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    std::vector<char> taken(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        centers.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point not already used.
      std::size_t far = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && d2[i] > best) {
          best = d2[i];
          far = i;
        }
      taken[far] = 1;
      centers.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
      ++r.empty_reseeds;
    }
  }
  kernels::parallel::assign_nearest(pts, {centers.data(), k * dim}, dim, labels, d2);
  r.labels = labels;
  r.inertia = 0.0;
  for (double v : d2) r.inertia += v;
  r.centers = centers;
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, const KMeansConfig& cfg) {
  require(cfg.k >= 2, "k-means needs k >= 2");
  require(cfg.restarts >= 1 && cfg.max_iterations >= 1, "k-means needs positive restarts/iterations");
  require(static_cast<std::size_t>(points.rows()) >= cfg.k, "k-means needs at least k points");
  require(points.allFinite(), "k-means input is not finite");
  const RowMatrix x = points;
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(restart)}));
    KMeansResult r = lloyd(x, plus_plus_init(x, cfg.k, rng), cfg.max_iterations);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

double clustering_purity(std::span<const int> clusters, std::span<const int> truth) {
  require(clusters.size() == truth.size() && !clusters.empty(), "purity: size mismatch");
  std::map<int, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < clusters.size(); ++i) ++table[clusters[i]][truth[i]];
  std::size_t hits = 0;
  for (const auto& [c, row] : table) {
    std::size_t m = 0;
    for (const auto& [y, count] : row) m = std::max(m, count);
    hits += m;
  }
  return static_cast<double>(hits) / static_cast<double>(clusters.size());
}

}  // namespace airacl
