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

#include <cstdint>
#include <span>
#include <vector>

#include "airacl/encoder.hpp"

namespace airacl {

struct KMeansConfig {
  std::size_t k = 2;
  int restarts = 10;
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;  // (k x dim)
  double inertia = 0.0;
  int iterations = 0;
  /// Number of times an empty cluster was re-seeded with the point farthest
  /// from its assigned center, summed over the kept restart.
  int empty_reseeds = 0;
};

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins. Rows of `points` are samples.
KMeansResult kmeans(const Matrix& points, const KMeansConfig& cfg);

/// Fraction of points whose cluster's majority ground-truth label matches their own.
double clustering_purity(std::span<const int> clusters, std::span<const int> truth);

}  // namespace airacl
