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

#include <filesystem>
#include <string>
#include <vector>

#include "airacl/trainer.hpp"

namespace airacl {

/// Parses metrics.jsonl. Throws IoError when the file is missing and
/// ConfigError on a malformed line.
std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path);

/// Per-epoch table with the JSONL field order.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

/// Line chart of total, acl_loss and sir + air against epoch.
std::string loss_curve_svg(const std::vector<EpochMetrics>& metrics);

struct ReportFiles {
  std::filesystem::path metrics_csv, summary_csv, loss_curve;
};

/// Writes metrics.csv, summary.csv (the final record) and loss_curve.svg into
/// `dir`. Throws IoError when there are no records.
ReportFiles write_report(const std::vector<EpochMetrics>& metrics, const std::filesystem::path& dir);

}  // namespace airacl
