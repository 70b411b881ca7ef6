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

#include "airacl/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "airacl/error.hpp"
#include "json.hpp"

namespace airacl {

namespace fs = std::filesystem;

std::vector<EpochMetrics> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing metrics file " + path.string());
  std::vector<EpochMetrics> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EpochMetrics m;
      m.epoch = j.at("epoch").get<int>();
      m.lr = j.at("lr").get<double>();
      m.mu = j.at("mu").get<double>();
      m.omega = j.at("omega").get<double>();
      m.acl_loss = j.at("acl_loss").get<double>();
      m.sir = j.at("sir").get<double>();
      m.air = j.at("air").get<double>();
      m.total = j.at("total").get<double>();
      out.push_back(m);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "epoch,lr,mu,omega,acl_loss,sir,air,total\n";
  for (const auto& m : metrics)
    out << m.epoch << "," << m.lr << "," << m.mu << "," << m.omega << "," << m.acl_loss << ","
        << m.sir << "," << m.air << "," << m.total << "\n";
  return out.str();
}

std::string loss_curve_svg(const std::vector<EpochMetrics>& metrics) {
  constexpr double W = 640, H = 400, L = 60, R = 150, T = 30, B = 50;
  struct Series {
    const char* name;
    const char* color;
    std::vector<double> y;
  };
  std::vector<Series> series{{"total", "#1f77b4", {}}, {"acl_loss", "#ff7f0e", {}}, {"sir + air", "#2ca02c", {}}};
  for (const auto& m : metrics) {
    series[0].y.push_back(m.total);
    series[1].y.push_back(m.acl_loss);
    series[2].y.push_back(m.sir + m.air);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series)
    for (double v : s.y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  lo = std::min(lo, 0.0);
  const double e0 = metrics.empty() ? 0.0 : metrics.front().epoch;
  const double e1 = metrics.empty() ? 1.0 : std::max<double>(metrics.back().epoch, e0 + 1.0);
  const auto px = [&](double e) { return L + (e - e0) / (e1 - e0) * (W - L - R); };
  const auto py = [&](double v) { return H - B - (v - lo) / (hi - lo) * (H - T - B); };

  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
        << std::setprecision(3) << v << std::setprecision(2) << "</text>\n";
  }
  out << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\">" << e0 << "</text>\n";
  out << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"end\">" << e1 << "</text>\n";
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">epoch</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke=\"" << series[s].color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < metrics.size(); ++k)
      out << px(metrics[k].epoch) << "," << py(series[s].y[k]) << " ";
    out << "\"/>\n";
    const double ly = T + 20.0 * static_cast<double>(s);
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << series[s].color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

ReportFiles write_report(const std::vector<EpochMetrics>& metrics, const fs::path& dir) {
  if (metrics.empty()) throw IoError("no metrics records to report");
  fs::create_directories(dir);
  ReportFiles f{dir / "metrics.csv", dir / "summary.csv", dir / "loss_curve.svg"};
  const auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!(out << text)) throw IoError("cannot write " + p.string());
  };
  write(f.metrics_csv, metrics_csv(metrics));
  write(f.summary_csv, metrics_csv({metrics.back()}));
  write(f.loss_curve, loss_curve_svg(metrics));
  return f;
}

}  // namespace airacl
