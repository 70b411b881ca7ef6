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

#include "airacl/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "airacl/config.hpp"
#include "airacl/error.hpp"
#include "airacl/rng.hpp"

namespace airacl {

static_assert(std::endian::native == std::endian::little,
              "packed dataset IO assumes a little-endian host");

namespace fs = std::filesystem;

bool Dataset::labeled() const {
  return !labels.empty() && std::all_of(labels.begin(), labels.end(), [](int l) { return l >= 0; });
}

Sample Dataset::sample(std::size_t k) const {
  Sample s{images.slice(k, 1), std::nullopt};
  if (k < labels.size() && labels[k] >= 0) s.label = labels[k];
  return s;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.descriptor = descriptor;
  out.images = images.gather(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(i < labels.size() ? labels[i] : -1);
  return out;
}

DatasetDescriptor read_descriptor(const fs::path& path) {
  const KeyValueConfig kv = KeyValueConfig::load(path);
  DatasetDescriptor d;
  d.name = kv.get_string("name", path.stem().string());
  d.channels = static_cast<std::size_t>(kv.require_int("channels"));
  d.height = static_cast<std::size_t>(kv.require_int("height"));
  d.width = static_cast<std::size_t>(kv.require_int("width"));
  d.classes = static_cast<std::size_t>(kv.get_int("classes", 0));
  const fs::path base = path.parent_path();
  if (kv.has("packed")) d.packed = base / kv.get_string("packed", "");
  if (kv.has("raw_dir")) d.raw_dir = base / kv.get_string("raw_dir", "");
  if (d.packed.empty() == d.raw_dir.empty())
    throw ConfigError("descriptor " + path.string() + ": set exactly one of packed / raw_dir");
  if (d.channels == 0 || d.height == 0 || d.width == 0)
    throw ConfigError("descriptor " + path.string() + ": channels/height/width must be positive");
  return d;
}

void write_descriptor(const DatasetDescriptor& d, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "name = " << d.name << "\nchannels = " << d.channels << "\nheight = " << d.height
    << "\nwidth = " << d.width << "\nclasses = " << d.classes << "\n";
  const fs::path base = path.parent_path();
  if (!d.packed.empty()) f << "packed = " << fs::relative(d.packed, base).string() << "\n";
  if (!d.raw_dir.empty()) f << "raw_dir = " << fs::relative(d.raw_dir, base).string() << "\n";
}

Dataset load_dataset(const DatasetDescriptor& d) {
  Dataset ds;
  if (!d.packed.empty()) {
    if (!fs::exists(d.packed)) throw IoError("dataset file not found: " + d.packed.string());
    ds = read_packed(d.packed);
  } else {
    if (!fs::is_directory(d.raw_dir))
      throw IoError("dataset directory not found: " + d.raw_dir.string());
    ds = read_raw_dir(d.raw_dir, d.channels, d.height, d.width);
  }
  const Shape& s = ds.images.shape();
  if (s.c != d.channels || s.h != d.height || s.w != d.width)
    throw ConfigError("dataset " + d.name + ": pixels shaped " + s.str() +
                      " do not match the descriptor");
  for (int l : ds.labels)
    if (d.classes > 0 && l >= static_cast<int>(d.classes))
      throw ConfigError("dataset " + d.name + ": label " + std::to_string(l) + " out of range");
  ds.descriptor = d;
  return ds;
}

Dataset load_dataset(const fs::path& descriptor_path) {
  if (!fs::exists(descriptor_path))
    throw IoError("dataset descriptor not found: " + descriptor_path.string());
  return load_dataset(read_descriptor(descriptor_path));
}

namespace {

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const fs::path& path) {
  T v{};
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw IoError("truncated dataset file: " + path.string());
  return v;
}

}  // namespace

void write_packed(const Dataset& ds, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  const Shape& s = ds.images.shape();
  f.write("AIRD", 4);
  put<std::uint32_t>(f, kPackedVersion);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(s.n));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(s.c));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(s.h));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(s.w));
  put<std::uint32_t>(f, kDtypeFloat32);
  std::vector<float> buf(ds.images.numel());
  std::transform(ds.images.values().begin(), ds.images.values().end(), buf.begin(),
                 [](double v) { return static_cast<float>(v); });
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  const bool has_labels = ds.labels.size() == s.n;
  put<std::uint32_t>(f, has_labels ? 1u : 0u);
  if (has_labels)
    for (int l : ds.labels) put<std::int32_t>(f, l);
  if (!f) throw IoError("write failed: " + path.string());
}

Dataset read_packed(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "AIRD", 4) != 0)
    throw IoError("bad magic in " + path.string());
  const auto version = get<std::uint32_t>(f, path);
  if (version != kPackedVersion)
    throw IoError("unsupported packed version " + std::to_string(version) + " in " +
                  path.string());
  Shape s;
  s.n = get<std::uint32_t>(f, path);
  s.c = get<std::uint32_t>(f, path);
  s.h = get<std::uint32_t>(f, path);
  s.w = get<std::uint32_t>(f, path);
  if (get<std::uint32_t>(f, path) != kDtypeFloat32)
    throw IoError("unsupported dtype in " + path.string());
  std::vector<float> buf(s.numel());
  if (!f.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float))))
    throw IoError("truncated pixel data in " + path.string());
  Dataset ds;
  ds.images = Tensor(s);
  std::copy(buf.begin(), buf.end(), ds.images.data());
  if (get<std::uint32_t>(f, path) == 1) {
    ds.labels.resize(s.n);
    for (auto& l : ds.labels) l = get<std::int32_t>(f, path);
  } else {
    ds.labels.assign(s.n, -1);
  }
  return ds;
}

Dataset read_raw_dir(const fs::path& dir, std::size_t c, std::size_t h, std::size_t w) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".f32") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .f32 files in " + dir.string());
  const Shape s{files.size(), c, h, w};
  Dataset ds;
  ds.images = Tensor(s);
  std::vector<float> buf(s.per_sample());
  for (std::size_t k = 0; k < files.size(); ++k) {
    if (fs::file_size(files[k]) != buf.size() * sizeof(float))
      throw IoError(files[k].string() + ": expected " + std::to_string(buf.size()) + " floats");
    std::ifstream f(files[k], std::ios::binary);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    std::copy(buf.begin(), buf.end(), ds.images.data() + k * s.per_sample());
  }
  ds.labels.assign(s.n, -1);
  const fs::path label_file = dir / "labels.txt";
  if (fs::exists(label_file)) {
    std::ifstream f(label_file);
    for (std::size_t k = 0; k < s.n; ++k)
      if (!(f >> ds.labels[k])) throw IoError(label_file.string() + ": too few labels");
  }
  return ds;
}

Dataset make_blobs(const BlobSpec& spec) {
  require(spec.classes >= 1 && spec.count >= 1, "make_blobs: empty spec");
  const Shape s{spec.count, spec.channels, spec.height, spec.width};
  Dataset ds;
  ds.images = Tensor(s);
  ds.labels.resize(spec.count);
  ds.descriptor = {"blobs" + std::to_string(spec.classes), spec.channels, spec.height,
                   spec.width, spec.classes, {}, {}};
  Rng rng(spec.seed);
  const double H = static_cast<double>(spec.height), W = static_cast<double>(spec.width);
  for (std::size_t k = 0; k < spec.count; ++k) {
    const std::size_t cls = k % spec.classes;
    ds.labels[k] = static_cast<int>(cls);
    // Class centers sit on a circle; colors rotate through the channels.
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(cls) /
                         static_cast<double>(spec.classes);
    const double cy = H / 2 + 0.28 * H * std::sin(angle) + uniform(rng, -1, 1) * spec.position_jitter;
    const double cx = W / 2 + 0.28 * W * std::cos(angle) + uniform(rng, -1, 1) * spec.position_jitter;
    const double sigma = spec.blob_sigma * (1.0 + uniform(rng, -1, 1) * spec.sigma_jitter);
    const double dy0 = uniform(rng, 0, H), dx0 = uniform(rng, 0, W);
    const double dsigma = uniform(rng, 1.5, 3.0);
    std::vector<double> tint(s.c);
    for (double& t : tint) t = uniform(rng, 0.0, spec.max_tint);
    for (std::size_t c = 0; c < s.c; ++c) {
      const double amp = (c == cls % s.c) ? 0.9 : (s.c > 1 ? 0.25 : 0.9);
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          const double yy = static_cast<double>(y), xx = static_cast<double>(x);
          const double r2 = (yy - cy) * (yy - cy) + (xx - cx) * (xx - cx);
          const double d2 = (yy - dy0) * (yy - dy0) + (xx - dx0) * (xx - dx0);
          const double blob = amp * std::exp(-r2 / (2 * sigma * sigma));
          const double distractor = spec.distractor * std::exp(-d2 / (2 * dsigma * dsigma));
          const double v = tint[c] + blob + distractor + spec.noise * uniform(rng, -1, 1);
          ds.images.at(k, c, y, x) = std::clamp(v, 0.0, 1.0);
        }
    }
  }
  return ds;
}

}  // namespace airacl
