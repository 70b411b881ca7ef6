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

#include "airacl/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "airacl/error.hpp"

namespace airacl {

namespace fs = std::filesystem;

namespace {

class Writer {
 public:
  explicit Writer(const fs::path& p) : f_(p, std::ios::binary) {
    if (!f_) throw IoError("cannot write " + p.string());
  }
  template <typename T>
  void put(T v) {
    f_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    f_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_vector(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    f_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void raw(const char* p, std::size_t n) { f_.write(p, static_cast<std::streamsize>(n)); }
  bool ok() const { return static_cast<bool>(f_); }
  void close() { f_.close(); }

 private:
  std::ofstream f_;
};

class Reader {
 public:
  explicit Reader(const fs::path& p) : path_(p), f_(p, std::ios::binary) {
    if (!f_) throw IoError("cannot open checkpoint " + p.string());
  }
  template <typename T>
  T get() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    check_length(n);
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::vector<double> get_vector() {
    const auto n = get<std::uint64_t>();
    check_length(n * sizeof(double));
    std::vector<double> v(n);
    read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
    return v;
  }
  void read(char* p, std::size_t n) {
    if (!f_.read(p, static_cast<std::streamsize>(n)))
      throw IoError("truncated checkpoint " + path_.string());
  }

 private:
  void check_length(std::uint64_t bytes) {
    if (bytes > fs::file_size(path_)) throw IoError("corrupt length field in " + path_.string());
  }
  fs::path path_;
  std::ifstream f_;
};

}  // namespace

void save_checkpoint(const Checkpoint& c, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    Writer w(tmp);
    w.raw("AIRC", 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint64_t>(c.spec.hash());
    w.put_string(c.spec.to_text());
    w.put_vector(c.params);
    w.put_vector(c.buffers);
    w.put_vector(c.optimizer_velocity);
    w.put<std::int32_t>(c.epoch);
    w.put<std::int32_t>(c.scheduler.epoch);
    w.put<std::int32_t>(c.scheduler.total_epochs);
    w.put<std::int32_t>(c.scheduler.decay_period);
    w.put<double>(c.scheduler.reweight_rate);
    w.put<double>(c.scheduler.mu);
    w.put<double>(c.scheduler.omega);
    w.put_string(c.rng_state);
    w.put<std::uint64_t>(c.head.in);
    w.put<std::uint64_t>(c.head.classes);
    w.put_vector(c.head.params);
    if (!w.ok()) throw IoError("write failed: " + tmp.string());
    w.close();
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
  Reader r(path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, "AIRC", 4) != 0) throw IoError("not a checkpoint: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto stored_hash = r.get<std::uint64_t>();
  Checkpoint c;
  c.spec = EncoderSpec::from_text(r.get_string());
  if (c.spec.hash() != stored_hash)
    throw IoError("checkpoint spec hash does not match its spec text: " + path.string());
  c.params = r.get_vector();
  c.buffers = r.get_vector();
  c.optimizer_velocity = r.get_vector();
  c.epoch = r.get<std::int32_t>();
  c.scheduler.epoch = r.get<std::int32_t>();
  c.scheduler.total_epochs = r.get<std::int32_t>();
  c.scheduler.decay_period = r.get<std::int32_t>();
  c.scheduler.reweight_rate = r.get<double>();
  c.scheduler.mu = r.get<double>();
  c.scheduler.omega = r.get<double>();
  c.rng_state = r.get_string();
  c.head.in = r.get<std::uint64_t>();
  c.head.classes = r.get<std::uint64_t>();
  c.head.params = r.get_vector();
  if (c.head.params.size() != c.head.classes * (c.head.in + 1))
    throw IoError("checkpoint head size mismatch: " + path.string());
  return c;
}

Checkpoint load_checkpoint(const fs::path& path, const EncoderSpec& expected) {
  Checkpoint c = load_checkpoint(path);
  if (c.spec.hash() != expected.hash())
    throw ConfigError("checkpoint " + path.string() + " was written for a different encoder spec");
  return c;
}

Checkpoint snapshot(const Encoder& encoder) {
  Checkpoint c;
  c.spec = encoder.spec();
  c.params.assign(encoder.params().begin(), encoder.params().end());
  c.buffers.assign(encoder.buffers().begin(), encoder.buffers().end());
  return c;
}

Encoder restore_encoder(const Checkpoint& c) {
  Encoder e(c.spec, 0);
  if (c.params.size() != e.num_params() || c.buffers.size() != e.buffers().size())
    throw IoError("checkpoint parameter count does not match its encoder spec");
  std::copy(c.params.begin(), c.params.end(), e.params().begin());
  std::copy(c.buffers.begin(), c.buffers.end(), e.buffers().begin());
  return e;
}

}  // namespace airacl
