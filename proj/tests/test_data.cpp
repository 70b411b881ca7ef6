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

#include <filesystem>
#include <fstream>

#include "airacl/augment.hpp"
#include "airacl/config.hpp"
#include "airacl/dataset.hpp"
#include "airacl/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace airacl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("airacl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Sample blob_sample(std::uint64_t seed) {
  BlobSpec b;
  b.count = 1;
  b.seed = seed;
  return make_blobs(b).sample(0);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("slice, gather and concat keep sample order") {
    const Tensor t = test::random_tensor({5, 2, 3, 3}, 1);
    const Tensor s = t.slice(1, 2);
    CHECK(s.shape() == Shape{2, 2, 3, 3});
    CHECK(s.at(0, 1, 2, 2) == t.at(1, 1, 2, 2));
    const std::vector<std::size_t> idx{4, 0};
    const Tensor g = t.gather(idx);
    CHECK(g.at(0, 0, 0, 0) == t.at(4, 0, 0, 0));
    CHECK(g.at(1, 1, 1, 1) == t.at(0, 1, 1, 1));
    const Tensor c = concat(s, g);
    CHECK(c.shape().n == 4);
    CHECK(c.slice(2, 2) == g);
    CHECK(max_abs_diff(c.slice(0, 2), s) == 0.0);
  }
}

TEST_SUITE("augment") {
  TEST_CASE("strength zero is the identity") {
    const Sample x = blob_sample(3);
    const Sample y = augment(x, 0.0, 123);
    CHECK(y.pixels == x.pixels);
    CHECK(y.label == x.label);
  }

  TEST_CASE("same seed reproduces the view, different seeds differ") {
    const Sample x = blob_sample(4);
    CHECK(augment(x, 1.0, 7).pixels == augment(x, 1.0, 7).pixels);
    int differing = 0;
    for (std::uint64_t s = 0; s < 10; ++s)
      differing += augment(x, 1.0, s).pixels == augment(x, 1.0, s + 100).pixels ? 0 : 1;
    CHECK(differing >= 9);
  }

  TEST_CASE("views stay in the unit cube and keep their shape") {
    const Sample x = blob_sample(5);
    for (double mu : {0.1, 0.5, 1.0})
      for (std::uint64_t s = 0; s < 20; ++s) {
        const Sample y = augment(x, mu, s);
        CHECK(y.pixels.shape() == x.pixels.shape());
        for (double v : y.pixels.values()) REQUIRE((v >= 0.0 && v <= 1.0));
      }
  }

  TEST_CASE("weaker strength moves pixels less on average") {
    const Sample x = blob_sample(6);
    auto mean_shift = [&](double mu) {
      double acc = 0.0;
      for (std::uint64_t s = 0; s < 40; ++s) acc += max_abs_diff(augment(x, mu, s).pixels, x.pixels);
      return acc / 40;
    };
    CHECK(mean_shift(0.1) < mean_shift(1.0));
  }

  TEST_CASE("full-frame crop is the identity") {
    const Sample x = blob_sample(8);
    const Shape& s = x.pixels.shape();
    const Tensor c = crop_resize(x.pixels, 0, 0, static_cast<double>(s.h), static_cast<double>(s.w));
    CHECK(max_abs_diff(c, x.pixels) < 1e-12);
  }

  TEST_CASE("out-of-range strength and pixels are rejected") {
    const Sample x = blob_sample(9);
    CHECK_THROWS_AS(augment(x, 1.5, 0), PreconditionError);
    Sample bad = x;
    bad.pixels[0] = 2.0;
    CHECK_THROWS_AS(augment(bad, 0.5, 0), PreconditionError);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("blobs are balanced, labeled and deterministic") {
    BlobSpec b;
    b.count = 40;
    b.seed = 11;
    const Dataset d = make_blobs(b);
    CHECK(d.size() == 40);
    CHECK(d.labeled());
    std::vector<int> counts(4, 0);
    for (int l : d.labels) ++counts[static_cast<std::size_t>(l)];
    CHECK(counts == std::vector<int>{10, 10, 10, 10});
    CHECK(make_blobs(b).images == d.images);
    for (double v : d.images.values()) REQUIRE((v >= 0.0 && v <= 1.0));
  }

  TEST_CASE("packed round trip through a descriptor") {
    const fs::path dir = scratch_dir("packed");
    BlobSpec b;
    b.count = 6;
    b.height = b.width = 8;
    const Dataset d = make_blobs(b);
    write_packed(d, dir / "train.bin");
    DatasetDescriptor desc{"toy", 3, 8, 8, 4, dir / "train.bin", {}};
    write_descriptor(desc, dir / "train.toml");
    const Dataset back = load_dataset(dir / "train.toml");
    CHECK(back.labels == d.labels);
    CHECK(max_abs_diff(back.images, d.images) < 1e-6);
    CHECK(back.descriptor.name == "toy");
  }

  TEST_CASE("raw directory of float files with labels") {
    const fs::path dir = scratch_dir("raw");
    for (int k = 0; k < 3; ++k) {
      std::vector<float> px(2 * 2 * 2, static_cast<float>(k) / 4.0f);
      std::ofstream f(dir / ("img" + std::to_string(k) + ".f32"), std::ios::binary);
      f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size() * 4));
    }
    std::ofstream(dir / "labels.txt") << "2 0 1\n";
    const Dataset d = read_raw_dir(dir, 2, 2, 2);
    CHECK(d.size() == 3);
    CHECK(d.labels == std::vector<int>{2, 0, 1});
    CHECK(d.images.at(2, 1, 1, 1) == doctest::Approx(0.5));
  }

  TEST_CASE("missing files and shape mismatches raise") {
    const fs::path dir = scratch_dir("missing");
    CHECK_THROWS_AS(load_dataset(dir / "nope.toml"), IoError);
    std::ofstream(dir / "d.toml") << "channels = 3\nheight = 4\nwidth = 4\npacked = x.bin\n";
    CHECK_THROWS_AS(load_dataset(dir / "d.toml"), IoError);
    BlobSpec b;
    b.count = 2;
    b.height = b.width = 8;
    write_packed(make_blobs(b), dir / "x.bin");
    CHECK_THROWS_AS(load_dataset(dir / "d.toml"), ConfigError);
    std::ofstream(dir / "both.toml") << "channels = 3\nheight = 4\nwidth = 4\n";
    CHECK_THROWS_AS(read_descriptor(dir / "both.toml"), ConfigError);
  }
}

TEST_SUITE("config") {
  TEST_CASE("sections, comments, fractions and booleans") {
    const auto kv = KeyValueConfig::parse(
        "name = \"a # b\"  # trailing\n[attack]\neps = 8/255\nsteps = 5\n[loss]\ncalibrated = false\n");
    CHECK(kv.get_string("name", "") == "a # b");
    CHECK(kv.get_double("attack.eps", 0) == doctest::Approx(8.0 / 255.0));
    CHECK(kv.get_int("attack.steps", 0) == 5);
    CHECK_FALSE(kv.get_bool("loss.calibrated", true));
    CHECK(kv.get_int("missing", 42) == 42);
  }

  TEST_CASE("malformed input is a config error") {
    CHECK_THROWS_AS(KeyValueConfig::parse("[oops\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), ConfigError);
    const auto kv = KeyValueConfig::parse("x = abc\nb = maybe\n");
    CHECK_THROWS_AS(kv.get_double("x", 0), ConfigError);
    CHECK_THROWS_AS(kv.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(kv.require_int("y"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/cfg.toml"), ConfigError);
  }
}
